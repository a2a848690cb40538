"""Harmonic density-matrix stacks r_N and their time-domain synthesis."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class HarmonicStack:
    """Harmonic components r_N of the density matrix, N in [n_min, n_max].

    ``components[k]`` is the N x N matrix r_N with N = n_min + k.  ``time``
    is the physical time the components refer to; ``steady`` marks a stack
    returned by steady-state detection.
    """

    components: np.ndarray          # (n_blocks, N, N) complex
    n_min: int
    n_max: int
    omega_c: float
    time: float = 0.0
    steady: bool = False

    def __post_init__(self):
        nb = self.n_max - self.n_min + 1
        c = self.components
        if c.ndim != 3 or c.shape[0] != nb or c.shape[1] != c.shape[2]:
            raise DimensionMismatch(
                f"components shape {c.shape} does not match window "
                f"[{self.n_min}, {self.n_max}]")

    @property
    def n_blocks(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def block(self, n: int) -> np.ndarray:
        """The matrix r_N for harmonic index ``n``."""
        if not (self.n_min <= n <= self.n_max):
            raise DimensionMismatch(f"harmonic {n} outside [{self.n_min}, {self.n_max}]")
        return self.components[n - self.n_min]

    def component(self, i: int, j: int, n: int) -> complex:
        return self.block(n)[i, j]

    def marked_steady(self) -> "HarmonicStack":
        return replace(self, steady=True)

    @classmethod
    def initial(cls, rho0: np.ndarray, n_min: int, n_max: int,
                omega_c: float) -> "HarmonicStack":
        """Stack with r_0 = rho0 and every other component zero."""
        rho0 = np.asarray(rho0, dtype=complex)
        nb = n_max - n_min + 1
        comp = np.zeros((nb, *rho0.shape), dtype=complex)
        comp[-n_min] = rho0
        return cls(components=comp, n_min=n_min, n_max=n_max, omega_c=omega_c)


def reconstruct_time_domain(stack: HarmonicStack, t: float) -> np.ndarray:
    """Finite Fourier synthesis rho(t) = sum_N exp(-i N wc t) r_N."""
    phases = np.exp(-1j * stack.harmonics * stack.omega_c * t)
    return np.tensordot(phases, stack.components, axes=(0, 0))

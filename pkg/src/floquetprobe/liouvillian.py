"""Superoperator parts L0, L+, L- and the block-tridiagonal harmonic generator.

The density matrix rho_ij is vectorised row-major, r[i*N + j] = rho_ij; every
module in the package shares this stacking.  With that convention
``vec(A @ rho @ B) = kron(A, B.T) @ vec(rho)``.

The master-equation generator splits as

    L(t) = L0 + exp(+i wc t) L_minus + exp(-i wc t) L_plus,

where L0 holds the static Hamiltonian commutator plus all dissipators and
L_plus / L_minus hold the coupling-field commutator terms attached to the
exp(-i wc t) / exp(+i wc t) phases.  Expanding r(t) = sum_N exp(-i N wc t)
r_N(t) gives

    dr_N/dt = A_N r_N + L_plus r_{N-1} + L_minus r_{N+1},
    A_N = L0 + i N wc I,

a block-tridiagonal constant generator M over the stacked components, with
zero padding outside the truncation window [n_min, n_max].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionMismatch, TopologyError
from .model import GROUP_B, SystemModel
from .stack import HarmonicStack

DENSE_CAP = 8192


@dataclass(frozen=True)
class SuperoperatorParts:
    """Constant pieces of the master-equation generator (N^2 x N^2 each)."""

    l0: np.ndarray
    l_plus: np.ndarray
    l_minus: np.ndarray
    dim: int


@dataclass(frozen=True)
class FloquetGenerator:
    """Block-tridiagonal generator over harmonic components r_N.

    Diagonal blocks A_N = L0 + i N wc I for N in [n_min, n_max]; L_plus on
    the block subdiagonal, L_minus on the block superdiagonal.
    """

    parts: SuperoperatorParts
    n_min: int
    n_max: int
    omega_c: float

    @property
    def n_blocks(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def block_dim(self) -> int:
        return self.parts.dim

    @property
    def total_dim(self) -> int:
        return self.n_blocks * self.parts.dim

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)


def commutator_superoperator(h: np.ndarray) -> np.ndarray:
    """Row-major vectorisation of -i [h, .]."""
    n = h.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def static_hamiltonian(model: SystemModel, delta_omega_p: float = 0.0) -> np.ndarray:
    """Probe-RWA static Hamiltonian (hbar = 1).

    Group-A diagonal carries +delta_omega, group-B carries -(detuning at the
    requested probe offset), and the probe Rabi matrix enters as -1/2 rabi_p.
    """
    n = model.n_states
    h = np.zeros((n, n), dtype=complex)
    for s in model.states:
        if s.group == GROUP_B:
            h[s.index, s.index] = -(s.detuning_p + delta_omega_p)
        else:
            h[s.index, s.index] = s.delta_omega or 0.0
    h -= 0.5 * model.drive.rabi_p
    return h


def coupling_hamiltonians(model: SystemModel) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrices of exp(-i wc t) and exp(+i wc t) in H(t)."""
    h_minus = -0.5 * model.drive.rabi_c           # with exp(-i wc t)
    h_plus = h_minus.conj().T                      # with exp(+i wc t)
    return h_minus, h_plus


def collapse_operators(model: SystemModel) -> list[np.ndarray]:
    n = model.n_states
    ops = []
    for c in model.channels:
        if c.rate == 0.0:
            continue
        op = np.zeros((n, n), dtype=complex)
        op[c.to_state, c.from_state] = np.sqrt(c.rate)
        ops.append(op)
    return ops


def build_parts(model: SystemModel, delta_omega_p: float = 0.0) -> SuperoperatorParts:
    """Assemble L0 (static + dissipators) and the coupling parts L+, L-.

    Raises TopologyError if the coupling Rabi matrix reaches outside the
    group-B block.
    """
    n = model.n_states
    b_set = set(model.group_b)
    rc = model.drive.rabi_c
    nz = np.argwhere(rc != 0)
    for i, j in nz:
        if int(i) not in b_set or int(j) not in b_set:
            raise TopologyError(
                f"coupling Rabi entry ({i}, {j}) outside the group-B block")

    l0 = commutator_superoperator(static_hamiltonian(model, delta_omega_p))
    eye = np.eye(n)
    for op in collapse_operators(model):
        opd_op = op.conj().T @ op
        l0 = l0 + (np.kron(op, op.conj())
                   - 0.5 * np.kron(opd_op, eye)
                   - 0.5 * np.kron(eye, opd_op.T))

    h_minus, h_plus = coupling_hamiltonians(model)
    l_plus = commutator_superoperator(h_minus)     # coefficient of exp(-i wc t)
    l_minus = commutator_superoperator(h_plus)     # coefficient of exp(+i wc t)
    return SuperoperatorParts(l0=_frozen(l0), l_plus=_frozen(l_plus),
                              l_minus=_frozen(l_minus), dim=n * n)


def assemble_generator(parts: SuperoperatorParts, n_min: int, n_max: int,
                       omega_c: float, *, max_dim: int = 1_000_000) -> FloquetGenerator:
    """Generator over the truncation window [n_min, n_max]."""
    if n_min > n_max:
        raise DimensionMismatch(f"n_min {n_min} exceeds n_max {n_max}")
    total = (n_max - n_min + 1) * parts.dim
    if total > max_dim:
        raise CapacityError(
            f"stacked dimension {total} exceeds the cap {max_dim}")
    return FloquetGenerator(parts=parts, n_min=n_min, n_max=n_max, omega_c=omega_c)


def apply_generator_raw(gen: FloquetGenerator, blocks: np.ndarray) -> np.ndarray:
    """dR/dt for stacked components of shape (n_blocks, dim).

    Boundary blocks treat r_{n_min - 1} = r_{n_max + 1} = 0.
    """
    if blocks.shape != (gen.n_blocks, gen.block_dim):
        raise DimensionMismatch(
            f"stack shape {blocks.shape} does not match generator "
            f"({gen.n_blocks}, {gen.block_dim})")
    p = gen.parts
    out = blocks @ p.l0.T
    out += (1j * gen.omega_c * gen.harmonics)[:, None] * blocks
    out[1:] += blocks[:-1] @ p.l_plus.T
    out[:-1] += blocks[1:] @ p.l_minus.T
    return out


def apply_generator(gen: FloquetGenerator, stack: HarmonicStack) -> HarmonicStack:
    """Right-hand side dR/dt of the harmonic system, as a stack.

    The returned stack holds the derivative components at ``stack.time``.
    """
    if (stack.n_min, stack.n_max) != (gen.n_min, gen.n_max):
        raise DimensionMismatch(
            f"stack window [{stack.n_min}, {stack.n_max}] does not match "
            f"generator [{gen.n_min}, {gen.n_max}]")
    n = stack.dim
    flat = stack.components.reshape(gen.n_blocks, n * n)
    out = apply_generator_raw(gen, flat)
    return HarmonicStack(components=out.reshape(gen.n_blocks, n, n),
                         n_min=gen.n_min, n_max=gen.n_max,
                         omega_c=gen.omega_c, time=stack.time)


def dense_matrix(gen: FloquetGenerator, *, max_dim: int = DENSE_CAP) -> np.ndarray:
    """Dense materialisation of M (for eigen-evolution and testing)."""
    total = gen.total_dim
    if total > max_dim:
        raise CapacityError(f"dense M would be {total} x {total} (cap {max_dim})")
    d = gen.block_dim
    nb = gen.n_blocks
    p = gen.parts
    m = np.zeros((total, total), dtype=complex)
    eye = np.eye(d)
    for k, n in enumerate(range(gen.n_min, gen.n_max + 1)):
        sl = slice(k * d, (k + 1) * d)
        m[sl, sl] = p.l0 + 1j * n * gen.omega_c * eye
        if k > 0:
            m[sl, (k - 1) * d:k * d] = p.l_plus
        if k < nb - 1:
            m[sl, (k + 1) * d:(k + 2) * d] = p.l_minus
    return m


def dump_dense_csv(gen: FloquetGenerator, path, *, max_dim: int = DENSE_CAP) -> None:
    """Debug dump of the nonzero dense-M entries as (row, col, re, im) rows."""
    m = dense_matrix(gen, max_dim=max_dim)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row,col,re,im\n")
        rows, cols = np.nonzero(m)
        for r, c in zip(rows, cols):
            v = m[r, c]
            fh.write(f"{r},{c},{v.real:.17g},{v.imag:.17g}\n")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr

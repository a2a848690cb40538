"""Time evolution of the harmonic system and of the full density matrix.

Three propagation routes are provided:

* ``integrate_harmonics``: the block-tridiagonal harmonic system
  dr_N/dt = A_N r_N + L+ r_{N-1} + L- r_{N+1};
* ``integrate_full_lindblad``: the probe-RWA master equation with explicit
  exp(+-i wc t) coupling phases (oracle / reference path);
* ``integrate_von_neumann_complexH``: the effective non-Hermitian route in
  which each decaying state carries the complex energy  omega - i Gamma/2.
  The equation integrated is drho/dt = -i (H' rho - rho H'^dagger); with the
  plain commutator the trace would be conserved and populations would not
  decay, contradicting the construction.  It is integrated in the probe-RWA
  frame (the frame transform commutes with the substitution).

All integrations use an adaptive explicit Runge-Kutta scheme (DOP853) with
relative tolerance ``tol`` and absolute floor ``tol * 1e-3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (DefectiveGenerator, DimensionMismatch, NonFinite,
                     NotConverged, StepSizeUnderflow)
from .liouvillian import (FloquetGenerator, apply_generator_raw, build_parts,
                          coupling_hamiltonians, dense_matrix,
                          static_hamiltonian)
from .model import SystemModel
from .stack import HarmonicStack, reconstruct_time_domain  # noqa: F401  (re-export)

EIGEN_DENSE_CAP = 4096
ZERO_MODE_TOL = 1e-10


@dataclass(frozen=True)
class Trajectory:
    """Sampled harmonic-stack evolution with strictly increasing times."""

    times: np.ndarray               # (n_samples,)
    components: np.ndarray          # (n_samples, n_blocks, N, N)
    n_min: int
    n_max: int
    omega_c: float
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def stack_at(self, k: int) -> HarmonicStack:
        return HarmonicStack(components=self.components[k], n_min=self.n_min,
                             n_max=self.n_max, omega_c=self.omega_c,
                             time=float(self.times[k]))

    @property
    def final(self) -> HarmonicStack:
        return self.stack_at(len(self.times) - 1)

    def samples(self):
        for k in range(len(self.times)):
            yield float(self.times[k]), self.stack_at(k)


@dataclass(frozen=True)
class DensityTrajectory:
    """Sampled time-domain density matrices (rw frame)."""

    times: np.ndarray               # (n_samples,)
    rhos: np.ndarray                # (n_samples, N, N)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def samples(self):
        for k in range(len(self.times)):
            yield float(self.times[k]), self.rhos[k]


@dataclass(frozen=True)
class GeneratorEigensystem:
    """Bi-orthogonal eigensystem of the dense generator M.

    ``right[:, k]`` is the right eigenvector c_k, ``left[k, :]`` the row
    d_k^dagger normalised so that left @ right = I.  ``coefficients`` holds
    alpha_k = d_k^dagger R(0) for the initial stack the system was built
    with (None otherwise).  ``steady_candidates`` flags |w_k| below 1e-10.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    coefficients: np.ndarray | None
    biorth_residual: float
    steady_candidates: np.ndarray


def _integrate(rhs, y0: np.ndarray, t_end: float, tol: float,
               t_eval: np.ndarray, method: str = "DOP853"):
    sol = solve_ivp(rhs, (0.0, float(t_end)), y0, method=method,
                    t_eval=t_eval, rtol=tol, atol=max(tol * 1e-3, 1e-16))
    if not sol.success:
        if sol.status == -1 and "step size" in (sol.message or "").lower():
            raise StepSizeUnderflow(sol.message)
        raise StepSizeUnderflow(f"integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise NonFinite("integration produced non-finite values")
    return sol


def _sample_times(t_end: float, sample_dt: float | None,
                  t_eval: np.ndarray | None) -> np.ndarray:
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.ndim != 1 or len(t_eval) == 0 or np.any(np.diff(t_eval) <= 0):
            raise DimensionMismatch("t_eval must be strictly increasing")
        return t_eval
    if sample_dt is None:
        sample_dt = t_end / 400.0
    n = max(int(round(t_end / sample_dt)), 1)
    return np.linspace(0.0, t_end, n + 1)


def integrate_harmonics(gen: FloquetGenerator, initial: HarmonicStack,
                        t_end: float, tol: float = 1e-10, *,
                        sample_dt: float | None = None,
                        t_eval: np.ndarray | None = None,
                        method: str = "DOP853") -> Trajectory:
    """Adaptive integration of the harmonic system from ``initial``.

    Samples are recorded at stride ``sample_dt`` (default t_end / 400) or at
    the explicit ``t_eval`` times.
    """
    if (initial.n_min, initial.n_max) != (gen.n_min, gen.n_max):
        raise DimensionMismatch("initial stack truncation does not match generator")
    nb, d = gen.n_blocks, gen.block_dim
    times = _sample_times(t_end, sample_dt, t_eval)

    def rhs(_t, y):
        return apply_generator_raw(gen, y.reshape(nb, d)).reshape(-1)

    sol = _integrate(rhs, initial.components.reshape(-1).astype(complex),
                     t_end, tol, times, method)
    n = initial.dim
    comps = np.ascontiguousarray(sol.y.T).reshape(len(sol.t), nb, n, n)
    meta = {"nfev": int(sol.nfev), "method": method, "tol": tol,
            "path": "harmonics"}
    return Trajectory(times=sol.t.copy(), components=comps, n_min=gen.n_min,
                      n_max=gen.n_max, omega_c=gen.omega_c, metadata=meta)


def integrate_full_lindblad(model: SystemModel, t_end: float,
                            tol: float = 1e-10, *,
                            delta_omega_p: float = 0.0,
                            sample_dt: float | None = None,
                            t_eval: np.ndarray | None = None,
                            method: str = "DOP853") -> DensityTrajectory:
    """Direct integration of the probe-RWA master equation.

    Keeps the explicit exp(+-i wc t) coupling phases; the initial state is
    the configured diagonal density matrix.
    """
    parts = build_parts(model, delta_omega_p)
    l0, lp, lm = parts.l0, parts.l_plus, parts.l_minus
    wc = model.drive.omega_c
    n = model.n_states

    def rhs(t, y):
        phase = np.exp(-1j * wc * t)
        return l0 @ y + phase * (lp @ y) + np.conj(phase) * (lm @ y)

    times = _sample_times(t_end, sample_dt, t_eval)
    y0 = model.initial_density().reshape(-1)
    sol = _integrate(rhs, y0, t_end, tol, times, method)
    rhos = np.ascontiguousarray(sol.y.T).reshape(len(sol.t), n, n)
    meta = {"nfev": int(sol.nfev), "method": method, "tol": tol,
            "path": "lindblad"}
    return DensityTrajectory(times=sol.t.copy(), rhos=rhos, metadata=meta)


def integrate_von_neumann_complexH(model: SystemModel, t_end: float,
                                   tol: float = 1e-10, *,
                                   delta_omega_p: float = 0.0,
                                   sample_dt: float | None = None,
                                   t_eval: np.ndarray | None = None,
                                   method: str = "DOP853") -> DensityTrajectory:
    """Effective-Hamiltonian evolution with complex group-B energies.

    Integrates drho/dt = -i (H' rho - rho H'^dagger) in the probe-RWA frame,
    H' = H(t) - (i/2) diag(Gamma).  Not trace preserving by construction.
    """
    h_s = static_hamiltonian(model, delta_omega_p)
    h_minus, h_plus = coupling_hamiltonians(model)
    gamma = np.array([s.gamma_total for s in model.states])
    wc = model.drive.omega_c
    n = model.n_states
    half_g = 0.5 * gamma

    def rhs(t, y):
        rho = y.reshape(n, n)
        phase = np.exp(-1j * wc * t)
        h = h_s + phase * h_minus + np.conj(phase) * h_plus
        drho = -1j * (h @ rho - rho @ h)
        drho -= half_g[:, None] * rho + rho * half_g[None, :]
        return drho.reshape(-1)

    times = _sample_times(t_end, sample_dt, t_eval)
    y0 = model.initial_density().reshape(-1)
    sol = _integrate(rhs, y0, t_end, tol, times, method)
    rhos = np.ascontiguousarray(sol.y.T).reshape(len(sol.t), n, n)
    meta = {"nfev": int(sol.nfev), "method": method, "tol": tol,
            "path": "von_neumann_complex"}
    return DensityTrajectory(times=sol.t.copy(), rhos=rhos, metadata=meta)


def detect_steady_state(traj: Trajectory, window: float | None = None,
                        steady_tol: float = 1e-8, *,
                        abs_floor: float = 1e-11):
    """Final stack if every component is static over the trailing window.

    A component r_{ij;N} passes when its drift over the trailing ``window``
    (default: one coupling period 2 pi / wc) stays below
    ``max(steady_tol * |r_{ij;N}(t_end)|, abs_floor)``.  The absolute floor
    shields components at the double-precision integration noise level
    (~1e-12 after a 200 ns horizon), which would otherwise never test
    static.  Returns the final stack marked steady, or a NotConverged
    instance carrying the worst offender (i, j, N) and its drift.
    """
    if window is None:
        window = 2.0 * np.pi / traj.omega_c
    t_end = traj.times[-1]
    span = t_end - traj.times[0]
    if span < 2.0 * window:
        return NotConverged(
            f"trajectory spans {span:.6g} ns, need at least twice the "
            f"window {window:.6g} ns", worst=None, drift=None)
    mask = traj.times >= t_end - window
    if mask.sum() < 2:
        return NotConverged("fewer than two samples in the trailing window",
                            worst=None, drift=None)
    tail = traj.components[mask]
    final = tail[-1]
    drift = np.abs(tail - final[None]).max(axis=0)
    allowed = np.maximum(steady_tol * np.abs(final), abs_floor)
    bad = drift > allowed
    if not bad.any():
        return traj.final.marked_steady()
    rel = np.where(allowed > 0, drift / allowed, np.inf)
    rel[~bad] = 0.0
    k, i, j = np.unravel_index(int(np.argmax(rel)), rel.shape)
    n_idx = traj.n_min + k
    return NotConverged(
        f"component ({i}, {j}; N={n_idx}) drifts by {drift[k, i, j]:.3e} "
        f"over the trailing {window:.6g} ns window",
        worst=(int(i), int(j), int(n_idx)), drift=float(drift[k, i, j]))


def generator_eigensystem(gen: FloquetGenerator,
                          initial: HarmonicStack | None = None, *,
                          dense_cap: int = EIGEN_DENSE_CAP,
                          biorth_tol: float = 1e-6) -> GeneratorEigensystem:
    """Dense eigendecomposition of M with bi-orthogonal left vectors.

    Left rows are obtained by inverting the right-eigenvector matrix, which
    enforces left @ right = I; the reported residual measures how well that
    inversion holds and therefore how far M is from defective.
    """
    m = dense_matrix(gen, max_dim=dense_cap)
    w, v = np.linalg.eig(m)
    try:
        left = np.linalg.inv(v)
    except np.linalg.LinAlgError as exc:
        raise DefectiveGenerator(f"eigenvector matrix is singular: {exc}") from None
    residual = float(np.abs(left @ v - np.eye(len(w))).max())
    if residual > biorth_tol:
        raise DefectiveGenerator(
            f"bi-orthogonality residual {residual:.3e} exceeds {biorth_tol:.1e}; "
            "the generator is (numerically) defective")
    coeff = None
    if initial is not None:
        coeff = left @ initial.components.reshape(-1)
    return GeneratorEigensystem(
        eigenvalues=w, right=v, left=left, coefficients=coeff,
        biorth_residual=residual,
        steady_candidates=np.abs(w) < ZERO_MODE_TOL)


def eigen_evolve(gen: FloquetGenerator, initial: HarmonicStack,
                 times: np.ndarray, *,
                 dense_cap: int = EIGEN_DENSE_CAP,
                 biorth_tol: float = 1e-6) -> Trajectory:
    """Analytic evolution R(t) = sum_k alpha_k c_k exp(w_k t).

    Only valid when the dense eigendecomposition passes the defectiveness
    gate; raises DefectiveGenerator otherwise.
    """
    if (initial.n_min, initial.n_max) != (gen.n_min, gen.n_max):
        raise DimensionMismatch("initial stack truncation does not match generator")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or np.any(np.diff(times) <= 0):
        raise DimensionMismatch("times must be strictly increasing")
    eig = generator_eigensystem(gen, initial, dense_cap=dense_cap,
                                biorth_tol=biorth_tol)
    # (total_dim, n_times): V @ (alpha * exp(w t)) per column
    phases = np.exp(np.outer(eig.eigenvalues, times))
    y = eig.right @ (eig.coefficients[:, None] * phases)
    n = initial.dim
    comps = np.ascontiguousarray(y.T).reshape(len(times), gen.n_blocks, n, n)
    meta = {"path": "eigen", "biorth_residual": eig.biorth_residual,
            "n_steady_candidates": int(eig.steady_candidates.sum())}
    return Trajectory(times=times.copy(), components=comps, n_min=gen.n_min,
                      n_max=gen.n_max, omega_c=gen.omega_c, metadata=meta)


def harmonic_trajectory_rows(traj: Trajectory):
    """Rows (time_ns, i, j, N, re, im) for the harmonic-path CSV export."""
    ns = traj.components.shape[2]
    for k, t in enumerate(traj.times):
        for bi, n_idx in enumerate(range(traj.n_min, traj.n_max + 1)):
            block = traj.components[k, bi]
            for i in range(ns):
                for j in range(ns):
                    v = block[i, j]
                    yield (float(t), i, j, n_idx, v.real, v.imag)


def density_trajectory_rows(traj: DensityTrajectory):
    """Rows (time_ns, i, j, re, im) for the time-domain CSV export."""
    ns = traj.rhos.shape[1]
    for k, t in enumerate(traj.times):
        for i in range(ns):
            for j in range(ns):
                v = traj.rhos[k, i, j]
                yield (float(t), i, j, v.real, v.imag)

"""Weak-probe steady-state coherences and decaying dressed states.

In the weak-probe limit the master equation reduces, for each source state
j in group A, to a linear system over the coherences rho_{ij;N} (i in B):

    [dw_j + dwp + D] x = b,     b_{(i,N)} = -1/2 rabi_p[i,j] rho_jj;0  (N=0),

where dw_j is the referenced energy of the source, dwp the probe offset
from omega_p0, and D is block-tridiagonal over (i in B, N):

    diag (i, N):  detuning_p0(i) + i Gamma_i / 2 + N wc   (+ i gamma_ij),
    (N, N-1):     +1/2 rabi_c[i, l],
    (N, N+1):     +1/2 conj(rabi_c[l, i]).

D is the Floquet Hamiltonian of the coupling-dressed group-B manifold
(hbar = 1).  Its eigenvalues are the complex quasienergies: with the
coupling off they degenerate to

    eps = N wc - (e_i - i Gamma_i / 2),    e_i = -detuning_p0(i),

where e_i is the internally referenced group-B energy.  A dressed state is
resonant with source j where dw_j + dwp + Re eps = 0, and contributes a
pole of half-width |Im eps|:

    x = sum_q  (u_q^dagger b) / (dw_j + dwp + eps_q) v_q,

with bi-orthonormal left/right eigenvectors u_q, v_q.  Extra pure-dephasing
rates gamma_ij enter the direct solve on the diagonal; for the spectral
expansion they shift the denominators when uniform over i, and are folded
into the matrix (``dephasing_source``) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, onenormest

from .errors import (DefectiveFloquetMatrix, DefectiveInput, DimensionMismatch,
                     SingularSystem, TopologyError)
from .model import GROUP_A, SystemModel

COND_LIMIT = 1e14
EIG_RESIDUAL_TOL = 1e-9
BIORTH_RESIDUAL_TOL = 1e-8
COMPLETENESS_TOL = 1e-7


@dataclass(frozen=True)
class FloquetHamiltonian:
    """Dense non-Hermitian Floquet matrix over (i in B, N) rows.

    Rows are ordered N-major: row = (N - n_min) * len(b_states) + b.  The
    anti-Hermitian part comes only from the +i Gamma/2 (and folded
    dephasing) diagonal terms; with all rates zero the matrix is Hermitian.
    """

    matrix: np.ndarray
    b_states: tuple[int, ...]
    n_min: int
    n_max: int
    omega_c: float
    dephasing_source: int | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.n_max - self.n_min + 1

    def row_index(self, i: int, n: int) -> int:
        b = self.b_states.index(i)
        return (n - self.n_min) * len(self.b_states) + b

    def row_labels(self) -> list[tuple[int, int]]:
        """(state index, harmonic N) per row."""
        return [(i, n)
                for n in range(self.n_min, self.n_max + 1)
                for i in self.b_states]


@dataclass(frozen=True)
class DressedStateSet:
    """Quasienergies with bi-orthonormal right/left eigenvectors.

    ``right[:, q]`` is v_q (unit norm), ``left[q, :]`` is u_q^dagger with
    u_q^dagger v_q = 1.  States are sorted by (Re eps, Im eps) ascending.
    ``min_pair_overlap`` is the smallest reciprocal eigenvalue condition
    number 1 / (|u_q| |v_q|); it tends to zero as F approaches a defective
    matrix and is the sharpest of the defectiveness gates.
    """

    quasienergies: np.ndarray
    right: np.ndarray
    left: np.ndarray
    b_states: tuple[int, ...]
    n_min: int
    n_max: int
    omega_c: float
    eig_residual: float
    biorth_residual: float
    completeness_residual: float
    min_pair_overlap: float
    defective: bool
    dephasing_source: int | None = None

    @property
    def dim(self) -> int:
        return len(self.quasienergies)

    def row_labels(self) -> list[tuple[int, int]]:
        return [(i, n)
                for n in range(self.n_min, self.n_max + 1)
                for i in self.b_states]

    def dominant_component(self, q: int) -> tuple[int, int]:
        """(state index, N) of the largest-|a| component of v_q."""
        k = int(np.argmax(np.abs(self.right[:, q])))
        nb = len(self.b_states)
        return self.b_states[k % nb], self.n_min + k // nb


@dataclass(frozen=True)
class CoherenceVector:
    """Steady-state coherences rho_{ij;N} for one source state j in A."""

    values: np.ndarray
    b_states: tuple[int, ...]
    n_min: int
    n_max: int
    source: int
    omega_p: float

    def component(self, i: int, n: int) -> complex:
        b = self.b_states.index(i)
        return self.values[(n - self.n_min) * len(self.b_states) + b]

    def n0_block(self) -> dict[int, complex]:
        """Coherences at N = 0, keyed by the group-B state index."""
        return {i: self.component(i, 0) for i in self.b_states}

    def as_matrix(self) -> np.ndarray:
        """(len(b_states), n_blocks) view, columns ordered by N."""
        nb = len(self.b_states)
        return self.values.reshape(-1, nb).T


@dataclass(frozen=True)
class WeakProbeSystem:
    """Banded operator and right-hand side of the weak-probe linear system."""

    source: int
    omega_p: float
    ab: np.ndarray                  # scipy banded storage of the operator
    bandwidth: int                  # sub = super = bandwidth
    rhs: np.ndarray
    b_states: tuple[int, ...]
    n_min: int
    n_max: int

    @property
    def dim(self) -> int:
        return len(self.rhs)


def _b_states(model: SystemModel) -> tuple[int, ...]:
    b = model.group_b
    if not b:
        raise TopologyError("model has no group-B states")
    return b


def _dephasing_diag(model: SystemModel, source: int | None,
                    b_states: tuple[int, ...]) -> np.ndarray:
    if source is None:
        return np.zeros(len(b_states))
    return np.array([model.dephasing.rate(i, source) for i in b_states])


def _floquet_blocks(model: SystemModel, n_min: int, n_max: int,
                    dephasing_source: int | None):
    """Diagonal entries and the two constant coupling blocks of F."""
    b_states = _b_states(model)
    b_set = set(b_states)
    for i, j in np.argwhere(model.drive.rabi_c != 0):
        if int(i) not in b_set or int(j) not in b_set:
            raise TopologyError(
                f"coupling Rabi entry ({i}, {j}) outside the group-B block")
    nb = len(b_states)
    wc = model.drive.omega_c
    gamma = np.array([model.gamma(i) for i in b_states])
    det = np.array([model.detuning_p0(i) for i in b_states])
    extra = _dephasing_diag(model, dephasing_source, b_states)
    base = det + 1j * (0.5 * gamma + extra)

    harmonics = np.arange(n_min, n_max + 1)
    diag = (base[None, :] + (harmonics * wc)[:, None]).reshape(-1)

    rc = model.drive.rabi_c[np.ix_(b_states, b_states)]
    sub = 0.5 * rc                   # couples N to N-1
    sup = 0.5 * rc.conj().T          # couples N to N+1
    return b_states, nb, diag, sub, sup


def build_floquet_hamiltonian(model: SystemModel, n_min: int, n_max: int, *,
                              dephasing_source: int | None = None
                              ) -> FloquetHamiltonian:
    """Assemble the dense Floquet Hamiltonian over the truncation window.

    With ``dephasing_source`` set, the extra pure-dephasing rates for that
    source are folded into the diagonal (+i gamma_ij), which keeps the
    spectral expansion exact for per-state dephasing.
    """
    if n_min > n_max:
        raise DimensionMismatch(f"n_min {n_min} exceeds n_max {n_max}")
    b_states, nb, diag, sub, sup = _floquet_blocks(model, n_min, n_max,
                                                   dephasing_source)
    dim = len(diag)
    f = np.zeros((dim, dim), dtype=complex)
    f[np.arange(dim), np.arange(dim)] = diag
    for k in range(1, n_max - n_min + 1):
        rows = slice(k * nb, (k + 1) * nb)
        f[rows, (k - 1) * nb:k * nb] = sub
        f[(k - 1) * nb:k * nb, rows] = sup
    return FloquetHamiltonian(matrix=f, b_states=b_states, n_min=n_min,
                              n_max=n_max, omega_c=model.drive.omega_c,
                              dephasing_source=dephasing_source)


def dressed_states(f: FloquetHamiltonian, *,
                   eig_tol: float = EIG_RESIDUAL_TOL,
                   biorth_tol: float = BIORTH_RESIDUAL_TOL,
                   completeness_tol: float = COMPLETENESS_TOL,
                   overlap_tol: float = BIORTH_RESIDUAL_TOL,
                   raise_on_defective: bool = True) -> DressedStateSet:
    """Full eigendecomposition of F with bi-orthonormalised left vectors.

    Left vectors come from inverting the right-eigenvector matrix, so
    u_q^dagger v_q' = delta_qq' holds by construction.  Defectiveness is
    detected through the eigen residual, the residuals of that inversion,
    and the reciprocal eigenvalue condition numbers 1 / (|u_q| |v_q|),
    which collapse when eigenvectors coalesce.  States are sorted by
    (Re eps, Im eps) ascending.
    """
    m = f.matrix
    w, v = np.linalg.eig(m)
    order = np.lexsort((w.imag, w.real))
    w, v = w[order], v[:, order]
    eye = np.eye(len(w))
    try:
        left = np.linalg.inv(v)
        biorth = float(np.abs(left @ v - eye).max())
        completeness = float(np.abs(v @ left - eye).max())
        overlap = float(
            (1.0 / (np.linalg.norm(left, axis=1)
                    * np.linalg.norm(v, axis=0))).min())
    except np.linalg.LinAlgError:
        left = np.full_like(v, np.nan)
        biorth = completeness = np.inf
        overlap = 0.0
    eig_res = float(np.abs(m @ v - v * w[None, :]).max())
    defective = (eig_res > eig_tol or biorth > biorth_tol
                 or completeness > completeness_tol or overlap < overlap_tol)
    if defective and raise_on_defective:
        raise DefectiveFloquetMatrix(
            f"Floquet matrix failed the defectiveness gates: eigen residual "
            f"{eig_res:.3e} (tol {eig_tol:.1e}), bi-orthogonality "
            f"{biorth:.3e} (tol {biorth_tol:.1e}), completeness "
            f"{completeness:.3e} (tol {completeness_tol:.1e}), smallest "
            f"pair overlap {overlap:.3e} (tol {overlap_tol:.1e})")
    return DressedStateSet(
        quasienergies=w, right=v, left=left, b_states=f.b_states,
        n_min=f.n_min, n_max=f.n_max, omega_c=f.omega_c,
        eig_residual=eig_res, biorth_residual=biorth,
        completeness_residual=completeness, min_pair_overlap=overlap,
        defective=defective, dephasing_source=f.dephasing_source)


def probe_source_vector(model: SystemModel, j: int, n_min: int,
                        n_max: int) -> np.ndarray:
    """Right-hand side b: -1/2 rabi_p[i, j] rho_jj;0 on the N = 0 rows."""
    if model.states[j].group != GROUP_A:
        raise TopologyError(f"source state {j} is not in group A")
    b_states = _b_states(model)
    nb = len(b_states)
    rho_jj = model.run.initial_populations.get(j, 0.0)
    b = np.zeros((n_max - n_min + 1) * nb, dtype=complex)
    block = -0.5 * model.drive.rabi_p[list(b_states), j] * rho_jj
    k0 = -n_min
    b[k0 * nb:(k0 + 1) * nb] = block
    return b


def build_weak_probe_system(model: SystemModel, omega_p: float, j: int,
                            n_min: int, n_max: int) -> WeakProbeSystem:
    """Banded form of [ (dw_j + dwp) I + F_j ] x = b for source j.

    ``omega_p`` is the absolute probe frequency (rad/ns); the offset from
    model.drive.omega_p0 shifts every detuning.  Pure dephasing for the
    source is always included on the diagonal.
    """
    b_states, nb, diag, sub, sup = _floquet_blocks(model, n_min, n_max, j)
    dwp = omega_p - model.drive.omega_p0
    shift = model.delta_omega(j) + dwp
    diag = diag + shift
    dim = len(diag)
    bw = 2 * nb - 1
    ab = np.zeros((2 * bw + 1, dim), dtype=complex)
    ab[bw, :] = diag
    n_blocks = n_max - n_min + 1
    for k in range(1, n_blocks):
        for bi in range(nb):
            for bl in range(nb):
                row = k * nb + bi
                col = (k - 1) * nb + bl
                ab[bw + row - col, col] = sub[bi, bl]
                ab[bw + col - row, row] = sup[bl, bi]
    rhs = probe_source_vector(model, j, n_min, n_max)
    return WeakProbeSystem(source=j, omega_p=omega_p, ab=ab, bandwidth=bw,
                           rhs=rhs, b_states=b_states, n_min=n_min,
                           n_max=n_max)


def _banded_to_dense(ab: np.ndarray, bw: int) -> np.ndarray:
    dim = ab.shape[1]
    dense = np.zeros((dim, dim), dtype=ab.dtype)
    for offset in range(2 * bw + 1):
        for col in range(dim):
            row = col + (offset - bw)
            if 0 <= row < dim:
                dense[row, col] = ab[offset, col]
    return dense


def _banded_cond_estimate(system: WeakProbeSystem) -> float:
    """1-norm condition estimate of the banded operator."""
    bw, ab, dim = system.bandwidth, system.ab, system.dim
    if dim < 4:  # onenormest needs a few columns; go dense
        dense = _banded_to_dense(ab, bw)
        try:
            return float(abs(np.linalg.cond(dense, p=1)))
        except np.linalg.LinAlgError:
            return np.inf
    col_norms = np.zeros(dim)
    for offset in range(2 * bw + 1):
        cols = np.arange(dim)
        rows = cols + (offset - bw)
        ok = (rows >= 0) & (rows < dim)
        col_norms[cols[ok]] += np.abs(ab[offset, cols[ok]])
    norm_a = float(col_norms.max())

    ab_t = _transpose_banded(ab, bw)

    def inv_matvec(x):
        return solve_banded((bw, bw), ab, x)

    def inv_rmatvec(x):
        # A^-H x = conj(A^-T conj(x))
        return solve_banded((bw, bw), ab_t, x.conj()).conj()

    op = LinearOperator((dim, dim), matvec=inv_matvec, rmatvec=inv_rmatvec,
                        dtype=complex)
    try:
        norm_inv = float(onenormest(op))
    except Exception:
        return np.inf
    return norm_a * norm_inv


def _transpose_banded(ab: np.ndarray, bw: int) -> np.ndarray:
    """Banded storage of A^T given banded storage of A (equal bandwidths)."""
    out = np.zeros_like(ab)
    dim = ab.shape[1]
    for offset in range(2 * bw + 1):
        d = offset - bw  # row - col of A
        cols = np.arange(max(0, -d), min(dim, dim - d))
        rows = cols + d
        out[bw - d, rows] = ab[offset, cols]
    return out


def solve_coherences_direct(model: SystemModel, omega_p: float, j: int,
                            n_min: int | None = None,
                            n_max: int | None = None, *,
                            dense: bool = False,
                            cond_limit: float = COND_LIMIT) -> CoherenceVector:
    """Solve the block-tridiagonal weak-probe system for source j.

    Banded LU with partial pivoting; ``dense=True`` switches to a plain
    dense solve (testing fallback).  Raises SingularSystem when the operator
    is numerically singular (condition estimate above ``cond_limit``), which
    signals an exact resonance with an undamped dressed state.
    """
    if n_min is None:
        n_min = model.run.n_min
    if n_max is None:
        n_max = model.run.n_max
    system = build_weak_probe_system(model, omega_p, j, n_min, n_max)
    if dense:
        f = build_floquet_hamiltonian(model, n_min, n_max, dephasing_source=j)
        dwp = omega_p - model.drive.omega_p0
        a = f.matrix + (model.delta_omega(j) + dwp) * np.eye(f.dim)
        cond = np.linalg.cond(a, p=1)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SingularSystem(
                f"weak-probe operator condition {cond:.3e} exceeds {cond_limit:.1e}")
        values = np.linalg.solve(a, system.rhs)
    else:
        cond = _banded_cond_estimate(system)
        if not np.isfinite(cond) or cond > cond_limit:
            raise SingularSystem(
                f"weak-probe operator condition {cond:.3e} exceeds {cond_limit:.1e}")
        values = solve_banded((system.bandwidth, system.bandwidth),
                              system.ab, system.rhs)
    return CoherenceVector(values=values, b_states=system.b_states,
                           n_min=n_min, n_max=n_max, source=j,
                           omega_p=omega_p)


def solve_coherences_spectral(dressed: DressedStateSet, model: SystemModel,
                              omega_p: float, j: int, *,
                              return_contributions: bool = False):
    """Dressed-state expansion of the weak-probe coherences for source j.

    x = sum_q (u_q^dagger b) v_q / (dw_j + dwp + eps_q [+ i gamma_j]).

    Uniform pure dephasing for the source enters as the scalar +i gamma_j
    denominator shift; per-state dephasing requires a dressed set built
    with ``dephasing_source=j`` (raises DefectiveInput otherwise).  Terms
    with exactly vanishing weight are dropped, so undamped dressed states
    the probe does not address cannot poison the sum at their poles.
    """
    if dressed.defective:
        raise DefectiveInput("dressed-state set carries a defectiveness flag")
    gamma_shift = 0.0
    if dressed.dephasing_source is None:
        rates = _dephasing_diag(model, j, dressed.b_states)
        if rates.any():
            if np.ptp(rates) > 0:
                raise DefectiveInput(
                    "per-state pure dephasing requires a dressed set built "
                    f"with dephasing_source={j}")
            gamma_shift = float(rates[0])
    elif dressed.dephasing_source != j:
        raise DefectiveInput(
            f"dressed set was built for source {dressed.dephasing_source}, "
            f"not {j}")

    b = probe_source_vector(model, j, dressed.n_min, dressed.n_max)
    weights = dressed.left @ b
    dwp = omega_p - model.drive.omega_p0
    denom = (model.delta_omega(j) + dwp + 1j * gamma_shift
             + dressed.quasienergies)
    coeff = np.divide(weights, denom,
                      out=np.zeros_like(weights), where=(weights != 0))
    values = dressed.right @ coeff
    vec = CoherenceVector(values=values, b_states=dressed.b_states,
                          n_min=dressed.n_min, n_max=dressed.n_max,
                          source=j, omega_p=omega_p)
    if return_contributions:
        contributions = dressed.right * coeff[None, :]   # column q = term q
        return vec, contributions
    return vec


def zero_coupling_coherence(model: SystemModel, omega_p: float, i: int,
                            j: int) -> complex:
    """Closed-form rho_{ij;0} for a vanishing coupling field.

    rho = -(rabi_p[i,j]/2) rho_jj;0 / (dw_j + dwp + det_p0_i
          + i (Gamma_i/2 + gamma_ij)).
    """
    if model.states[j].group != GROUP_A:
        raise TopologyError(f"source state {j} is not in group A")
    dwp = omega_p - model.drive.omega_p0
    rho_jj = model.run.initial_populations.get(j, 0.0)
    denom = (model.delta_omega(j) + dwp + model.detuning_p0(i)
             + 1j * (0.5 * model.gamma(i) + model.dephasing.rate(i, j)))
    return -0.5 * model.drive.rabi_p[i, j] * rho_jj / denom

"""Susceptibility, absorption coefficient, probe sweeps and dressed markers.

The complex susceptibility collects the N = 0 steady-state coherences,

    chi = sum_{i in B, j in A} dipole_scale[i, j] * rho_{ij; N=0},

either from weak-probe coherence vectors or from the N = 0 block of a
converged harmonic stack.  The Beer-Lambert absorption coefficient is

    K = 2 (omega_p / c) Im sqrt(1 + chi)            [1/m]

with the principal square root and c = 0.299792458 m/ns; gain media
(Im chi < 0) are allowed and give K < 0.

A sweep varies the probe offset dwp = omega_p - omega_p0 over a grid.  The
dressed-state set does not depend on omega_p, so the spectral route builds
it once per sweep; grid points are independent and may be evaluated on a
thread pool, assembled deterministically by grid index.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._tables import write_table
from .errors import (BranchCut, DimensionMismatch, FloquetProbeError,
                     NotConverged, NotSteady)
from .model import TWO_PI, SystemModel
from .stack import HarmonicStack
from .weakprobe import (CoherenceVector, DressedStateSet,
                        build_floquet_hamiltonian, dressed_states,
                        probe_source_vector, solve_coherences_direct,
                        solve_coherences_spectral)

C_LIGHT = 0.299792458  # m/ns; K comes out in 1/m
DEFAULT_TOP_K = 15
DEFAULT_GRID_POINTS = 2001


@dataclass(frozen=True)
class SusceptibilityResult:
    """chi and K at one probe frequency; ``error`` tags a failed point."""

    omega_p: float
    delta_omega_p: float
    chi: complex
    k_abs: float
    contributions: np.ndarray | None = None
    error: str | None = None


@dataclass(frozen=True)
class Marker:
    """Resonance marker of one dressed state for a given source.

    ``delta_omega_p`` solves dw_j + dwp + Re eps = 0; the bar half-length is
    |Im eps| and the weight |u^dagger b|.
    """

    q: int
    delta_omega_p: float
    half_width: float
    weight: float
    state_index: int
    n_harmonic: int


@dataclass(frozen=True)
class SpectrumResult:
    grid: tuple[SusceptibilityResult, ...]
    markers: tuple[Marker, ...]
    metadata: dict = field(default_factory=dict)

    def chi_array(self) -> np.ndarray:
        return np.array([g.chi for g in self.grid])

    def k_array(self) -> np.ndarray:
        return np.array([g.k_abs for g in self.grid])

    def delta_array(self) -> np.ndarray:
        return np.array([g.delta_omega_p for g in self.grid])


def susceptibility(model: SystemModel, coherences) -> complex:
    """chi from per-source coherence vectors or a steady harmonic stack.

    ``coherences`` may be a CoherenceVector, an iterable of them (one per
    source state), or a HarmonicStack marked steady.  Raises NotSteady for
    an unconverged stack.
    """
    scale = model.drive.dipole_scale
    if isinstance(coherences, HarmonicStack):
        if not coherences.steady:
            raise NotSteady(
                "harmonic stack is not marked steady; run detect_steady_state")
        r0 = coherences.block(0)
        return complex(sum(g * r0[i, j] for (i, j), g in scale.items()))
    if isinstance(coherences, CoherenceVector):
        coherences = [coherences]
    chi = 0.0 + 0.0j
    for vec in coherences:
        for (i, j), g in scale.items():
            if j == vec.source:
                chi += g * vec.component(i, 0)
    return complex(chi)


def absorption_coefficient(chi: complex, omega_p: float) -> float:
    """Beer-Lambert K = 2 (omega_p / c) Im sqrt(1 + chi), in 1/m.

    Raises BranchCut when 1 + chi lies on the negative real axis, where the
    principal square root is ambiguous.
    """
    z = 1.0 + chi
    if z.imag == 0.0 and z.real <= 0.0:
        raise BranchCut(f"1 + chi = {z} lies on the negative real axis")
    return 2.0 * (omega_p / C_LIGHT) * complex(np.sqrt(z)).imag


def dressed_markers(dressed: DressedStateSet, model: SystemModel, j: int,
                    window: tuple[float, float] | None = None, *,
                    top_k: int = DEFAULT_TOP_K) -> list[Marker]:
    """Resonance markers of the dressed states addressing source j.

    States with exactly vanishing weight are dropped (the probe does not
    address them); the rest are sorted by weight descending, restricted to
    ``window`` (in dwp, rad/ns) plus one bar length of margin, and cut to
    the ``top_k`` strongest.
    """
    b = probe_source_vector(model, j, dressed.n_min, dressed.n_max)
    weights = np.abs(dressed.left @ b)
    dw_j = model.delta_omega(j)
    markers = []
    for q in range(dressed.dim):
        if weights[q] == 0.0:
            continue
        eps = dressed.quasienergies[q]
        pos = -dw_j - eps.real
        half = abs(eps.imag)
        if window is not None:
            lo, hi = window
            if not (lo - 2 * half <= pos <= hi + 2 * half):
                continue
        state_index, n_harm = dressed.dominant_component(q)
        markers.append(Marker(q=q, delta_omega_p=pos, half_width=half,
                              weight=float(weights[q]),
                              state_index=state_index, n_harmonic=n_harm))
    markers.sort(key=lambda m: (-m.weight, m.q))
    return markers[:top_k]


def _marker_source(model: SystemModel) -> int:
    pops = model.run.initial_populations
    if pops:
        return max(sorted(pops), key=lambda j: pops[j])
    return model.group_a[0]


def sweep(model: SystemModel, delta_grid, *, method: str = "spectral",
          n_min: int | None = None, n_max: int | None = None,
          top_k: int = DEFAULT_TOP_K, marker_source: int | None = None,
          threads: int | None = None,
          with_contributions: bool = False) -> SpectrumResult:
    """Evaluate chi and K on a grid of probe offsets dwp (rad/ns).

    Results come back in the caller's grid order; points are independent,
    so permuting the grid permutes the results identically.  ``method``
    selects the spectral route (dressed set built once, default) or the
    per-point direct solve.  A point where the solver fails is recorded
    with its error tag rather than dropped.  ``with_contributions``
    (spectral route only) attaches the per-dressed-state partial sums of
    chi, ordered like the dressed set and accumulated over sources.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.ndim != 1 or len(delta_grid) == 0:
        raise DimensionMismatch("delta_grid must be a non-empty 1-d array")
    if method not in ("spectral", "direct"):
        raise DimensionMismatch(f"unknown sweep method {method!r}")
    if n_min is None:
        n_min = model.run.n_min
    if n_max is None:
        n_max = model.run.n_max

    sources = sorted({j for (_i, j) in model.drive.dipole_scale})
    if not sources:
        sources = [_marker_source(model)]

    # the dressed set is needed for the markers regardless of the solve route
    dressed_by_source: dict[int, DressedStateSet] = {}
    shared = None
    marker_j = marker_source if marker_source is not None else _marker_source(model)
    for j in sorted(set(sources) | {marker_j}):
        needs_fold = any(model.dephasing.rate(i, j) for i in model.group_b)
        if needs_fold:
            f = build_floquet_hamiltonian(model, n_min, n_max,
                                          dephasing_source=j)
            dressed_by_source[j] = dressed_states(f)
        else:
            if shared is None:
                f = build_floquet_hamiltonian(model, n_min, n_max)
                shared = dressed_states(f)
            dressed_by_source[j] = shared

    omega_p0 = model.drive.omega_p0

    if with_contributions and method != "spectral":
        raise DimensionMismatch(
            "per-dressed-state contributions require the spectral method")
    g_rows: dict[int, np.ndarray] = {}
    if with_contributions:
        for j in sources:
            ds = dressed_by_source[j]
            labels = ds.row_labels()
            g_row = np.zeros(ds.dim, dtype=complex)
            for (i, jj), g in model.drive.dipole_scale.items():
                if jj == j:
                    g_row[labels.index((i, 0))] = g
            g_rows[j] = g_row

    def evaluate(dwp: float) -> SusceptibilityResult:
        omega_p = omega_p0 + dwp
        try:
            vecs = []
            parts = None
            for j in sources:
                if method == "spectral":
                    if with_contributions:
                        vec, terms = solve_coherences_spectral(
                            dressed_by_source[j], model, omega_p, j,
                            return_contributions=True)
                        term_chi = g_rows[j] @ terms
                        parts = term_chi if parts is None else parts + term_chi
                    else:
                        vec = solve_coherences_spectral(
                            dressed_by_source[j], model, omega_p, j)
                    vecs.append(vec)
                else:
                    vecs.append(solve_coherences_direct(
                        model, omega_p, j, n_min, n_max))
            chi = susceptibility(model, vecs)
            k = absorption_coefficient(chi, omega_p)
            return SusceptibilityResult(omega_p=omega_p, delta_omega_p=dwp,
                                        chi=chi, k_abs=k,
                                        contributions=parts)
        except FloquetProbeError as exc:
            return SusceptibilityResult(omega_p=omega_p, delta_omega_p=dwp,
                                        chi=complex(np.nan, np.nan),
                                        k_abs=np.nan,
                                        error=f"{type(exc).__name__}: {exc}")

    results: list[SusceptibilityResult | None] = [None] * len(delta_grid)
    if threads is not None and threads > 1 and len(delta_grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, res in zip(range(len(delta_grid)),
                              pool.map(evaluate, delta_grid)):
                results[k] = res
    else:
        for k, dwp in enumerate(delta_grid):
            results[k] = evaluate(float(dwp))

    window = (float(delta_grid.min()), float(delta_grid.max()))
    markers = dressed_markers(dressed_by_source[marker_j], model, marker_j,
                              window, top_k=top_k)

    meta = {"method": method, "n_min": n_min, "n_max": n_max,
            "sources": sources, "marker_source": marker_j,
            "points": len(delta_grid)}
    return SpectrumResult(grid=tuple(results), markers=tuple(markers),
                          metadata=meta)


def count_local_maxima(values: np.ndarray) -> int:
    """Strict interior local maxima, plateaus counted once."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    count = 0
    k = 1
    while k < n - 1:
        if v[k] > v[k - 1]:
            m = k
            while m + 1 < n and v[m + 1] == v[m]:
                m += 1
            if m + 1 < n and v[m + 1] < v[m]:
                count += 1
            k = m + 1
        else:
            k += 1
    return count


@dataclass(frozen=True)
class TruncationReport:
    windows: tuple[tuple[int, int], ...]
    chis: tuple[complex, ...]
    rel_changes: tuple[float, ...]
    converged: bool
    recommended: tuple[int, int] | None


def truncation_convergence(model: SystemModel, omega_p: float,
                           schedule, *, rel_tol: float = 1e-8) -> TruncationReport:
    """chi per truncation window of a strictly widening schedule.

    Converged when the relative change between successive windows drops
    below ``rel_tol``; the recommended window is the first converged one.
    Raises NotConverged when the widest window still drifts.
    """
    schedule = [(int(a), int(b)) for a, b in schedule]
    for (a0, b0), (a1, b1) in zip(schedule, schedule[1:]):
        if not (a1 <= a0 and b1 >= b0 and (a1, b1) != (a0, b0)):
            raise DimensionMismatch("schedule must be strictly widening")
    chis = []
    for a, b in schedule:
        vecs = [solve_coherences_direct(model, omega_p, j, a, b)
                for j in sorted({j for (_i, j) in model.drive.dipole_scale})]
        chis.append(susceptibility(model, vecs))
    rel = []
    recommended = None
    for k in range(1, len(chis)):
        denom = max(abs(chis[k - 1]), 1e-300)
        change = abs(chis[k] - chis[k - 1]) / denom
        rel.append(change)
        if recommended is None and change < rel_tol:
            recommended = schedule[k - 1]
    if len(schedule) == 1:
        recommended = schedule[0]
        rel = []
        converged = True
    else:
        converged = bool(rel and rel[-1] < rel_tol)
    if not converged:
        raise NotConverged(
            f"chi still changes by {rel[-1]:.3e} at the widest window "
            f"{schedule[-1]}", drift=rel[-1] if rel else None)
    return TruncationReport(windows=tuple(schedule), chis=tuple(chis),
                            rel_changes=tuple(rel), converged=converged,
                            recommended=recommended)


# --------------------------------------------------------------------------
# exports
# --------------------------------------------------------------------------

SPECTRUM_COLUMNS = ["delta_omega_p_GHz", "re_chi", "im_chi", "K"]
MARKER_COLUMNS = ["q", "delta_omega_p_GHz", "half_width_GHz", "weight"]
DRESSED_COLUMNS = ["q", "re_eps", "im_eps", "weight_j",
                   "dominant_state_index", "dominant_N"]


def spectrum_rows(result: SpectrumResult):
    for g in result.grid:
        yield (g.delta_omega_p / TWO_PI, g.chi.real, g.chi.imag, g.k_abs)


def marker_rows(result: SpectrumResult):
    for m in result.markers:
        yield (m.q, m.delta_omega_p / TWO_PI, m.half_width / TWO_PI, m.weight)


def dressed_rows(dressed: DressedStateSet, model: SystemModel, j: int):
    """Rows for the dressed-state export; eps quoted in GHz (ordinary)."""
    b = probe_source_vector(model, j, dressed.n_min, dressed.n_max)
    weights = np.abs(dressed.left @ b)
    for q in range(dressed.dim):
        eps = dressed.quasienergies[q]
        state_index, n_harm = dressed.dominant_component(q)
        yield (q, eps.real / TWO_PI, eps.imag / TWO_PI, float(weights[q]),
               state_index, n_harm)


def write_spectrum(result: SpectrumResult, path, fmt: str = "csv") -> None:
    write_table(path, SPECTRUM_COLUMNS, spectrum_rows(result), fmt)


def write_markers(result: SpectrumResult, path, fmt: str = "csv") -> None:
    write_table(path, MARKER_COLUMNS, marker_rows(result), fmt)


def write_dressed(dressed: DressedStateSet, model: SystemModel, j: int,
                  path, fmt: str = "csv") -> None:
    write_table(path, DRESSED_COLUMNS, dressed_rows(dressed, model, j), fmt)


def uniform_grid(lo_ghz: float, hi_ghz: float,
                 points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Uniform dwp grid from GHz (ordinary frequency) bounds."""
    if hi_ghz <= lo_ghz or points < 1:
        raise DimensionMismatch("need hi > lo and at least one point")
    return TWO_PI * np.linspace(lo_ghz, hi_ghz, points)

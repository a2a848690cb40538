"""Canned figure-reproduction recipes emitting plot-ready CSV datasets.

``fig1``  - turn-on dynamics: reconstructed time traces of the ground-state
population and the two probe coherences (with a zero-coupling reference),
plus the harmonic components N = 0, 2, 4 converging to constants.

``fig2a`` - probe-scaling study: harmonic components at t_end for the probe
scaled by 1/alpha, alpha in {1, 2, 5, 10, 20, 50, 100}, against the
weak-probe predictions.

``fig2b`` - absorption spectrum with the coupling amplitudes reduced to one
tenth (the weak-coupling row of the toy parameter table), together with the
zero-coupling spectrum and the dressed-state markers for both.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from ._tables import write_table
from .liouvillian import assemble_generator, build_parts
from .model import SystemModel, scale_probe, with_coupling_off
from .propagation import integrate_full_lindblad, integrate_harmonics
from .spectrum import sweep, uniform_grid, write_markers, write_spectrum
from .stack import HarmonicStack
from .weakprobe import solve_coherences_direct

FIG2A_ALPHAS = (1, 2, 5, 10, 20, 50, 100)
FIG2B_COUPLING_SCALE = 0.1
FIG2B_WINDOW_GHZ = (-5.0, 5.0)
FIG2B_POINTS = 2001


def _harmonic_generator(model: SystemModel):
    parts = build_parts(model)
    run = model.run
    return assemble_generator(parts, run.n_min, run.n_max, model.drive.omega_c)


def _initial_stack(model: SystemModel) -> HarmonicStack:
    run = model.run
    return HarmonicStack.initial(model.initial_density(), run.n_min,
                                 run.n_max, model.drive.omega_c)


def scale_coupling(model: SystemModel, factor: float) -> SystemModel:
    """Model with the coupling Rabi matrix multiplied by ``factor``."""
    rc = np.array(model.drive.rabi_c) * factor
    rc.setflags(write=False)
    return replace(model, drive=replace(model.drive, rabi_c=rc))


def run_fig1(model: SystemModel, outdir: Path, fmt: str = "csv", *,
             trace_span: float = 5.0, harmonic_span: float = 10.0,
             trace_dt: float = 0.002, harmonic_dt: float = 0.005) -> list[Path]:
    """Time traces and harmonic-component convergence data."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    gen = _harmonic_generator(model)
    tol = model.run.ode_tol

    t_trace = np.arange(0.0, trace_span + 0.5 * trace_dt, trace_dt)
    t_harm = np.arange(0.0, harmonic_span + 0.5 * harmonic_dt, harmonic_dt)
    t_all = np.unique(np.concatenate([t_trace, t_harm]))
    traj = integrate_harmonics(gen, _initial_stack(model), t_all[-1], tol,
                               t_eval=t_all)

    harmonics = traj.components  # (nt, nb, N, N)
    phases = np.exp(-1j * np.outer(traj.times,
                                   np.arange(gen.n_min, gen.n_max + 1)
                                   * gen.omega_c))
    entries = [(0, 0), (1, 0), (2, 0)]
    recon = {e: np.einsum("tk,tk->t", phases, harmonics[:, :, e[0], e[1]])
             for e in entries}

    mask = np.isin(traj.times, t_trace)
    rows = [(float(t), recon[(0, 0)][k].real, recon[(1, 0)][k].imag,
             recon[(2, 0)][k].imag)
            for k, t in enumerate(traj.times) if mask[k]]
    f_trace = outdir / f"fig1_timeseries.{fmt}"
    write_table(f_trace, ["time_ns", "rho00", "im_rho10", "im_rho20"], rows, fmt)

    ref = integrate_full_lindblad(with_coupling_off(model), trace_span, tol,
                                  t_eval=t_trace)
    rows = [(float(t), ref.rhos[k, 0, 0].real, ref.rhos[k, 1, 0].imag,
             ref.rhos[k, 2, 0].imag)
            for k, t in enumerate(ref.times)]
    f_ref = outdir / f"fig1_timeseries_nocoupling.{fmt}"
    write_table(f_ref, ["time_ns", "rho00", "im_rho10", "im_rho20"], rows, fmt)

    ns = (0, 2, 4)
    cols = ["time_ns"]
    cols += [f"abs_re_rho00_N{n}" for n in ns]
    cols += [f"abs_im_rho10_N{n}" for n in ns]
    cols += [f"abs_im_rho20_N{n}" for n in ns]
    mask = np.isin(traj.times, t_harm)
    rows = []
    for k, t in enumerate(traj.times):
        if not mask[k]:
            continue
        row = [float(t)]
        row += [abs(harmonics[k, n - gen.n_min, 0, 0].real) for n in ns]
        row += [abs(harmonics[k, n - gen.n_min, 1, 0].imag) for n in ns]
        row += [abs(harmonics[k, n - gen.n_min, 2, 0].imag) for n in ns]
        rows.append(tuple(row))
    f_harm = outdir / f"fig1_harmonics.{fmt}"
    write_table(f_harm, cols, rows, fmt)
    return [f_trace, f_ref, f_harm]


def run_fig2a(model: SystemModel, outdir: Path, fmt: str = "csv", *,
              alphas=FIG2A_ALPHAS) -> list[Path]:
    """Probe-scaling study at t_end; also returns the fitted slopes."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    run = model.run
    rows = []
    for alpha in alphas:
        scaled = scale_probe(model, alpha)
        gen = _harmonic_generator(scaled)
        traj = integrate_harmonics(gen, _initial_stack(scaled), run.t_end,
                                   run.ode_tol, sample_dt=run.t_end / 40)
        final = traj.final
        wp = solve_coherences_direct(scaled, scaled.drive.omega_p0, 0)
        rows.append((
            float(alpha),
            final.component(0, 0, 0).real,
            abs(final.component(1, 0, 0).imag),
            abs(final.component(2, 0, 0).imag),
            abs(final.component(0, 0, 2).real),
            abs(wp.component(1, 0).imag),
            abs(wp.component(2, 0).imag),
        ))
    cols = ["alpha", "rho00_0", "abs_im_rho10_0", "abs_im_rho20_0",
            "abs_re_rho00_2", "wp_abs_im_rho10_0", "wp_abs_im_rho20_0"]
    path = outdir / f"fig2a_scaling.{fmt}"
    write_table(path, cols, rows, fmt)
    return [path]


def fit_loglog_slope(alphas, values) -> float:
    """Least-squares slope of log|value| against log(alpha)."""
    a = np.log(np.asarray(alphas, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(a, v, 1)[0])


def run_fig2b(model: SystemModel, outdir: Path, fmt: str = "csv", *,
              window_ghz=FIG2B_WINDOW_GHZ, points: int = FIG2B_POINTS,
              threads: int | None = None) -> list[Path]:
    """Weak-coupling absorption spectrum and its zero-coupling reference."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = uniform_grid(window_ghz[0], window_ghz[1], points)
    weak = scale_coupling(model, FIG2B_COUPLING_SCALE)
    written = []
    for tag, m in (("coupling_on", weak),
                   ("coupling_off", with_coupling_off(model))):
        result = sweep(m, grid, threads=threads)
        f_spec = outdir / f"fig2b_spectrum_{tag}.{fmt}"
        f_mark = outdir / f"fig2b_markers_{tag}.{fmt}"
        write_spectrum(result, f_spec, fmt)
        write_markers(result, f_mark, fmt)
        written += [f_spec, f_mark]
    return written

"""Command-line front end: validate, evolve, steady, dressed, spectrum, figures.

Every subcommand reads a TOML configuration, optionally patched by repeated
``--set key=value`` overrides (dotted paths into the config tree), and
writes plot-ready tables.  Failures print a machine-readable error JSON to
stderr and exit with the code of the error class.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._tables import write_table
from .errors import EXIT_CODES, FloquetProbeError, NotConverged, ValidationFailed
from .liouvillian import assemble_generator, build_parts
from .model import TWO_PI, apply_overrides, build_model, validate_model
from .propagation import (density_trajectory_rows, detect_steady_state,
                          harmonic_trajectory_rows, integrate_full_lindblad,
                          integrate_harmonics, integrate_von_neumann_complexH)
from .recipes import fit_loglog_slope, run_fig1, run_fig2a, run_fig2b
from .spectrum import (sweep, uniform_grid, write_dressed, write_markers,
                       write_spectrum)
from .stack import HarmonicStack
from .weakprobe import build_floquet_hamiltonian, dressed_states

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

HARMONIC_COLUMNS = ["time_ns", "i", "j", "N", "re", "im"]
DENSITY_COLUMNS = ["time_ns", "i", "j", "re", "im"]

_EXIT_CODE_HELP = "exit codes: 0 success, " + ", ".join(
    f"{code} {name}" for name, code in sorted(EXIT_CODES.items(),
                                              key=lambda kv: kv[1])
    if name != "FloquetProbeError") + ", 1 unexpected error"


def _load(args):
    with open(args.config, "rb") as fh:
        tree = tomllib.load(fh)
    if args.set:
        tree = apply_overrides(tree, args.set)
    model, run = build_model(tree)
    return model, run


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    model, _run = _load(args)
    report = validate_model(model)
    for issue in report:
        print(json.dumps(issue.as_dict()))
    if not report.ok:
        raise ValidationFailed(f"{len(report)} invariant violation(s)")
    return 0


def cmd_evolve(args) -> int:
    model, run = _load(args)
    out = _outdir(args)
    t_end = args.t_end if args.t_end is not None else run.t_end
    sample_dt = args.sample_dt
    if args.path == "harmonics":
        gen = assemble_generator(build_parts(model), run.n_min, run.n_max,
                                 model.drive.omega_c)
        initial = HarmonicStack.initial(model.initial_density(), run.n_min,
                                        run.n_max, model.drive.omega_c)
        traj = integrate_harmonics(gen, initial, t_end, run.ode_tol,
                                   sample_dt=sample_dt)
        path = out / f"trajectory_harmonics.{args.format}"
        write_table(path, HARMONIC_COLUMNS, harmonic_trajectory_rows(traj),
                    args.format)
    else:
        integrator = (integrate_full_lindblad if args.path == "lindblad"
                      else integrate_von_neumann_complexH)
        traj = integrator(model, t_end, run.ode_tol, sample_dt=sample_dt)
        path = out / f"trajectory_{args.path}.{args.format}"
        write_table(path, DENSITY_COLUMNS, density_trajectory_rows(traj),
                    args.format)
    print(f"wrote {path}")
    return 0


def cmd_steady(args) -> int:
    model, run = _load(args)
    out = _outdir(args)
    gen = assemble_generator(build_parts(model), run.n_min, run.n_max,
                             model.drive.omega_c)
    initial = HarmonicStack.initial(model.initial_density(), run.n_min,
                                    run.n_max, model.drive.omega_c)
    period = TWO_PI / model.drive.omega_c
    traj = integrate_harmonics(gen, initial, run.t_end, run.ode_tol,
                               sample_dt=period / 8)
    result = detect_steady_state(traj, steady_tol=run.steady_tol)
    if isinstance(result, NotConverged):
        raise result
    rows = []
    ns = result.dim
    for n_idx in range(result.n_min, result.n_max + 1):
        block = result.block(n_idx)
        for i in range(ns):
            for j in range(ns):
                v = block[i, j]
                rows.append((i, j, n_idx, v.real, v.imag))
    path = out / f"steady_harmonics.{args.format}"
    write_table(path, ["i", "j", "N", "re", "im"], rows, args.format)
    print(f"wrote {path}")
    return 0


def cmd_dressed(args) -> int:
    model, run = _load(args)
    out = _outdir(args)
    source = args.source
    if source is None:
        pops = run.initial_populations
        source = max(sorted(pops), key=lambda j: pops[j])
    f = build_floquet_hamiltonian(model, run.n_min, run.n_max)
    dset = dressed_states(f)
    path = out / f"dressed_states.{args.format}"
    write_dressed(dset, model, source, path, args.format)
    print(f"wrote {path}")
    return 0


def cmd_spectrum(args) -> int:
    model, run = _load(args)
    out = _outdir(args)
    grid = uniform_grid(args.window[0], args.window[1], args.points)
    result = sweep(model, grid, method=args.method, top_k=args.top_k,
                   threads=args.threads)
    f_spec = out / f"spectrum.{args.format}"
    f_mark = out / f"markers.{args.format}"
    write_spectrum(result, f_spec, args.format)
    write_markers(result, f_mark, args.format)
    failed = [g for g in result.grid if g.error]
    if failed:
        print(f"{len(failed)} grid point(s) failed; first: {failed[0].error}")
    print(f"wrote {f_spec}")
    print(f"wrote {f_mark}")
    return 0


def cmd_figures(args) -> int:
    model, _run = _load(args)
    out = _outdir(args)
    written = []
    if args.recipe in ("fig1", "all"):
        written += run_fig1(model, out, args.format)
    if args.recipe in ("fig2a", "all"):
        paths = run_fig2a(model, out, args.format)
        written += paths
        _print_fig2a_slopes(paths[0], args.format)
    if args.recipe in ("fig2b", "all"):
        written += run_fig2b(model, out, args.format, threads=args.threads)
    for path in written:
        print(f"wrote {path}")
    return 0


def _print_fig2a_slopes(path, fmt) -> None:
    if fmt != "csv":
        return
    data = np.genfromtxt(path, delimiter=",", names=True)
    mask = data["alpha"] >= 5
    s1 = fit_loglog_slope(data["alpha"][mask], data["abs_im_rho10_0"][mask])
    s2 = fit_loglog_slope(data["alpha"][mask], data["abs_re_rho00_2"][mask])
    print(f"fitted slope |Im rho10;0| vs alpha: {s1:+.4f} (expect -1)")
    print(f"fitted slope |Re rho00;2| vs alpha: {s2:+.4f} (expect -2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floquetprobe",
        description=__doc__.splitlines()[0],
        epilog=_EXIT_CODE_HELP)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, output=True):
        p.add_argument("config", help="TOML configuration file")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config value by dotted path "
                            "(e.g. run.n_max=40, drive.rabi_c.1.3=9.0, "
                            "drive.rabi_c=0 clears the matrix)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="tabular output format")
        if output:
            p.add_argument("-o", "--output", default=".",
                           help="output directory")

    p = sub.add_parser("validate", help="print the validation report as JSON lines")
    common(p, output=False)

    p = sub.add_parser("evolve", help="integrate and export a trajectory")
    common(p)
    p.add_argument("--path", choices=("harmonics", "lindblad", "vonneumann"),
                   default="harmonics", help="propagation route")
    p.add_argument("--t-end", type=float, default=None,
                   help="integration horizon in ns (default: run.t_end)")
    p.add_argument("--sample-dt", type=float, default=None,
                   help="sample stride in ns (default: t_end / 400)")

    p = sub.add_parser("steady", help="integrate, detect and export the steady harmonics")
    common(p)

    p = sub.add_parser("dressed", help="export the dressed-state table")
    common(p)
    p.add_argument("--source", type=int, default=None,
                   help="group-A source state for the weights "
                        "(default: largest initial population)")

    p = sub.add_parser("spectrum", help="sweep the probe and export spectrum + markers")
    common(p)
    p.add_argument("--window", type=float, nargs=2, default=(-5.0, 5.0),
                   metavar=("LO", "HI"),
                   help="probe offset window in GHz (ordinary frequency)")
    p.add_argument("--points", type=int, default=2001, help="grid size")
    p.add_argument("--method", choices=("spectral", "direct"),
                   default="spectral", help="per-point solver")
    p.add_argument("--top-k", type=int, default=15,
                   help="number of dressed-state markers")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="sweep worker threads")

    p = sub.add_parser("figures", help="run the canned figure recipes")
    common(p)
    p.add_argument("recipe", choices=("fig1", "fig2a", "fig2b", "all"))
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="sweep worker threads")
    return parser


_DISPATCH = {
    "validate": cmd_validate,
    "evolve": cmd_evolve,
    "steady": cmd_steady,
    "dressed": cmd_dressed,
    "spectrum": cmd_spectrum,
    "figures": cmd_figures,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.subcommand](args)
    except FloquetProbeError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc),
                   "exit_code": exc.exit_code}
        print(json.dumps(payload), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        payload = {"error": "OSError", "message": str(exc), "exit_code": 1}
        print(json.dumps(payload), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

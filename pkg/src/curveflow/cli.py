"""Command-line interface: ``curveflow <command> --config <path>``.

Exit codes: 0 success, 1 invalid input, 2 solver failure, 3 a tolerance or
property check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import verify as verification
from .analysis import build_report, length_rate_residuals, limit_constant
from .config import (MODES, build_problem, load_config, override, with_snapshot_times,
                     writable_dir)
from .errors import ConfigError, CurveflowError, FlowError
from .geometry import curve_from_support, summarize, support_from_radius
from .io import (render_svg, time_tag, write_metrics_csv, write_report, write_rows_csv,
                 write_snapshot_csv)
from .solver import run

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_TOLERANCE = 0, 1, 2, 3
TABLE_HEADER = ("t", "L/2mpi", "rho_min", "rho_max", "E")
HOMOTOPY_FRAMES = 21

log = logging.getLogger("curveflow")


class _SnapshotWriter:
    """Writes ``snapshot_t<tag>.csv`` and optionally ``frame_t<tag>.svg`` per state."""

    def __init__(self, problem, outdir: Path, t_end, svg=True, svg_size=400):
        self.problem, self.outdir, self.t_end = problem, outdir, t_end
        self.svg, self.svg_size = svg, svg_size
        self.written = []

    def __call__(self, state):
        p = support_from_radius(state.rho, reference=self.problem.target_support,
                                tol=max(self.problem.closure_tol, 1e-6))
        curve = curve_from_support(p)
        tag = time_tag(state.t, self.t_end)
        csv_path = self.outdir / f"snapshot_t{tag}.csv"
        write_snapshot_csv(csv_path, state.rho.grid.theta, state.rho.values, p.values, curve.points)
        self.written.append(csv_path)
        if self.svg:
            svg_path = self.outdir / f"frame_t{tag}.svg"
            svg_path.write_text(render_svg(curve.points, size=self.svg_size, title=f"t = {state.t:.4f}"))
            self.written.append(svg_path)


def _outdir(config) -> Path:
    out = Path(config.outputs.directory)
    if not writable_dir(out):
        raise ConfigError(f"output directory {out} is not writable", "outputs.directory")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _drift(diags):
    e0 = diags[0].energy
    return max(abs(d.energy - e0) for d in diags) / e0


def cmd_simulate(config) -> int:
    problem, _ = build_problem(config)
    out = _outdir(config)
    writer = _SnapshotWriter(problem, out, config.solver.t_end, config.outputs.svg,
                             config.outputs.svg_size)
    state, diags = run(problem, config.solver, sink=writer)
    write_metrics_csv(out / config.outputs.metrics, diags)
    print(f"t_end = {state.t:.6g} after {state.step_count} steps ({config.solver.scheme}, "
          f"dt = {config.solver.dt:g}, n = {config.n})")
    print(f"relative energy drift = {_drift(diags):.3e}")
    print(f"sup|rho - rho_target| = {np.abs(state.rho.values - problem.target.values).max():.6e}")
    print(f"wrote {len(writer.written)} snapshot files and {config.outputs.metrics} to {out}")
    return EXIT_OK


def table_rows(config):
    """Rows (t, L/2m pi, rho_min, rho_max, E) at the configured table times.

    A final row at t = inf holds the predicted limit curve rho_target + c0.
    """
    problem, _ = build_problem(config)
    m = problem.grid.m
    finite = sorted({t for t in config.table.times if math.isfinite(t)} | {0.0})
    t_end = max([config.solver.t_end] + finite)
    solver = config.solver.replace(t_end=t_end, snapshot_times=tuple(finite))
    rows = {}

    def sink(state):
        s = summarize(state.rho)
        rows[len(rows)] = (state.t, s.length / (2 * m * math.pi), s.rho_min, s.rho_max,
                           s.elastic_energy)

    _, diags = run(problem, solver, sink=sink)
    out = [(t, *rows[i][1:]) for i, t in enumerate(finite)]
    energy = diags[0].energy
    lim = summarize(problem.target + limit_constant(problem.target, energy))
    out.append((math.inf, lim.length / (2 * m * math.pi), lim.rho_min, lim.rho_max, energy))
    return out, diags


def compare_table(rows, reference, tolerance):
    """Cells whose relative deviation from the reference exceeds ``tolerance``."""
    by_time = {r[0]: r for r in rows}
    failures = []
    for ref in reference:
        got = next((r for t, r in by_time.items()
                    if (math.isinf(t) and math.isinf(ref[0])) or abs(t - ref[0]) <= 1e-9), None)
        if got is None:
            failures.append((ref[0], "t", math.nan, math.nan, math.inf))
            continue
        for col, name in enumerate(TABLE_HEADER[1:], start=1):
            dev = abs(got[col] - ref[col]) / abs(ref[col])
            if dev > tolerance:
                failures.append((ref[0], name, got[col], ref[col], dev))
    return failures


def _format_time(t):
    return "inf" if math.isinf(t) else f"{t:g}"


def cmd_table(config) -> int:
    out = _outdir(config)
    rows, _ = table_rows(config)
    print(f"{'t':>6} {'L/2mpi':>10} {'rho_min':>10} {'rho_max':>10} {'E':>10}")
    for t, *vals in rows:
        print(f"{_format_time(t):>6} " + " ".join(f"{v:10.4f}" for v in vals))
    write_rows_csv(out / "table.csv", TABLE_HEADER,
                   [("inf" if math.isinf(r[0]) else r[0], *r[1:]) for r in rows])
    if not config.table.reference:
        return EXIT_OK
    failures = compare_table(rows, config.table.reference, config.table.tolerance)
    for t, name, got, ref, dev in failures:
        print(f"MISMATCH t = {_format_time(t)} {name}: computed {got:.6g}, reference {ref:.6g}, "
              f"relative deviation {dev:.3e} > {config.table.tolerance:g}")
    if failures:
        return EXIT_TOLERANCE
    print(f"all {len(config.table.reference)} reference rows within relative tolerance "
          f"{config.table.tolerance:g}")
    return EXIT_OK


def cmd_homotopy(config) -> int:
    problem, scale = build_problem(config, rescale_target=True)
    out = _outdir(config)
    solver = config.solver
    if not solver.snapshot_times:
        solver = with_snapshot_times(solver, np.linspace(0.0, solver.t_end, HOMOTOPY_FRAMES))
    writer = _SnapshotWriter(problem, out, solver.t_end, config.outputs.svg, config.outputs.svg_size)
    state, diags = run(problem, solver, sink=writer)
    write_metrics_csv(out / config.outputs.metrics, diags)
    c0 = limit_constant(problem.target, diags[0].energy)
    print(f"target scale factor lambda = {scale:.12g}")
    print(f"predicted limit shift c0 = {c0:.3e}")
    print(f"min rho over the run = {min(d.rho_min for d in diags):.6g}")
    print(f"sup|rho - rho_target| at t = {state.t:g}: "
          f"{np.abs(state.rho.values - problem.target.values).max():.6e}")
    print(f"wrote {len(writer.written)} frame files to {out}")
    return EXIT_OK


def cmd_verify(config) -> int:
    problem, _ = build_problem(config)
    coarse = None
    if config.n != 256:
        try:
            coarse, _ = build_problem(override(config, n=256))
        except (ConfigError, ValueError) as exc:
            log.warning("skipping scheme comparison at n = 256: %s", exc)
    else:
        coarse = problem

    def show(r):
        print(r.line(), flush=True)

    results = verification.run_suite(problem, config.solver, coarse, progress=show)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties hold")
    return EXIT_TOLERANCE if failed else EXIT_OK


def cmd_analyze(config) -> int:
    problem, _ = build_problem(config)
    out = _outdir(config)
    state, diags = run(problem, config.solver.replace(snapshot_times=()))
    write_metrics_csv(out / config.outputs.metrics, diags)
    report = build_report(problem, diags, state)
    values = report.as_dict()
    residuals = length_rate_residuals(diags, summarize(problem.target).length, problem.grid.m)
    values["length_rate_residual_2pi"] = residuals["2pi"]
    values["length_rate_residual_2mpi"] = residuals["2mpi"]
    values["t_end"] = state.t
    write_report(out, values, report.bounds_violations)
    for k, v in values.items():
        print(f"{k} = {v:.6e}" if isinstance(v, float) else f"{k} = {v}")
    return EXIT_TOLERANCE if report.bounds_violations else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "table": cmd_table,
    "homotopy": cmd_homotopy,
    "verify": cmd_verify,
    "analyze": cmd_analyze,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="curveflow",
                                     description="Energy-preserving flow of locally convex curves.")
    parser.add_argument("command", choices=MODES)
    parser.add_argument("--config", required=True,
                        help="JSON config file, or the name of a shipped config")
    parser.add_argument("--out", help="output directory (overrides outputs.directory)")
    parser.add_argument("--tolerance", type=float, help="relative tolerance for table comparison")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--n", type=int, help="grid size")
    parser.add_argument("--t-end", type=float, dest="t_end")
    parser.add_argument("--flip-f-sign", action="store_true",
                        help="debug: negate the nonlocal term (conservation should then fail)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config)
        config = override(config, dt=args.dt, n=args.n, t_end=args.t_end,
                          tolerance=args.tolerance, out=args.out, mode=args.command)
        if args.flip_f_sign:
            config = dataclasses.replace(
                config, solver=config.solver.replace(f_sign=-config.solver.f_sign))
    except (CurveflowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](config)
    except FlowError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (CurveflowError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

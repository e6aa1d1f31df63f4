"""JSON configuration documents.

A document looks like::

    {
      "mode": "simulate",
      "grid": {"n": 512},
      "initial": {"kind": "trig", "m": 3, "constant": 11.672,
                  "harmonics": [{"k": 4, "a": 9, "b": 9}]},
      "target":  {"kind": "trig", "m": 3, "constant": 10,
                  "harmonics": [{"k": 2, "a": 10, "b": 10}]},
      "solver":  {"dt": 1e-4, "t_end": 4, "scheme": "etd2",
                  "snapshot_times": [0, 0.01, 0.1, 1, 4]},
      "outputs": {"directory": "out", "metrics": "metrics.csv",
                  "svg": true, "svg_size": 400},
      "table":   {"times": [0, 1, 4], "tolerance": 0.005,
                  "reference": [[0, 11.672, 1.7725, 21.5715, 3.0463]]}
    }

Curves are either ``"kind": "trig"`` (support function constant plus
harmonics a sin(k theta/m) + b cos(k theta/m); an optional ``"cover": c``
traverses an m = 1 curve c times) or ``"kind": "samples"`` (a CSV file with a
``rho`` column sampled on the grid).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Union

from .errors import ConfigError, CurveflowError, WindingMismatchError
from .geometry import (Harmonic, RadiusProfile, SupportProfile, TangentAngleGrid,
                       TrigSupportSpec, elastic_energy, eval_trig_support,
                       radius_from_support, rescale_to_match_energy, support_from_radius)
from .io import read_profile_csv
from .solver import SCHEMES, FlowProblem, SolverConfig

MODES = ("simulate", "table", "homotopy", "verify", "analyze")
TABLE_TIMES = (0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class TrigCurve:
    spec: TrigSupportSpec
    cover: int = 1

    @property
    def m(self):
        return self.spec.m * self.cover

    def effective_spec(self):
        """The equivalent spec on the covered circle: sin(k t) = sin(k c t / c)."""
        if self.cover == 1:
            return self.spec
        return TrigSupportSpec(self.spec.constant,
                               tuple(Harmonic(h.k * self.cover, h.a, h.b) for h in self.spec.harmonics),
                               m=self.m)


@dataclass(frozen=True)
class SampledCurve:
    path: str
    m: int


CurveSource = Union[TrigCurve, SampledCurve]


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    metrics: str = "metrics.csv"
    svg: bool = True
    svg_size: int = 400


@dataclass(frozen=True)
class TableConfig:
    times: tuple = TABLE_TIMES
    tolerance: float = 0.005
    # rows (t, L/2m pi, rho_min, rho_max, E); t may be math.inf
    reference: tuple = ()


@dataclass(frozen=True)
class SimulationConfig:
    initial: CurveSource
    target: CurveSource
    n: int = 512
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    table: TableConfig = field(default_factory=TableConfig)
    mode: str = "simulate"

    @property
    def m(self):
        return self.initial.m

    @property
    def grid(self):
        return TangentAngleGrid(self.m, self.n)


def _get(doc, key, path, kind=None, default=...):
    if not isinstance(doc, dict):
        raise ConfigError("expected an object", path)
    if key not in doc:
        if default is ...:
            raise ConfigError("missing required field", f"{path}.{key}" if path else key)
        return default
    val = doc[key]
    where = f"{path}.{key}" if path else key
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            if val in ("inf", "+inf", "Infinity"):
                return math.inf
            raise ConfigError(f"expected a number, got {val!r}", where)
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or int(val) != val:
            raise ConfigError(f"expected an integer, got {val!r}", where)
        return int(val)
    if kind is bool and not isinstance(val, bool):
        raise ConfigError(f"expected true/false, got {val!r}", where)
    if kind is str and not isinstance(val, str):
        raise ConfigError(f"expected a string, got {val!r}", where)
    if kind is list and not isinstance(val, list):
        raise ConfigError(f"expected a list, got {val!r}", where)
    return val


def _parse_curve(doc, path) -> CurveSource:
    kind = _get(doc, "kind", path, str, "trig")
    m = _get(doc, "m", path, int, 1)
    if m < 1:
        raise ConfigError("winding number must be >= 1", f"{path}.m")
    if kind == "samples":
        return SampledCurve(path=_get(doc, "path", path, str), m=m)
    if kind != "trig":
        raise ConfigError(f"unknown curve kind {kind!r} (expected 'trig' or 'samples')", f"{path}.kind")
    harmonics = []
    for i, h in enumerate(_get(doc, "harmonics", path, list, [])):
        hp = f"{path}.harmonics[{i}]"
        k = _get(h, "k", hp, int)
        if k < 1:
            raise ConfigError("harmonic numerator must be >= 1", f"{hp}.k")
        harmonics.append(Harmonic(k, _get(h, "a", hp, float, 0.0), _get(h, "b", hp, float, 0.0)))
    cover = _get(doc, "cover", path, int, 1)
    if cover < 1:
        raise ConfigError("cover must be >= 1", f"{path}.cover")
    if cover > 1 and m != 1:
        raise ConfigError("cover requires an m = 1 base curve", f"{path}.cover")
    spec = TrigSupportSpec(_get(doc, "constant", path, float), tuple(harmonics), m=m)
    return TrigCurve(spec, cover)


def _parse_solver(doc):
    path = "solver"
    try:
        return SolverConfig(
            dt=_get(doc, "dt", path, float, 1e-4),
            t_end=_get(doc, "t_end", path, float, 4.0),
            scheme=_get(doc, "scheme", path, str, "etd2"),
            snapshot_times=tuple(float(t) for t in _get(doc, "snapshot_times", path, list, [])),
            energy_drift_abort=_get(doc, "energy_drift_abort", path, float, 1e-4),
            positivity_floor=_get(doc, "positivity_floor", path, float, 1e-8),
            f_sign=-1.0 if _get(doc, "flip_f_sign", path, bool, False) else 1.0,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), path) from exc


def _parse_table(doc):
    path = "table"
    rows = []
    for i, row in enumerate(_get(doc, "reference", path, list, [])):
        if not isinstance(row, list) or len(row) != 5:
            raise ConfigError("reference rows must be [t, L/2m*pi, rho_min, rho_max, E]",
                              f"{path}.reference[{i}]")
        rows.append(tuple(_get({"v": v}, "v", f"{path}.reference[{i}]", float) for v in row))
    tol = _get(doc, "tolerance", path, float, 0.005)
    if not tol > 0:
        raise ConfigError("tolerance must be positive", f"{path}.tolerance")
    times = tuple(_get({"v": t}, "v", f"{path}.times[{i}]", float)
                  for i, t in enumerate(_get(doc, "times", path, list, list(TABLE_TIMES))))
    if any(t < 0 for t in times):
        raise ConfigError("table times must be >= 0", f"{path}.times")
    return TableConfig(times=times, tolerance=tol, reference=tuple(rows))


def config_from_dict(doc: dict) -> SimulationConfig:
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    mode = _get(doc, "mode", "", str, "simulate")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}", "mode")
    initial = _parse_curve(_get(doc, "initial", ""), "initial")
    target = _parse_curve(_get(doc, "target", ""), "target")
    grid_doc = _get(doc, "grid", "", dict, {})
    n = _get(grid_doc, "n", "grid", int, 512)
    solver = _parse_solver(_get(doc, "solver", "", dict, {}))
    out_doc = _get(doc, "outputs", "", dict, {})
    outputs = OutputConfig(
        directory=_get(out_doc, "directory", "outputs", str, "out"),
        metrics=_get(out_doc, "metrics", "outputs", str, "metrics.csv"),
        svg=_get(out_doc, "svg", "outputs", bool, True),
        svg_size=_get(out_doc, "svg_size", "outputs", int, 400),
    )
    if outputs.svg_size < 16:
        raise ConfigError("svg_size must be >= 16 pixels", "outputs.svg_size")
    table = _parse_table(_get(doc, "table", "", dict, {}))
    config = SimulationConfig(initial=initial, target=target, n=n, solver=solver,
                              outputs=outputs, table=table, mode=mode)
    validate(config)
    return config


def parse_config(text: str) -> SimulationConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def validate(config: SimulationConfig):
    """Check winding numbers, resolution and local convexity of both curves."""
    if config.initial.m != config.target.m:
        raise WindingMismatchError(
            f"initial curve has winding number {config.initial.m} but target has "
            f"{config.target.m}; the flow needs the same winding number")
    try:
        grid = TangentAngleGrid(config.m, config.n)
    except ValueError as exc:
        raise ConfigError(str(exc), "grid.n") from exc
    for name in ("initial", "target"):
        try:
            resolve_support(getattr(config, name), grid)
        except CurveflowError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), name) from exc
    if config.mode == "simulate" and not config.solver.snapshot_times:
        raise ConfigError("simulate mode needs at least one snapshot time", "solver.snapshot_times")


def load_config(path_or_name: str) -> SimulationConfig:
    """Read a config file; bare names such as ``threefold_example`` resolve to shipped configs."""
    return parse_config(read_config_text(path_or_name))


def read_config_text(path_or_name: str) -> str:
    p = Path(path_or_name)
    if p.exists():
        return p.read_text()
    name = p.name if p.suffix == ".json" else p.name + ".json"
    shipped = resources.files("curveflow") / "data" / name
    if shipped.is_file():
        return shipped.read_text()
    raise ConfigError(f"no such config file or shipped config: {path_or_name}")


def _curve_to_dict(c: CurveSource):
    if isinstance(c, SampledCurve):
        return {"kind": "samples", "m": c.m, "path": c.path}
    d = {"kind": "trig", "m": c.spec.m, "constant": c.spec.constant,
         "harmonics": [{"k": h.k, "a": h.a, "b": h.b} for h in c.spec.harmonics]}
    if c.cover != 1:
        d["cover"] = c.cover
    return d


def _num(x):
    return "inf" if x == math.inf else x


def config_to_dict(config: SimulationConfig) -> dict:
    s = config.solver
    return {
        "mode": config.mode,
        "grid": {"n": config.n},
        "initial": _curve_to_dict(config.initial),
        "target": _curve_to_dict(config.target),
        "solver": {"dt": s.dt, "t_end": s.t_end, "scheme": s.scheme,
                   "snapshot_times": list(s.snapshot_times),
                   "energy_drift_abort": s.energy_drift_abort,
                   "positivity_floor": s.positivity_floor,
                   "flip_f_sign": s.f_sign < 0},
        "outputs": {"directory": config.outputs.directory, "metrics": config.outputs.metrics,
                    "svg": config.outputs.svg, "svg_size": config.outputs.svg_size},
        "table": {"times": list(config.table.times), "tolerance": config.table.tolerance,
                  "reference": [[_num(v) for v in row] for row in config.table.reference]},
    }


def serialize_config(config: SimulationConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2)


def override(config: SimulationConfig, *, dt=None, n=None, t_end=None, tolerance=None,
             out=None, mode=None) -> SimulationConfig:
    """Apply command-line overrides and re-validate."""
    doc = config_to_dict(config)
    if dt is not None:
        doc["solver"]["dt"] = dt
    if t_end is not None:
        doc["solver"]["t_end"] = t_end
        doc["solver"]["snapshot_times"] = [t for t in doc["solver"]["snapshot_times"] if t <= t_end]
    if n is not None:
        doc["grid"]["n"] = n
    if tolerance is not None:
        doc["table"]["tolerance"] = tolerance
    if out is not None:
        doc["outputs"]["directory"] = out
    if mode is not None:
        doc["mode"] = mode
    return config_from_dict(doc)


def resolve_support(source: CurveSource, grid: TangentAngleGrid) -> SupportProfile:
    if isinstance(source, TrigCurve):
        return eval_trig_support(source.effective_spec(), grid)
    rho = RadiusProfile(grid, read_profile_csv(source.path, grid.n))
    rho.check_positive()
    return support_from_radius(rho)


def build_problem(config: SimulationConfig, rescale_target: bool = False):
    """FlowProblem for the configured curves.

    With ``rescale_target`` the target is scaled to the initial energy; the
    applied scale factor is returned alongside the problem.
    """
    grid = config.grid
    p0 = resolve_support(config.initial, grid)
    pt = resolve_support(config.target, grid)
    scale = 1.0
    if rescale_target:
        e0 = elastic_energy(radius_from_support(p0))
        _, scale = rescale_to_match_energy(radius_from_support(pt), e0)
        pt = SupportProfile(grid, pt.values * scale)
    problem = FlowProblem.from_supports(p0, pt)
    return problem, scale


def with_snapshot_times(solver: SolverConfig, times) -> SolverConfig:
    times = sorted({float(t) for t in times if 0 <= t <= solver.t_end})
    return solver.replace(snapshot_times=tuple(times))


def writable_dir(path) -> bool:
    p = Path(path).resolve()
    while not p.exists():
        p = p.parent
    return os.access(p, os.W_OK)


__all__ = [
    "SimulationConfig", "TrigCurve", "SampledCurve", "OutputConfig", "TableConfig",
    "parse_config", "load_config", "serialize_config", "config_to_dict", "config_from_dict",
    "build_problem", "resolve_support", "override", "validate", "MODES", "SCHEMES", "TABLE_TIMES",
]

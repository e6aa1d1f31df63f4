"""Invariant checks run by ``curveflow verify``.

Each check returns a :class:`PropertyResult`; none of them raise on failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import sweep_bounds
from .errors import FlowError
from .geometry import radius_from_support
from .solver import FlowProblem, FlowState, SolverConfig, evolve_support, run, step

ENERGY_DRIFT_TOL = 1e-6
ENERGY_REFINEMENT_FACTOR = 4.0
STATIONARY_TOL = 1e-9
CLOSURE_GROWTH_TOL = 1e-9
DUAL_TOL = 1e-6
SCHEME_TOL = 1e-6


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _measuring(config: SolverConfig, **changes) -> SolverConfig:
    # verification measures drift instead of aborting on it
    return config.replace(energy_drift_abort=math.inf, snapshot_times=(), **changes)


def energy_drift(diagnostics) -> float:
    e0 = diagnostics[0].energy
    return max(abs(d.energy - e0) for d in diagnostics) / e0


def check_stationary(problem: FlowProblem, config: SolverConfig,
                     shifts=(-0.5, 0.0, 0.5, 1.0), steps: int = 10_000) -> PropertyResult:
    cfg = _measuring(config, t_end=steps * config.dt)
    worst = 0.0
    for c in shifts:
        start = problem.target + c
        if start.values.min() <= 0:
            continue
        shifted = FlowProblem(start, problem.target, problem.target_support)
        state = FlowState(0.0, start)
        try:
            for _ in range(steps):
                state = step(state, shifted, cfg)
        except FlowError as exc:
            return PropertyResult("stationary_family", False, f"c = {c}: {exc}")
        worst = max(worst, float(np.abs(state.rho.values - start.values).max()))
    return PropertyResult("stationary_family", worst <= STATIONARY_TOL,
                          f"max sup|rho(t) - (rho_target + c)| = {worst:.3e} over {steps} steps "
                          f"(tol {STATIONARY_TOL:.0e})")


def check_energy(problem: FlowProblem, config: SolverConfig):
    """Drift at dt and dt/2. Returns (result, diagnostics at dt)."""
    try:
        _, diags = run(problem, _measuring(config))
        _, diags_half = run(problem, _measuring(config, dt=config.dt / 2))
    except FlowError as exc:
        partial = [exc.diagnostics] if exc.diagnostics is not None else []
        return PropertyResult("energy_conservation", False, str(exc)), partial
    d1, d2 = energy_drift(diags), energy_drift(diags_half)
    ratio = d1 / d2 if d2 > 0 else math.inf
    ok = d1 <= ENERGY_DRIFT_TOL and ratio >= ENERGY_REFINEMENT_FACTOR
    return PropertyResult(
        "energy_conservation", ok,
        f"max relative drift {d1:.3e} at dt = {config.dt:g} (tol {ENERGY_DRIFT_TOL:.0e}); "
        f"halving dt reduces it by {ratio:.4f} (need >= {ENERGY_REFINEMENT_FACTOR:g})"), diags


def check_closure(diagnostics) -> PropertyResult:
    if not diagnostics:
        return PropertyResult("closure_preservation", False, "no diagnostics")
    d0 = diagnostics[0].closure_defect
    worst = max(d.closure_defect for d in diagnostics)
    ok = worst <= d0 + CLOSURE_GROWTH_TOL
    return PropertyResult("closure_preservation", ok,
                          f"max closure defect {worst:.3e} (initial {d0:.3e})")


def check_bounds(problem: FlowProblem, diagnostics) -> PropertyResult:
    if not diagnostics:
        return PropertyResult("bound_sweep", False, "no diagnostics")
    violations = sweep_bounds(problem, diagnostics)
    detail = f"{len(violations)} violations over {len(diagnostics)} diagnostic rows"
    if violations:
        t, name, margin = violations[0]
        detail += f"; first: {name} at t = {t:.6g} (margin {margin:.3e})"
    return PropertyResult("bound_sweep", not violations, detail)


def check_dual(problem: FlowProblem, config: SolverConfig, t_end: float = 1.0) -> PropertyResult:
    cfg = _measuring(config, t_end=min(t_end, config.t_end))
    try:
        state, _ = run(problem, cfg)
        p = evolve_support(problem, cfg)
    except FlowError as exc:
        return PropertyResult("dual_formulation", False, str(exc))
    err = float(np.abs(radius_from_support(p).values - state.rho.values).max())
    return PropertyResult("dual_formulation", err <= DUAL_TOL,
                          f"sup|rho_from_p - rho| = {err:.3e} at t = {cfg.t_end:g} (tol {DUAL_TOL:.0e})")


def scheme_errors(problem: FlowProblem, t_end=0.1, dt=1e-3, dt_oracle=1e-5, f_sign=1.0):
    """Sup-norm distance of etd2 and imex_cn from the fine-step rk4 oracle at t_end."""
    base = SolverConfig(dt=dt_oracle, t_end=t_end, scheme="rk4_explicit",
                        energy_drift_abort=math.inf, f_sign=f_sign)
    ref, _ = run(problem, base)
    out = {}
    for scheme in ("etd2", "imex_cn"):
        st, _ = run(problem, base.replace(dt=dt, scheme=scheme))
        out[scheme] = float(np.abs(st.rho.values - ref.rho.values).max())
    return out


def check_schemes(problem_256: FlowProblem, f_sign=1.0) -> PropertyResult:
    try:
        errs = scheme_errors(problem_256, f_sign=f_sign)
    except FlowError as exc:
        return PropertyResult("scheme_equivalence", False, str(exc))
    ok = all(e <= SCHEME_TOL for e in errs.values())
    detail = ", ".join(f"{k} {v:.3e}" for k, v in errs.items())
    return PropertyResult("scheme_equivalence", ok,
                          f"sup distance to rk4 (dt=1e-5) at t = 0.1, n = {problem_256.grid.n}: "
                          f"{detail} (tol {SCHEME_TOL:.0e})")


def run_suite(problem: FlowProblem, config: SolverConfig, problem_256: FlowProblem | None = None,
              stationary_steps: int = 10_000, progress=None):
    """All properties in order; ``progress`` (optional) receives each result as it completes."""
    results = []

    def emit(r):
        results.append(r)
        if progress is not None:
            progress(r)

    emit(check_stationary(problem, config, steps=stationary_steps))
    energy, diags = check_energy(problem, config)
    emit(energy)
    emit(check_closure(diags or []))
    emit(check_bounds(problem, diags or []))
    emit(check_dual(problem, config))
    if problem_256 is not None:
        emit(check_schemes(problem_256, f_sign=config.f_sign))
    return results


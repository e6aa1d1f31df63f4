"""Post-hoc convergence checks and predictions for completed flow runs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import GridMismatchError, NoRootError
from .geometry import PlaneCurve, RadiusProfile, elastic_energy
from .solver import FlowProblem, FlowState, StepDiagnostics, nonlocal_term


class DecayUnderflowWarning(RuntimeWarning):
    """sup|u_theta| reached zero; the decay fit used only the preceding samples."""


@dataclass(frozen=True)
class ConvergenceReport:
    c0_predicted: float
    c0_observed: float
    sup_distance_to_limit: float
    decay_slope_fit: float
    f_terminal: float
    energy_drift: float
    bounds_violations: tuple = ()
    sup_derivative_distance: float = float("nan")

    def as_dict(self):
        return {
            "c0_predicted": self.c0_predicted,
            "c0_observed": self.c0_observed,
            "sup_distance_to_limit": self.sup_distance_to_limit,
            "sup_derivative_distance": self.sup_derivative_distance,
            "decay_slope_fit": self.decay_slope_fit,
            "f_terminal": self.f_terminal,
            "energy_drift": self.energy_drift,
            "bounds_violations": len(self.bounds_violations),
        }


def _energy_with_shift(target_values, m, c):
    n = target_values.shape[0]
    return float(np.sum(1.0 / (target_values + c)) * (2.0 * np.pi * m / n))


def limit_constant(target: RadiusProfile, energy: float) -> float:
    """The unique c0 with energy = int d theta / (rho_target + c0).

    Bisection on (-min rho_target + delta, c_hi]; the right-hand side decreases
    strictly in c, blowing up at the lower end and decaying like 2 m pi / c.
    """
    if not energy > 0:
        raise NoRootError(f"energy must be positive, got {energy}")
    vals = target.values
    m = target.grid.m
    lo_rho = float(vals.min())
    lo = -lo_rho + 1e-9 * lo_rho
    residual = lambda c: _energy_with_shift(vals, m, c) - energy  # noqa: E731
    if residual(lo) < 0:
        raise NoRootError(
            f"energy {energy:.6g} exceeds the largest attainable value {residual(lo) + energy:.6g}")
    hi = max(1.0, abs(lo))
    while residual(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise NoRootError(f"no bracket found for energy {energy:.6g}")
    # bisect until the bracket stops shrinking in floating point
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if residual(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(residual(lo)) <= abs(residual(hi)) else hi


def decay_fit(diagnostics: Sequence[StepDiagnostics], t_min: float = 1.0,
              t_max: float | None = None) -> float:
    """Least-squares slope of log sup|u_theta| against t over [t_min, t_max]."""
    t = np.array([d.t for d in diagnostics])
    y = np.array([d.sup_u_theta for d in diagnostics])
    sel = t >= t_min - 1e-12
    if t_max is not None:
        sel &= t <= t_max + 1e-12
    t, y = t[sel], y[sel]
    zero = np.flatnonzero(~(y > 0))
    if zero.size:
        warnings.warn(f"sup|u_theta| underflowed at t = {t[zero[0]]:.6g}; fitting the prefix only",
                      DecayUnderflowWarning, stacklevel=2)
        t, y = t[:zero[0]], y[:zero[0]]
    if t.size < 2:
        raise ValueError("need at least two positive samples in the fit window")
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(slope)


def harnack_m1(problem: FlowProblem) -> float:
    """sup|rho_target'| + sup|u_theta(., 0)| evaluated on the grid."""
    target_d = problem.target.derivative(1)
    u_d = problem.grid.derivative(problem.initial.values - problem.target.values, 1)
    return float(np.abs(target_d).max() + np.abs(u_d).max())


def theoretical_harnack_bound(problem: FlowProblem) -> float:
    """H = exp(M1 * E) bounding rho_max / rho_min for all time."""
    return math.exp(harnack_m1(problem) * elastic_energy(problem.initial))


def _min_enclosing_circle(points):
    """Smallest circle containing all points (Welzl, randomized incremental)."""
    pts = points[np.random.default_rng(0).permutation(len(points))]

    def circle2(a, b):
        c = 0.5 * (a + b)
        return c, float(np.hypot(*(a - c)))

    def circle3(a, b, c):
        ax, ay = a
        bx, by = b
        cx, cy = c
        d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if abs(d) < 1e-300:
            # collinear: widest pair
            pairs = [circle2(a, b), circle2(a, c), circle2(b, c)]
            return max(pairs, key=lambda t: t[1])
        ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
              + (cx * cx + cy * cy) * (ay - by)) / d
        uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
              + (cx * cx + cy * cy) * (bx - ax)) / d
        center = np.array([ux, uy])
        return center, float(np.hypot(*(a - center)))

    def inside(circ, p):
        c, r = circ
        return np.hypot(*(p - c)) <= r * (1 + 1e-12) + 1e-15

    circ = (pts[0], 0.0)
    for i in range(1, len(pts)):
        if inside(circ, pts[i]):
            continue
        circ = (pts[i], 0.0)
        for j in range(i):
            if inside(circ, pts[j]):
                continue
            circ = circle2(pts[i], pts[j])
            for k in range(j):
                if not inside(circ, pts[k]):
                    circ = circle3(pts[i], pts[j], pts[k])
    return circ


def curve_distance_mod_translation(a: PlaneCurve, b: PlaneCurve) -> float:
    """min over translations v of max_j |a_j - b_j - v|.

    The differences are first centred on their centroid; the optimal
    translation is then the centre of their smallest enclosing circle and
    the distance is its radius.
    """
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")
    diff = a.points - b.points
    diff = diff - diff.mean(axis=0)
    _, radius = _min_enclosing_circle(diff)
    return radius


BOUND_NAMES = ("harnack", "energy_sandwich", "positivity", "closure", "derivative_decay")


def sweep_bounds(problem: FlowProblem, diagnostics: Sequence[StepDiagnostics],
                 closure_tol: float = 1e-8, rel_slack: float = 1e-9):
    """Check every diagnostics row against the a-priori bounds.

    Returns a list of ``(t, bound_name, margin)`` with negative margins.
    """
    m = problem.grid.m
    H = theoretical_harnack_bound(problem)
    energy0 = diagnostics[0].energy if diagnostics else elastic_energy(problem.initial)
    floor = 2 * m * math.pi / (energy0 * H)
    c1 = diagnostics[0].sup_u_theta ** 2 if diagnostics else 0.0
    out = []
    for d in diagnostics:
        ratio = d.rho_max / d.rho_min
        r_e = 2 * m * math.pi / d.energy
        checks = (
            ("harnack", H * (1 + rel_slack) - ratio),
            ("energy_sandwich", min(r_e - d.rho_min, d.rho_max - r_e) + rel_slack * r_e),
            ("positivity", d.rho_min - floor),
            ("closure", closure_tol - d.closure_defect),
            ("derivative_decay",
             c1 * math.exp(-2 * d.t) * (1 + rel_slack) + 1e-24 - d.sup_u_theta ** 2),
        )
        for name, margin in checks:
            if not margin >= 0:
                out.append((d.t, name, float(margin)))
    return out


def length_rate_residuals(diagnostics: Sequence[StepDiagnostics], target_length: float, m: int):
    """Max residual of dL/dt = -L + L_target - K f for K = 2 pi and K = 2 m pi.

    dL/dt is estimated by centred differences of the recorded lengths.
    """
    t = np.array([d.t for d in diagnostics])
    L = np.array([d.length for d in diagnostics])
    f = np.array([d.f_value for d in diagnostics])
    dLdt = np.gradient(L, t)[1:-1]
    base = (-L + target_length)[1:-1]
    f = f[1:-1]
    return {
        "2pi": float(np.abs(dLdt - (base - 2 * math.pi * f)).max()),
        "2mpi": float(np.abs(dLdt - (base - 2 * m * math.pi * f)).max()),
    }


def build_report(problem: FlowProblem, diagnostics: Sequence[StepDiagnostics],
                 final_state: FlowState, t_min: float = 1.0) -> ConvergenceReport:
    energy0 = diagnostics[0].energy
    c0 = limit_constant(problem.target, energy0)
    u = final_state.rho.values - problem.target.values
    try:
        slope = decay_fit(diagnostics, t_min=t_min)
    except ValueError:
        slope = float("nan")
    drift = max(abs(d.energy - energy0) for d in diagnostics) / energy0
    return ConvergenceReport(
        c0_predicted=c0,
        c0_observed=float(u.mean()),
        sup_distance_to_limit=float(np.abs(u - c0).max()),
        decay_slope_fit=slope,
        f_terminal=nonlocal_term(final_state.rho, problem.target),
        energy_drift=float(drift),
        bounds_violations=tuple(sweep_bounds(problem, diagnostics)),
        sup_derivative_distance=float(np.abs(problem.grid.derivative(u, 1)).max()),
    )

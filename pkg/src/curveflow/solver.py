"""Time integration of the energy-preserving nonlocal flow.

In tangent-angle parametrization the flow reduces to a scalar equation for
the radius of curvature,

    rho_t = rho'' - rho_target'' - rho + rho_target - f(t),

where the nonlocal scalar f(t) is chosen so that the elastic energy
int 1/rho d theta is constant in time. Writing u = rho - rho_target, every
nonconstant Fourier mode of u obeys u_k' = -(1 + (k/m)^2) u_k exactly; only
the mean feels f. The default scheme (``etd2``) integrates the diagonal
linear part exactly and treats f by the exponential midpoint rule: f at the
step start drives a half-step predictor, and f re-evaluated there drives the
full step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import spectral
from .errors import (ClosureError, EnergyDriftError, GridMismatchError, NumericalFailure,
                     PositivityError)
from .geometry import (CLOSURE_TOL, RadiusProfile, SupportProfile,
                       closure_defect, radius_from_support, support_from_radius)

log = logging.getLogger(__name__)

SCHEMES = ("etd2", "imex_cn", "rk4_explicit")


@dataclass(frozen=True, eq=False)
class FlowProblem:
    """Initial and target curves on a shared grid.

    ``initial_support`` is optional; when absent the initial support function
    is recovered from the initial radius with translation modes borrowed from
    the target support.
    """

    initial: RadiusProfile
    target: RadiusProfile
    target_support: SupportProfile
    initial_support: Optional[SupportProfile] = None
    closure_tol: float = CLOSURE_TOL

    def __post_init__(self):
        grid = self.initial.grid
        for name in ("target", "target_support"):
            if getattr(self, name).grid != grid:
                raise GridMismatchError(f"{name} grid {getattr(self, name).grid} != initial grid {grid}")
        if self.initial_support is not None and self.initial_support.grid != grid:
            raise GridMismatchError("initial_support grid differs from initial grid")
        self.initial.check_positive()
        self.target.check_positive()
        for name in ("initial", "target"):
            d = closure_defect(getattr(self, name))
            if d > self.closure_tol:
                raise ClosureError(f"{name} curve does not close: defect {d:.3e}", d)
        mismatch = np.abs(radius_from_support(self.target_support).values - self.target.values).max()
        if mismatch > 1e-8 * max(1.0, float(np.abs(self.target.values).max())):
            raise ValueError(f"target_support is inconsistent with target radius (mismatch {mismatch:.3e})")

    @property
    def grid(self):
        return self.initial.grid

    @classmethod
    def from_supports(cls, initial: SupportProfile, target: SupportProfile, **kw):
        return cls(initial=radius_from_support(initial), target=radius_from_support(target),
                   target_support=target, initial_support=initial, **kw)

    def support_at_start(self) -> SupportProfile:
        if self.initial_support is not None:
            return self.initial_support
        return support_from_radius(self.initial, reference=self.target_support,
                                   tol=self.closure_tol)


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    rho: RadiusProfile
    f: float = 0.0
    step_count: int = 0


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-4
    t_end: float = 4.0
    scheme: str = "etd2"
    snapshot_times: tuple = ()
    energy_drift_abort: float = 1e-4
    positivity_floor: float = 1e-8
    # debug: -1 flips the sign of the nonlocal term (breaks energy conservation)
    f_sign: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ValueError(f"t_end ({self.t_end}) must be >= dt ({self.dt})")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if list(self.snapshot_times) != sorted(self.snapshot_times):
            raise ValueError("snapshot_times must be sorted")
        if self.snapshot_times and (self.snapshot_times[0] < 0 or self.snapshot_times[-1] > self.t_end):
            raise ValueError("snapshot_times must lie in [0, t_end]")
        if not self.positivity_floor > 0:
            raise ValueError("positivity_floor must be positive")
        if not self.energy_drift_abort > 0:
            raise ValueError("energy_drift_abort must be positive")

    def replace(self, **changes):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return SolverConfig(**kw)


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    f_value: float
    energy: float
    length: float
    rho_min: float
    rho_max: float
    harnack_ratio: float
    closure_defect: float
    sup_u: float
    sup_u_theta: float

    COLUMNS = ("t", "f", "energy", "length", "rho_min", "rho_max", "harnack_ratio",
               "closure_defect", "sup_u", "sup_u_theta")

    def as_row(self):
        return tuple(getattr(self, f.name) for f in fields(self))

    def is_finite(self):
        return all(math.isfinite(v) for v in self.as_row())


def _shared_grid(rho, target):
    if rho.grid != target.grid:
        raise GridMismatchError(f"grid mismatch: {rho.grid} vs {target.grid}")
    return rho.grid


def _nonlocal(rho_values, u_tt, u, m):
    k2 = 1.0 / (rho_values * rho_values)
    num = spectral.integrate(k2 * (u_tt - u), m)
    return float(num / spectral.integrate(k2, m))


def nonlocal_term(rho: RadiusProfile, target: RadiusProfile, method=spectral.SPECTRAL) -> float:
    """The scalar f that makes d/dt int 1/rho vanish.

    f = [int k^2 (rho'' - rho_target'') - int k^2 (rho - rho_target)] / int k^2, k = 1/rho.
    """
    grid = _shared_grid(rho, target)
    u_tt = grid.derivative(rho.values, 2, method) - grid.derivative(target.values, 2, method)
    return _nonlocal(rho.values, u_tt, rho.values - target.values, grid.m)


def velocity(rho: RadiusProfile, target: RadiusProfile, f: float,
             method=spectral.SPECTRAL) -> np.ndarray:
    """Right-hand side rho'' - rho_target'' - rho + rho_target - f, node-wise."""
    grid = _shared_grid(rho, target)
    u = rho.values - target.values
    return grid.derivative(u, 2, method) - u - f


class _Stepper:
    """Advance the deviation w from a fixed reference by one step of size dt.

    The same machinery serves both the radius (w = rho - rho_target) and the
    support function (w = p - p_target) forms: both obey w_t = w'' - w - f with
    f computed from the current radius.
    """

    def __init__(self, grid, dt, scheme, f_sign=1.0):
        self.grid = grid
        self.dt = dt
        self.scheme = scheme
        self.f_sign = f_sign
        m, n = grid.m, grid.n
        self.d2 = spectral.spectral_multiplier(m, n, 2).real
        lam = self.d2 - 1.0
        self.lam = lam
        if scheme == "etd2":
            self.e_full = np.exp(lam * dt)
            self.e_half = np.exp(lam * dt / 2)
            # f only enters mode 0, whose eigenvalue is -1: dt*phi1(-dt) = 1 - e^{-dt}
            self.g_half = -math.expm1(-dt / 2)
            self.g_full = -math.expm1(-dt)
        elif scheme == "imex_cn":
            self.cn = (1 + lam * dt / 2) / (1 - lam * dt / 2)
            self.cn_forcing = dt / (1 + dt / 2)

    def _lin(self, w_hat, factor):
        return np.fft.irfft(w_hat * factor, n=self.grid.n)

    def step(self, w, f_of):
        """Return (w_new, f at the step start); ``f_of(w)`` evaluates the nonlocal term."""
        s = self.f_sign
        if self.scheme == "etd2":
            w_hat = np.fft.rfft(w)
            f0 = s * f_of(w)
            w_mid = self._lin(w_hat, self.e_half) - self.g_half * f0
            f_mid = s * f_of(w_mid)
            return self._lin(w_hat, self.e_full) - self.g_full * f_mid, f0
        if self.scheme == "imex_cn":
            w_hat = np.fft.rfft(w)
            base = self._lin(w_hat, self.cn)
            f0 = s * f_of(w)
            w_pred = base - self.cn_forcing * f0
            f1 = s * f_of(w_pred)
            return base - self.cn_forcing * 0.5 * (f0 + f1), f0
        # classical RK4 on the full right-hand side, in physical space
        h = self.dt
        rhs = self._rhs
        k1, f0 = rhs(w, f_of)
        k2, _ = rhs(w + 0.5 * h * k1, f_of)
        k3, _ = rhs(w + 0.5 * h * k2, f_of)
        k4, _ = rhs(w + h * k3, f_of)
        return w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), f0

    def _rhs(self, w, f_of):
        f = self.f_sign * f_of(w)
        w_tt = spectral.derivative(w, self.grid.m, 2)
        return w_tt - w - f, f


@lru_cache(maxsize=32)
def _stepper(grid, dt, scheme, f_sign):
    return _Stepper(grid, dt, scheme, f_sign)


class _RadiusForm:
    """Closures binding a problem to the radius-form state w = rho - rho_target."""

    def __init__(self, problem: FlowProblem):
        self.target = problem.target.values
        self.m = problem.grid.m
        self.d2 = spectral.spectral_multiplier(self.m, problem.grid.n, 2).real

    def rho(self, w):
        return self.target + w

    def f(self, w):
        w_tt = np.fft.irfft(np.fft.rfft(w) * self.d2, n=w.shape[0])
        return _nonlocal(self.target + w, w_tt, w, self.m)


class _SupportForm:
    """Support-form state w = p - p_target; rho is recovered as p + p''."""

    def __init__(self, problem: FlowProblem):
        self.p_target = problem.target_support.values
        self.rho_target = problem.target.values
        self.m = problem.grid.m
        self.d2 = spectral.spectral_multiplier(self.m, problem.grid.n, 2).real

    def rho(self, w):
        p = self.p_target + w
        return p + np.fft.irfft(np.fft.rfft(p) * self.d2, n=w.shape[0])

    def f(self, w):
        rho = self.rho(w)
        u = rho - self.rho_target
        u_tt = np.fft.irfft(np.fft.rfft(u) * self.d2, n=w.shape[0])
        return _nonlocal(rho, u_tt, u, self.m)


def _check_rho(rho_values, t, config, diag=None):
    if not np.all(np.isfinite(rho_values)):
        raise NumericalFailure("non-finite radius of curvature", t, diag)
    lo = float(rho_values.min())
    if lo <= config.positivity_floor:
        raise PositivityError(
            f"rho_min = {lo:.3e} fell below positivity floor {config.positivity_floor:.1e}", t, diag)


def step(state: FlowState, problem: FlowProblem, config: SolverConfig) -> FlowState:
    """Advance ``state`` by one step of size ``config.dt``."""
    return _advance(state, problem, config, config.dt)


def _advance(state, problem, config, dt):
    form = _RadiusForm(problem)
    stepper = _stepper(problem.grid, dt, config.scheme, config.f_sign)
    w = state.rho.values - problem.target.values
    w_new, _ = stepper.step(w, form.f)
    t_new = state.t + dt
    rho_new = form.rho(w_new)
    _check_rho(rho_new, t_new, config)
    return FlowState(t=t_new, rho=RadiusProfile(problem.grid, rho_new), f=form.f(w_new),
                     step_count=state.step_count + 1)


def diagnostics(state: FlowState, problem: FlowProblem, f_value: float | None = None) -> StepDiagnostics:
    grid = problem.grid
    rho = state.rho.values
    u = rho - problem.target.values
    lo, hi = float(rho.min()), float(rho.max())
    if f_value is None:
        f_value = nonlocal_term(state.rho, problem.target)
    return StepDiagnostics(
        t=state.t,
        f_value=float(f_value),
        energy=grid.integrate(1.0 / rho),
        length=grid.integrate(rho),
        rho_min=lo,
        rho_max=hi,
        harnack_ratio=hi / lo,
        closure_defect=closure_defect(state.rho),
        sup_u=float(np.abs(u).max()),
        sup_u_theta=float(np.abs(grid.derivative(u, 1)).max()),
    )


def _step_plan(config, t0=0.0):
    """(step size, time after the step) pairs covering [t0, t_end].

    Times are computed as t0 + k*dt rather than accumulated, so that long
    runs land on requested times without round-off creep; the last step is
    shortened when dt does not divide the interval.
    """
    span = config.t_end - t0
    n_full = int(math.floor(span / config.dt + 1e-9))
    plan = [(config.dt, t0 + k * config.dt) for k in range(1, n_full + 1)]
    rest = span - n_full * config.dt
    if rest > 1e-12 * max(1.0, config.t_end):
        plan.append((rest, config.t_end))
    return plan


def run(problem: FlowProblem, config: SolverConfig,
        sink: Callable[[FlowState], None] | None = None,
        initial_state: FlowState | None = None):
    """Integrate from t = 0 to ``config.t_end``.

    A :class:`StepDiagnostics` record is produced at t = 0 and after every
    accepted step. ``sink`` receives the state at the first accepted step with
    t >= each requested snapshot time. Returns ``(final_state, diagnostics)``.
    """
    state = initial_state or FlowState(t=0.0, rho=problem.initial)
    form = _RadiusForm(problem)
    pending = list(config.snapshot_times)
    eps_t = 1e-6 * config.dt

    d0 = diagnostics(state, problem)
    state = FlowState(state.t, state.rho, d0.f_value, state.step_count)
    records = [d0]
    e0 = d0.energy
    while pending and pending[0] <= state.t + eps_t:
        pending.pop(0)
        if sink is not None:
            sink(state)

    for dt, t_new in _step_plan(config, state.t):
        stepper = _stepper(problem.grid, dt, config.scheme, config.f_sign)
        w = state.rho.values - problem.target.values
        w_new, _ = stepper.step(w, form.f)
        rho_new = form.rho(w_new)
        _check_rho(rho_new, t_new, config, records[-1])
        state = FlowState(t=t_new, rho=RadiusProfile(problem.grid, rho_new),
                          f=form.f(w_new), step_count=state.step_count + 1)
        d = diagnostics(state, problem, f_value=state.f)
        if not d.is_finite():
            raise NumericalFailure("non-finite diagnostics", t_new, d)
        records.append(d)
        drift = abs(d.energy - e0) / e0
        if drift > config.energy_drift_abort:
            raise EnergyDriftError(
                f"relative energy drift {drift:.3e} exceeds abort threshold "
                f"{config.energy_drift_abort:.1e}", t_new, d)
        while pending and pending[0] <= state.t + eps_t:
            pending.pop(0)
            if sink is not None:
                sink(state)
    log.debug("run finished at t=%g after %d steps", state.t, state.step_count)
    return state, records


def evolve_support(problem: FlowProblem, config: SolverConfig,
                   initial: SupportProfile | None = None) -> SupportProfile:
    """Integrate the support-function form p_t = p'' - p + 2 p_target - rho_target - f.

    Uses the same scheme as :func:`run`, with f computed from rho = p + p''.
    Serves as an independent cross-check of the radius form.
    """
    p0 = initial if initial is not None else problem.support_at_start()
    form = _SupportForm(problem)
    w = p0.values - problem.target_support.values
    for dt, t in _step_plan(config):
        stepper = _stepper(problem.grid, dt, config.scheme, config.f_sign)
        w, _ = stepper.step(w, form.f)
        _check_rho(form.rho(w), t, config)
    return SupportProfile(problem.grid, problem.target_support.values + w)


def normal_velocity_diagnostic(state: FlowState, problem: FlowProblem) -> np.ndarray:
    """Normal speed beta = 2p - rho - 2 p_target + rho_target + f at every node."""
    p = support_from_radius(state.rho, reference=problem.target_support, tol=problem.closure_tol)
    f = nonlocal_term(state.rho, problem.target)
    return (2 * p.values - state.rho.values - 2 * problem.target_support.values
            + problem.target.values + f)

"""Locally convex closed curves in tangent-angle parametrization.

A locally convex curve with winding number m is parametrized by its tangent
angle theta on the m-fold circle [0, 2*pi*m). Three equivalent descriptions
are used throughout:

* the support function p(theta) = -<X, N>,
* the radius of curvature rho = p + p'' (strictly positive),
* the point set X(theta) = p' T - p N, with T = (cos, sin), N = (-sin, cos).

Profiles are immutable samples on a :class:`TangentAngleGrid`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import spectral
from .errors import (ClosureError, GridMismatchError, InvalidPolylineError,
                     NonConvexError, ResolutionError)

DEFAULT_N = 512
CLOSURE_TOL = 1e-8


def _frozen(values, n=None):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("profile values must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise GridMismatchError(f"expected {n} samples, got {arr.shape[0]}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TangentAngleGrid:
    """Uniform nodes theta_j = 2*pi*m*j/n on the m-fold circle."""

    m: int
    n: int = DEFAULT_N

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"winding number must be a positive integer, got {self.m}")
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise ValueError(f"sample count must be an even integer >= 16, got {self.n}")
        if self.n <= 2 * self.m:
            raise ResolutionError(f"n = {self.n} cannot resolve frequency-1 modes for m = {self.m}")

    @cached_property
    def theta(self) -> np.ndarray:
        return _frozen(2.0 * np.pi * self.m * np.arange(self.n) / self.n)

    @cached_property
    def unit_tangent(self) -> np.ndarray:
        """exp(i theta_j): the tangent T(theta_j) as a complex number."""
        z = np.exp(1j * self.theta)
        z.setflags(write=False)
        return z

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi * self.m / self.n

    @property
    def total_angle(self) -> float:
        return 2.0 * np.pi * self.m

    def integrate(self, values) -> float:
        return float(spectral.integrate(values, self.m))

    def derivative(self, values, order=1, method=spectral.SPECTRAL) -> np.ndarray:
        return spectral.derivative(values, self.m, order, method)


@dataclass(frozen=True)
class Harmonic:
    """One term a*sin(k*theta/m) + b*cos(k*theta/m)."""

    k: int
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"harmonic numerator must be a positive integer, got {self.k}")


@dataclass(frozen=True)
class TrigSupportSpec:
    """Analytic support function p = constant + sum(a_k sin(k theta/m) + b_k cos(k theta/m))."""

    constant: float
    harmonics: tuple[Harmonic, ...] = ()
    m: int = 1

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple(
            h if isinstance(h, Harmonic) else Harmonic(*h) for h in self.harmonics))

    @property
    def max_k(self) -> int:
        return max((h.k for h in self.harmonics), default=0)

    def support(self, theta, order=0):
        """Exact order-th derivative of p at arbitrary angles."""
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.constant if order == 0 else 0.0)
        for h in self.harmonics:
            w = h.k / self.m
            # d^q/dtheta^q of sin/cos advances the phase by q*pi/2
            phase = order * np.pi / 2
            out = out + w ** order * (h.a * np.sin(w * theta + phase)
                                      + h.b * np.cos(w * theta + phase))
        return out

    def radius(self, theta, order=0):
        """Exact order-th derivative of rho = p + p''."""
        return self.support(theta, order) + self.support(theta, order + 2)


@dataclass(frozen=True, eq=False)
class SupportProfile:
    grid: TangentAngleGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.n))

    def derivative(self, order=1, method=spectral.SPECTRAL):
        return self.grid.derivative(self.values, order, method)


@dataclass(frozen=True, eq=False)
class RadiusProfile:
    grid: TangentAngleGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.n))

    @property
    def curvature(self) -> np.ndarray:
        return 1.0 / self.values

    def derivative(self, order=1, method=spectral.SPECTRAL):
        return self.grid.derivative(self.values, order, method)

    def check_positive(self):
        bad = np.flatnonzero(~(self.values > 0))
        if bad.size:
            j = int(bad[0])
            raise NonConvexError(
                f"radius of curvature is not positive at theta = {self.grid.theta[j]:.6g} "
                f"(rho = {self.values[j]:.6g}); curve is not locally convex")
        return self

    def __add__(self, other):
        if isinstance(other, RadiusProfile):
            _same_grid(self.grid, other.grid)
            other = other.values
        return RadiusProfile(self.grid, self.values + other)

    def __mul__(self, scale):
        return RadiusProfile(self.grid, self.values * float(scale))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class PlaneCurve:
    grid: TangentAngleGrid
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.shape != (self.grid.n, 2):
            raise GridMismatchError(f"expected points of shape ({self.grid.n}, 2), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def translated(self, offset):
        return PlaneCurve(self.grid, self.points + np.asarray(offset, dtype=float))


@dataclass(frozen=True)
class GeometricSummary:
    length: float
    elastic_energy: float
    rho_min: float
    rho_max: float
    winding: int
    closure_defect: float

    @property
    def energy_radius(self) -> float:
        """2*m*pi/E, sandwiched between rho_min and rho_max."""
        return 2.0 * np.pi * self.winding / self.elastic_energy


def _same_grid(a, b):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def eval_trig_support(spec: TrigSupportSpec, grid: TangentAngleGrid) -> SupportProfile:
    if spec.m != grid.m:
        raise GridMismatchError(f"spec has winding {spec.m} but grid has m = {grid.m}")
    if grid.n <= 4 * spec.max_k:
        raise ResolutionError(
            f"n = {grid.n} too small: must exceed 4 * max harmonic numerator = {4 * spec.max_k}")
    rho = spec.radius(grid.theta)
    if np.any(rho <= 0):
        j = int(np.argmin(rho))
        raise NonConvexError(
            f"support function induces rho = {rho[j]:.6g} <= 0 at theta = {grid.theta[j]:.6g}; "
            "curve is not locally convex")
    return SupportProfile(grid, spec.support(grid.theta))


def radius_from_support(p: SupportProfile, method=spectral.SPECTRAL) -> RadiusProfile:
    rho = RadiusProfile(p.grid, p.values + p.derivative(2, method))
    return rho.check_positive()


def closure_defect(rho: RadiusProfile) -> float:
    """|int rho e^{i theta} d theta|: zero exactly when the reconstructed curve closes."""
    grid = rho.grid
    return float(abs(spectral.integrate(rho.values * grid.unit_tangent, grid.m)))


def support_from_radius(rho: RadiusProfile, reference: SupportProfile | None = None,
                        tol: float = CLOSURE_TOL) -> SupportProfile:
    """Invert p + p'' = rho mode by mode.

    Modes k = +-m lie in the kernel (they encode translations). They are copied
    from ``reference`` when given and set to zero otherwise.
    """
    grid = rho.grid
    defect = closure_defect(rho)
    if defect > tol:
        raise ClosureError(
            f"closure defect {defect:.3e} exceeds tolerance {tol:.1e}; "
            "rho does not describe a closed curve", defect)
    coeffs = np.fft.rfft(rho.values)
    symbol = 1.0 - spectral.wavenumbers(grid.m, grid.n) ** 2
    symbol[grid.m] = 1.0
    p_hat = coeffs / symbol
    if reference is not None:
        _same_grid(grid, reference.grid)
        p_hat[grid.m] = np.fft.rfft(reference.values)[grid.m]
    else:
        p_hat[grid.m] = 0.0
    return SupportProfile(grid, np.fft.irfft(p_hat, n=grid.n))


def reconstruct_curve(rho: RadiusProfile, basepoint=(0.0, 0.0)) -> PlaneCurve:
    """X(theta) = basepoint + int_0^theta rho(phi) (cos phi, sin phi) d phi."""
    grid = rho.grid
    z = spectral.antiderivative(rho.values * grid.unit_tangent, grid.m)
    pts = np.column_stack([z.real, z.imag]) + np.asarray(basepoint, dtype=float)
    return PlaneCurve(grid, pts)


def curve_from_support(p: SupportProfile) -> PlaneCurve:
    grid = p.grid
    c, s = np.cos(grid.theta), np.sin(grid.theta)
    dp = p.derivative(1)
    x = dp * c + p.values * s
    y = dp * s - p.values * c
    return PlaneCurve(grid, np.column_stack([x, y]))


def summarize(rho: RadiusProfile) -> GeometricSummary:
    grid = rho.grid
    return GeometricSummary(
        length=grid.integrate(rho.values),
        elastic_energy=grid.integrate(1.0 / rho.values),
        rho_min=float(rho.values.min()),
        rho_max=float(rho.values.max()),
        winding=grid.m,
        closure_defect=closure_defect(rho),
    )


def elastic_energy(rho: RadiusProfile) -> float:
    return rho.grid.integrate(1.0 / rho.values)


def mfold_cover(rho_1fold: RadiusProfile, m: int) -> RadiusProfile:
    """Traverse a convex (m = 1) curve m times."""
    if rho_1fold.grid.m != 1:
        raise ValueError("mfold_cover expects a profile with winding number 1")
    if int(m) != m or m < 1:
        raise ValueError(f"cover multiplicity must be a positive integer, got {m}")
    grid = TangentAngleGrid(m, rho_1fold.grid.n * m)
    return RadiusProfile(grid, np.tile(rho_1fold.values, m))


def rescale_to_match_energy(target: RadiusProfile, desired_energy: float):
    """Scale a curve so its elastic energy equals ``desired_energy``.

    Scaling by lambda multiplies rho by lambda and E by 1/lambda. Returns
    ``(scaled_profile, lambda)``.
    """
    if not desired_energy > 0:
        raise ValueError("desired energy must be positive")
    scale = elastic_energy(target) / desired_energy
    return target * scale, scale


def winding_number(points: Sequence) -> int:
    """Total turning of a closed polyline divided by 2*pi, rounded."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise InvalidPolylineError("need at least 3 points of shape (n, 2)")
    edges = np.roll(pts, -1, axis=0) - pts
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    scale = max(float(np.abs(pts).max()), 1.0)
    if np.any(lengths <= 1e-14 * scale):
        j = int(np.argmin(lengths))
        raise InvalidPolylineError(f"degenerate (zero-length) edge at vertex {j}")
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    dot = np.einsum("ij,ij->i", edges, nxt)
    total = np.arctan2(cross, dot).sum()
    return int(np.rint(total / (2.0 * np.pi)))

"""Constructive design of potentials that make a prescribed geodesic a strict
oscillation mode.

Given a geodesic and its tubular chart (xi1 along the curve, xi2 transverse),
the force field is prescribed on the curve so that its pullback is exactly
tangent there, extended off the curve so the mixed partials match (the field
is integrable), and shaped transversally by a function beta chosen to keep
the resulting potential negative definite.  Integrating the field gives the
potential; composing with the chart inverse gives it in configuration
coordinates.

A force field here is the covariant differential of the potential in chart
coordinates: F_i = df/dxi^i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .dynamics import PotentialField
from .errors import CertificationError
from .fastpath import DesignedKernelData
from .geodesics import (
    GeodesicChart,
    ROT90,
    chart_inverse,
    chart_inverse_batch,
    fd4_uniform,
)
from .manifold import MetricField, contravariant_gradient, metric_eval, tangential_normal_split

INTEGRABILITY_PRECONDITION = 1e-5


# ---------------------------------------------------------------------------
# force field construction


@dataclass(frozen=True)
class OnGeodesicForce:
    """Covariant force components sampled along the geodesic (xi2 = 0)."""

    xi1: np.ndarray
    F1: np.ndarray
    F2: np.ndarray


def on_geodesic_force(metric: MetricField, chart: GeodesicChart, alpha) -> OnGeodesicForce:
    """Sample F_i(xi1, 0) = alpha(xi1) * dh^j/dxi^i g_jk dgamma^k/dxi1.

    For a unit-speed geodesic the first component reduces to alpha itself;
    the second is generally nonzero because the transverse basis vector is a
    coordinate rotation, not metric-orthogonal.
    """
    curve = chart.curve
    s, q, w = curve.s, curve.q, curve.w
    try:
        vals = np.asarray(alpha(s), dtype=float)
        if vals.shape != s.shape:
            raise TypeError
    except TypeError:
        vals = np.array([float(alpha(x)) for x in s])
    e = w @ ROT90.T
    f1 = np.empty(len(s))
    f2 = np.empty(len(s))
    for i in range(len(s)):
        g = metric_eval(metric, q[i])
        gw = g @ w[i]
        f1[i] = vals[i] * float(w[i] @ gw)
        f2[i] = vals[i] * float(e[i] @ gw)
    return OnGeodesicForce(xi1=s.copy(), F1=f1, F2=f2)


@dataclass(frozen=True)
class GeodesicForceField:
    """Covariant force components on a rectangular (xi1, xi2) grid."""

    xi1: np.ndarray          # (m1,)
    xi2: np.ndarray          # (m2,)
    F1: np.ndarray           # (m1, m2)
    F2: np.ndarray           # (m1, m2)

    @property
    def spacing(self) -> tuple:
        return (float(self.xi1[1] - self.xi1[0]), float(self.xi2[1] - self.xi2[0]))


def extend_force_field(
    on_geo: OnGeodesicForce, beta, halfwidth: float, spacing: float | None = None
) -> GeodesicForceField:
    """Extend the on-geodesic force to a strip |xi2| <= halfwidth.

    F1 grows linearly in xi2 with slope dF2(.,0)/dxi1 (central differences of
    the sampled profile), which satisfies the mixed-partials condition by
    construction; F2 adds the integral of ``beta``.
    """
    xi1 = on_geo.xi1
    h = float(xi1[1] - xi1[0]) if spacing is None else float(spacing)
    n2 = int(math.floor(halfwidth / h + 1e-12))
    if n2 < 1:
        raise ValueError("halfwidth must cover at least one grid step")
    xi2 = h * np.arange(-n2, n2 + 1)

    d = fd4_uniform(on_geo.F2, h)
    beta_int = _integrated(beta)
    f1 = on_geo.F1[:, None] + xi2[None, :] * d[:, None]
    f2 = on_geo.F2[:, None] + beta_int(xi2)[None, :]
    return GeodesicForceField(xi1=xi1.copy(), xi2=xi2, F1=f1, F2=f2)


def _integrated(fn) -> Callable:
    """Antiderivative vanishing at 0; exact for Polynomial, quadrature otherwise."""
    if isinstance(fn, Polynomial):
        p = fn.integ()
        return lambda x: p(x) - p(0.0)

    def quad(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for i, xi in enumerate(x):
            grid = np.linspace(0.0, xi, 201)
            vals = np.array([float(fn(g)) for g in grid])
            out[i] = cumulative_simpson(vals, x=grid, initial=0.0)[-1] if xi != 0.0 else 0.0
        return out

    return quad


def integrability_residual(field_: GeodesicForceField) -> float:
    """Max-abs mismatch of the mixed partials on the interior grid.

    Fourth-order central differences, evaluated where both stencils fit
    (two rows and columns off each edge).
    """
    f1, f2 = field_.F1, field_.F2
    if f1.shape[0] < 5 or f1.shape[1] < 5:
        raise ValueError("grid too small for interior central differences")
    h1, h2 = field_.spacing
    d1 = (f1[:, :-4] - 8.0 * f1[:, 1:-3] + 8.0 * f1[:, 3:-1] - f1[:, 4:]) / (12.0 * h2)
    d2 = (f2[:-4, :] - 8.0 * f2[1:-3, :] + 8.0 * f2[3:-1, :] - f2[4:, :]) / (12.0 * h1)
    return float(np.max(np.abs(d1[2:-2, :] - d2[:, 2:-2])))


# ---------------------------------------------------------------------------
# transverse bound


@dataclass(frozen=True)
class BetaBoundReport:
    """Per-level transverse bound from the negative-definiteness condition.

    ``bound[j]`` is the grid infimum over |xi1| <= epsilon of
    (dF2(xi1,0)/dxi1)^2 / (dF1(xi1,xi2_j)/dxi1); NaN where the denominator
    changes sign across the window (bound undefined there).
    """

    xi2: np.ndarray
    bound: np.ndarray
    sign_change: np.ndarray
    epsilon: float

    def margin_for(self, beta) -> float:
        """min over defined levels of bound - beta(xi2); positive means ok."""
        ok = ~np.isnan(self.bound)
        if not np.any(ok):
            return float("nan")
        beta_vals = np.asarray(beta(self.xi2[ok]), dtype=float)
        return float(np.min(self.bound[ok] - beta_vals))


def beta_bound(field_: GeodesicForceField, epsilon: float) -> BetaBoundReport:
    """Evaluate the transverse-slope bound on the extended field."""
    xi1, xi2 = field_.xi1, field_.xi2
    h1 = field_.spacing[0]
    j0 = int(np.argmin(np.abs(xi2)))
    if abs(xi2[j0]) > 1e-12:
        raise ValueError("grid must contain xi2 = 0")
    d_on = fd4_uniform(field_.F2[:, j0], h1)
    d_f1 = fd4_uniform(field_.F1, h1, axis=0)
    window = np.abs(xi1) <= epsilon
    if not np.any(window):
        raise ValueError("epsilon window contains no interior grid points")

    num = d_on[window] ** 2
    bound = np.empty(len(xi2))
    flips = np.zeros(len(xi2), dtype=bool)
    for j in range(len(xi2)):
        den = d_f1[window, j]
        defined = np.abs(den) > 1e-12
        if not np.any(defined):
            bound[j] = np.nan
            flips[j] = True
            continue
        signs = np.sign(den[defined])
        if signs.max() != signs.min():
            bound[j] = np.nan
            flips[j] = True
            continue
        bound[j] = float(np.min(num[defined] / den[defined]))
    return BetaBoundReport(xi2=xi2.copy(), bound=bound, sign_change=flips, epsilon=float(epsilon))


# ---------------------------------------------------------------------------
# potential integration


@dataclass(frozen=True)
class DesignedPotential:
    """Potential on the chart strip: grid values plus smooth evaluators."""

    xi1: np.ndarray
    xi2: np.ndarray
    f: np.ndarray                            # (m1, m2) grid values
    value_xi: Callable = field(repr=False)   # (x1, x2) -> f, vectorized
    diff_xi: Callable = field(repr=False)    # (x1, x2) -> (F1, F2), vectorized
    source: str = "grid"
    kernel_data: DesignedKernelData | None = field(default=None, repr=False)


def _cumulative_from_zero(y: np.ndarray, x: np.ndarray, i0: int) -> np.ndarray:
    """Cumulative Simpson integral anchored at node i0 (where x[i0] = 0)."""
    out = np.empty_like(y)
    out[i0:] = cumulative_simpson(y[i0:], x=x[i0:], initial=0.0)
    if i0 > 0:
        left = cumulative_simpson(y[i0::-1], x=-x[i0::-1], initial=0.0)
        out[:i0] = -left[::-1][:-1]
    return out


def integrate_potential(field_: GeodesicForceField, order: str = "xi1-first") -> DesignedPotential:
    """Recover the potential from the force grid along an L-shaped path.

    ``order`` chooses the leg sequence ("xi1-first": along the axis, then
    transverse; "xi2-first": the reverse), which only matters as a
    path-independence diagnostic.  Composite Simpson quadrature; requires the
    integrability residual to be at most 1e-5.
    """
    res = integrability_residual(field_)
    if res > INTEGRABILITY_PRECONDITION:
        raise CertificationError(
            f"integrability residual {res:.3e} above {INTEGRABILITY_PRECONDITION:g}; "
            "the grid does not represent a gradient field"
        )
    xi1, xi2 = field_.xi1, field_.xi2
    i0 = int(np.argmin(np.abs(xi1)))
    j0 = int(np.argmin(np.abs(xi2)))
    if abs(xi1[i0]) > 1e-12 or abs(xi2[j0]) > 1e-12:
        raise ValueError("grid must contain the origin of the chart")

    f = np.empty((len(xi1), len(xi2)))
    if order == "xi1-first":
        base = _cumulative_from_zero(field_.F1[:, j0], xi1, i0)
        for i in range(len(xi1)):
            f[i, :] = base[i] + _cumulative_from_zero(field_.F2[i, :], xi2, j0)
    elif order == "xi2-first":
        base = _cumulative_from_zero(field_.F2[i0, :], xi2, j0)
        for j in range(len(xi2)):
            f[:, j] = base[j] + _cumulative_from_zero(field_.F1[:, j], xi1, i0)
    else:
        raise ValueError(f"unknown integration order {order!r}")

    f_sp = RectBivariateSpline(xi1, xi2, f)
    f1_sp = RectBivariateSpline(xi1, xi2, field_.F1)
    f2_sp = RectBivariateSpline(xi1, xi2, field_.F2)
    return DesignedPotential(
        xi1=xi1.copy(),
        xi2=xi2.copy(),
        f=f,
        value_xi=lambda x1, x2: f_sp.ev(x1, x2),
        diff_xi=lambda x1, x2: (f1_sp.ev(x1, x2), f2_sp.ev(x1, x2)),
        source="grid",
    )


def designed_potential_in_q(dp: DesignedPotential, chart: GeodesicChart) -> PotentialField:
    """Express a chart-strip potential in configuration coordinates.

    Values compose the chart inverse; differentials apply the inverse-
    transpose chart Jacobian.  Queries outside the validated strip raise
    ChartDomainError rather than extrapolating.
    """

    def value(q):
        x1, x2 = chart_inverse(chart, q)
        return float(dp.value_xi(x1, x2))

    def differential(q):
        x1, x2 = chart_inverse(chart, q)
        f1, f2 = dp.diff_xi(x1, x2)
        jac = chart.jacobian((x1, x2))
        return np.linalg.solve(jac.T, np.array([float(f1), float(f2)]))

    def value_batch(qs):
        xi = chart_inverse_batch(chart, qs)
        return np.asarray(dp.value_xi(xi[:, 0], xi[:, 1]), dtype=float)

    kernel = ("designed", dp.kernel_data) if dp.kernel_data is not None else None
    return PotentialField(
        value=value,
        differential=differential,
        name="designed",
        value_batch=value_batch,
        kernel=kernel,
    )


# ---------------------------------------------------------------------------
# definiteness


@dataclass(frozen=True)
class DefinitenessReport:
    passed: bool
    worst_margin: float
    worst_point: np.ndarray
    tol: float


def definiteness_check(
    potential: PotentialField, points, qstar=None, tol: float = 1e-3
) -> DefinitenessReport:
    """Check f(q) < f(q*) - tol * |q - q*|^2 on a sample of points.

    The verdict is false when any sample violates the quadratic decay away
    from the designated equilibrium; the worst offender is reported.
    """
    qstar = np.zeros(2) if qstar is None else np.asarray(qstar, dtype=float)
    pts = np.asarray(points, dtype=float).reshape(-1, qstar.size)
    f0 = potential.value_at(qstar)
    vals = potential.values_at(pts)
    d2 = np.einsum("ij,ij->i", pts - qstar, pts - qstar)
    margins = vals - f0 + tol * d2
    mask = d2 > 0.0
    if not np.any(mask):
        raise ValueError("need sample points away from the equilibrium")
    k = int(np.argmax(np.where(mask, margins, -np.inf)))
    return DefinitenessReport(
        passed=bool(np.all(margins[mask] < 0.0)),
        worst_margin=float(margins[k]),
        worst_point=pts[k],
        tol=float(tol),
    )


# ---------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True)
class DesignSpec:
    """Inputs of the design procedure.

    ``alpha`` and ``beta`` are polynomial coefficient arrays in ascending
    order; ``epsilon`` is the half-width of the xi1 window used by the
    transverse bound.  ``alpha`` must vanish at 0 and be strictly decreasing
    so the potential peaks at the chart origin.
    """

    chart: GeodesicChart
    alpha: np.ndarray
    beta: np.ndarray
    epsilon: float

    def alpha_poly(self) -> Polynomial:
        return Polynomial(np.asarray(self.alpha, dtype=float))

    def beta_poly(self) -> Polynomial:
        return Polynomial(np.asarray(self.beta, dtype=float))


@dataclass(frozen=True)
class Certification:
    integrability_residual: float
    beta_bound: BetaBoundReport
    beta_margin: float
    definiteness: DefinitenessReport
    tangency_residual: float
    path_gap: float

    @property
    def passed(self) -> bool:
        return (
            self.integrability_residual <= 1e-5
            and self.beta_margin > 0.0
            and self.definiteness.passed
            and self.tangency_residual <= 1e-6
        )


@dataclass(frozen=True)
class DesignResult:
    spec: DesignSpec
    on_geodesic: OnGeodesicForce
    force_field: GeodesicForceField
    potential_xi: DesignedPotential
    potential: PotentialField
    certification: Certification


def _validate_alpha(spec: DesignSpec):
    p = spec.alpha_poly()
    if abs(p(0.0)) > 1e-12:
        raise ValueError("alpha must vanish at xi1 = 0 (the equilibrium on the curve)")
    dp = p.deriv()
    lo, hi = spec.chart.xi1_range
    grid = np.linspace(lo, hi, 201)
    if np.any(dp(grid) >= 0.0):
        raise ValueError("alpha must be strictly decreasing on the chart range")


def design_strict_potential(metric: MetricField, spec: DesignSpec) -> DesignResult:
    """Run the full construction and certify the result.

    The simulation potential interpolates the on-curve transverse profile
    with a cubic spline and extends it with the spline derivative, which
    makes the interpolated field an exact gradient; the exported grid uses
    plain central differences, matching what the residual checks measure.
    """
    _validate_alpha(spec)
    chart = spec.chart
    curve = chart.curve
    alpha_p = spec.alpha_poly()
    beta_p = spec.beta_poly()

    on_geo = on_geodesic_force(metric, chart, alpha_p)
    force = extend_force_field(on_geo, beta_p, chart.halfwidth)
    residual = integrability_residual(force)
    bound = beta_bound(force, spec.epsilon)
    beta_margin = bound.margin_for(beta_p)

    # smooth profile potential: f = A(xi1) + S(xi1) xi2 + B2(xi2)
    s_sp = CubicSpline(on_geo.xi1, on_geo.F2)
    d_sp = s_sp.derivative()
    a_p = alpha_p.integ()
    bp_p = beta_p.integ()
    b2_p = bp_p.integ()

    def value_xi(x1, x2):
        transverse = b2_p(x2) - b2_p(0.0) - bp_p(0.0) * x2
        return (a_p(x1) - a_p(0.0)) + s_sp(x1) * x2 + transverse

    def diff_xi(x1, x2):
        return alpha_p(x1) + x2 * d_sp(x1), s_sp(x1) + (bp_p(x2) - bp_p(0.0))

    f_grid = value_xi(force.xi1[:, None], force.xi2[None, :])

    kernel_data = DesignedKernelData(
        gamma_c=np.ascontiguousarray(chart._gamma.c),
        w_c=np.ascontiguousarray(chart._w.c),
        dw_c=np.ascontiguousarray(chart._dw.c),
        s0=float(curve.s[0]),
        hs=float(curve.ds),
        s_samples=curve.s.copy(),
        q_samples=curve.q.copy(),
        alpha_desc=np.asarray(alpha_p.coef[::-1], dtype=float).copy(),
        s_c=np.ascontiguousarray(s_sp.c),
        d_c=np.ascontiguousarray(d_sp.c),
        bp_desc=np.asarray((bp_p - bp_p(0.0)).coef[::-1], dtype=float).copy(),
        x1min=float(chart.xi1_range[0]),
        x1max=float(chart.xi1_range[1]),
        halfwidth=float(chart.halfwidth),
    )
    dp = DesignedPotential(
        xi1=force.xi1.copy(),
        xi2=force.xi2.copy(),
        f=np.asarray(f_grid, dtype=float),
        value_xi=value_xi,
        diff_xi=diff_xi,
        source="profiles",
        kernel_data=kernel_data,
    )
    pot_q = designed_potential_in_q(dp, chart)

    # tangency of the configuration-space gradient along the geodesic
    lo, hi = chart.xi1_range
    mask = (curve.s >= lo) & (curve.s <= hi)
    tangency = 0.0
    for qi, wi in zip(curve.q[mask], curve.w[mask]):
        grad = contravariant_gradient(metric, pot_q, qi)
        _, perp = tangential_normal_split(metric, qi, grad, wi)
        g = metric_eval(metric, qi)
        tangency = max(tangency, math.sqrt(perp @ g @ perp))

    gap_a = integrate_potential(force, "xi1-first")
    gap_b = integrate_potential(force, "xi2-first")
    path_gap = float(np.max(np.abs(gap_a.f - gap_b.f)))

    grid_pts = _chart_image_points(chart, force)
    definiteness = definiteness_check(pot_q, grid_pts, qstar=chart.forward((0.0, 0.0)))

    cert = Certification(
        integrability_residual=residual,
        beta_bound=bound,
        beta_margin=beta_margin,
        definiteness=definiteness,
        tangency_residual=tangency,
        path_gap=path_gap,
    )
    return DesignResult(
        spec=spec,
        on_geodesic=on_geo,
        force_field=force,
        potential_xi=dp,
        potential=pot_q,
        certification=cert,
    )


def _chart_image_points(chart: GeodesicChart, force: GeodesicForceField, stride: int = 5):
    lo, hi = chart.xi1_range
    x1 = force.xi1[(force.xi1 >= lo) & (force.xi1 <= hi)][::stride]
    x2 = force.xi2[::stride]
    pts = []
    gam = chart._gamma(x1)
    e = chart._w(x1) @ ROT90.T
    for v2 in x2:
        pts.append(gam + v2 * e)
    return np.concatenate(pts, axis=0)

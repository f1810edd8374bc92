"""Geodesic shooting, tubular charts around a geodesic, and the speed law.

Geodesics are integrated in their arc-length parameter, so the stored
tangents have unit metric norm and the sample spacing is metric arc length.
The chart h(xi) = gamma(xi1) + xi2 * e_perp(xi1) uses the *coordinate* 90
degree rotation of the curve tangent for e_perp; that vector is generally
not metric-orthogonal to the curve, which is intentional and matches the
force-field construction built on top of it (see design.py).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import ChartDomainError, ConvergenceError, NumericalError
from .manifold import MetricField, christoffel, g_norm, metric_eval

#: coordinate rotation by +90 degrees, used to build e_perp
ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])

UNIT_SPEED_ERROR = 1e-6


def fd4_uniform(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    """Fourth-order first derivative on a uniform grid, one-sided at the ends.

    Used wherever sampled fields are differentiated; at second order the
    truncation error (~h^2/6 f''') of 0.01-spaced samples would dominate
    several of the toolkit's tolerance budgets.
    """
    f = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if f.shape[0] < 5:
        raise ValueError("need at least 5 samples along the differentiated axis")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return np.moveaxis(d, 0, axis)


@dataclass(frozen=True)
class GeodesicCurve:
    """Arc-length sampled geodesic: points q(s) and unit tangents w(s)."""

    s: np.ndarray    # (m,) arc lengths, uniform spacing ds
    q: np.ndarray    # (m, n)
    w: np.ndarray    # (m, n) dq/ds, unit metric norm
    ds: float

    def __len__(self) -> int:
        return len(self.s)

    def reversed(self) -> "GeodesicCurve":
        """Same point set traversed the other way (tangents flipped)."""
        return GeodesicCurve(
            s=(self.s[0] + self.s[-1]) - self.s[::-1],
            q=self.q[::-1].copy(),
            w=-self.w[::-1].copy(),
            ds=self.ds,
        )


def _geodesic_rhs(metric, q, w):
    gamma = christoffel(metric, q)
    return -np.einsum("ijk,j,k->i", gamma, w, w)


def shoot_geodesic(
    metric: MetricField,
    q0,
    v0,
    length: float,
    ds: float = 0.01,
    substeps: int = 4,
) -> GeodesicCurve:
    """Integrate the geodesic initial value problem from (q0, v0).

    ``v0`` is renormalized internally to unit metric norm, so the integration
    parameter is metric arc length and the realized length is
    ``round(length/ds) * ds``.  The unit-speed property is checked at every
    sample; a deviation above 1e-6 aborts the run.
    """
    q0 = np.asarray(q0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if ds <= 0.0:
        raise ValueError("ds must be positive")
    nv = g_norm(metric, q0, v0)
    if nv == 0.0:
        raise ValueError("initial tangent must be nonzero")
    w = v0 / nv
    nsamp = int(round(length / ds))
    if nsamp < 1:
        raise ValueError("length must cover at least one step")

    n = q0.size
    qs = np.empty((nsamp + 1, n))
    ws = np.empty((nsamp + 1, n))
    qs[0], ws[0] = q0, w
    h = ds / substeps
    q = q0.copy()
    for i in range(nsamp):
        for _ in range(substeps):
            a1 = _geodesic_rhs(metric, q, w)
            qb, wb = q + 0.5 * h * w, w + 0.5 * h * a1
            a2 = _geodesic_rhs(metric, qb, wb)
            qc, wc = q + 0.5 * h * wb, w + 0.5 * h * a2
            a3 = _geodesic_rhs(metric, qc, wc)
            qd, wd = q + h * wc, w + h * a3
            a4 = _geodesic_rhs(metric, qd, wd)
            q = q + (h / 6.0) * (w + 2.0 * wb + 2.0 * wc + wd)
            w = w + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        nrm = g_norm(metric, q, w)
        if abs(nrm - 1.0) > UNIT_SPEED_ERROR:
            raise NumericalError(
                f"unit-speed violation {abs(nrm - 1.0):.2e} at s={ds * (i + 1):g}"
            )
        qs[i + 1], ws[i + 1] = q, w
    return GeodesicCurve(s=ds * np.arange(nsamp + 1), q=qs, w=ws, ds=ds)


def shoot_geodesic_two_sided(
    metric: MetricField, q0, v0, length: float, ds: float = 0.01, substeps: int = 4
) -> GeodesicCurve:
    """Shoot in both directions from q0; samples cover s in [-length, length]."""
    fwd = shoot_geodesic(metric, q0, v0, length, ds, substeps)
    bwd = shoot_geodesic(metric, q0, -np.asarray(v0, dtype=float), length, ds, substeps)
    s = np.concatenate([-bwd.s[::-1][:-1], fwd.s])
    q = np.concatenate([bwd.q[::-1][:-1], fwd.q])
    w = np.concatenate([-bwd.w[::-1][:-1], fwd.w])
    return GeodesicCurve(s=s, q=q, w=w, ds=ds)


def geodesic_residuals(metric: MetricField, curve: GeodesicCurve) -> np.ndarray:
    """Metric norm of the autoparallel defect at interior samples.

    Uses fourth-order central differences of the stored tangents, so two
    samples at each end are excluded.
    """
    s, q, w = curve.s, curve.q, curve.w
    m = len(s)
    if m < 5:
        raise ValueError("need at least 5 samples")
    dw = (w[:-4] - 8.0 * w[1:-3] + 8.0 * w[3:-1] - w[4:]) / (12.0 * curve.ds)
    out = np.empty(m - 4)
    for i in range(m - 4):
        k = i + 2
        gamma = christoffel(metric, q[k])
        defect = dw[i] + np.einsum("ijk,j,k->i", gamma, w[k], w[k])
        out[i] = np.sqrt(defect @ metric_eval(metric, q[k]) @ defect)
    return out


# ---------------------------------------------------------------------------
# tubular chart around a geodesic


@dataclass(frozen=True)
class GeodesicChart:
    """Local diffeomorphism h(xi) = gamma(xi1) + xi2 * e_perp(xi1), n = 2.

    ``xi1_range`` is the trimmed interval on which |det J| >= det_floor holds
    for |xi2| <= halfwidth; queries outside raise ChartDomainError.
    """

    curve: GeodesicCurve
    halfwidth: float
    xi1_range: tuple
    det_floor: float
    _gamma: CubicSpline = field(repr=False)
    _w: CubicSpline = field(repr=False)
    _dw: CubicSpline = field(repr=False)
    _tree: cKDTree = field(repr=False, compare=False)

    def forward(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        g = self._gamma(xi[..., 0])
        e = self._w(xi[..., 0]) @ ROT90.T
        return g + xi[..., 1, None] * e

    def jacobian(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        w = self._w(xi[0])
        dw = self._dw(xi[0])
        col1 = w + xi[1] * (ROT90 @ dw)
        col2 = ROT90 @ w
        return np.column_stack([col1, col2])

    def contains(self, xi, slack: float = 1e-9) -> bool:
        return (
            self.xi1_range[0] - slack <= xi[0] <= self.xi1_range[1] + slack
            and abs(xi[1]) <= self.halfwidth + slack
        )


def geodesic_chart(
    geodesic: GeodesicCurve, halfwidth: float, det_floor: float = 0.1
) -> GeodesicChart:
    """Build the tubular chart of a planar geodesic.

    The tangent derivative needed for the Jacobian is obtained by central
    differences of the stored tangent samples; the admissible xi1 interval is
    trimmed to where |det J| stays above ``det_floor`` across the full
    transverse extent.
    """
    if geodesic.q.shape[1] != 2:
        raise ValueError("charts are only defined for 2-dimensional curves")
    if halfwidth <= 0.0:
        raise ValueError("halfwidth must be positive")
    s, q, w = geodesic.s, geodesic.q, geodesic.w
    dw = fd4_uniform(w, geodesic.ds)

    gamma_sp = CubicSpline(s, q, axis=0)
    w_sp = CubicSpline(s, w, axis=0)
    dw_sp = CubicSpline(s, dw, axis=0)

    # det J = det[w + xi2 R dw, R w]; scan transverse levels for the trim
    levels = np.array([-1.0, -0.5, 0.0, 0.5, 1.0]) * halfwidth
    e = w @ ROT90.T
    de = dw @ ROT90.T
    ok = np.ones(len(s), dtype=bool)
    for lv in levels:
        c1 = w + lv * de
        det = c1[:, 0] * e[:, 1] - c1[:, 1] * e[:, 0]
        ok &= np.abs(det) >= det_floor
    if not np.any(ok):
        raise NumericalError("chart Jacobian degenerate on the requested domain")

    # largest admissible contiguous interval containing s = 0 when possible
    anchor = int(np.argmin(np.abs(s)))
    if not ok[anchor]:
        runs = np.flatnonzero(ok)
        anchor = int(runs[np.argmin(np.abs(s[runs]))])
    lo = anchor
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = anchor
    while hi < len(s) - 1 and ok[hi + 1]:
        hi += 1
    return GeodesicChart(
        curve=geodesic,
        halfwidth=float(halfwidth),
        xi1_range=(float(s[lo]), float(s[hi])),
        det_floor=det_floor,
        _gamma=gamma_sp,
        _w=w_sp,
        _dw=dw_sp,
        _tree=cKDTree(q),
    )


def chart_inverse(
    chart: GeodesicChart, qpoint, tol: float = 1e-10, maxiter: int = 50
) -> tuple:
    """Invert the chart map by Newton iteration seeded from the nearest sample."""
    qpoint = np.asarray(qpoint, dtype=float)
    _, idx = chart._tree.query(qpoint)
    xi = np.array([chart.curve.s[int(idx)], 0.0])
    for _ in range(maxiter):
        r = chart.forward(xi) - qpoint
        if np.hypot(r[0], r[1]) <= tol:
            if not chart.contains(xi):
                raise ChartDomainError(f"point {qpoint!r} outside chart domain")
            return float(xi[0]), float(xi[1])
        J = chart.jacobian(xi)
        try:
            xi = xi - np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular chart Jacobian during inversion") from None
    raise ConvergenceError(
        f"chart inversion did not reach {tol:g} within {maxiter} iterations"
    )


def chart_inverse_batch(
    chart: GeodesicChart, qpoints, tol: float = 1e-10, maxiter: int = 50
) -> np.ndarray:
    """Vectorized chart inversion for an (m, 2) block of points."""
    qpoints = np.asarray(qpoints, dtype=float)
    _, idx = chart._tree.query(qpoints)
    xi1 = chart.curve.s[idx].astype(float)
    xi2 = np.zeros(len(qpoints))
    active = np.ones(len(qpoints), dtype=bool)
    for _ in range(maxiter):
        if not np.any(active):
            break
        x1, x2 = xi1[active], xi2[active]
        g = chart._gamma(x1)
        w = chart._w(x1)
        e = w @ ROT90.T
        r = g + x2[:, None] * e - qpoints[active]
        done = np.einsum("ij,ij->i", r, r) <= tol * tol
        dw = chart._dw(x1)
        de = dw @ ROT90.T
        j11 = w[:, 0] + x2 * de[:, 0]
        j21 = w[:, 1] + x2 * de[:, 1]
        j12, j22 = e[:, 0], e[:, 1]
        det = j11 * j22 - j12 * j21
        dx1 = (j22 * r[:, 0] - j12 * r[:, 1]) / det
        dx2 = (-j21 * r[:, 0] + j11 * r[:, 1]) / det
        dx1[done] = 0.0
        dx2[done] = 0.0
        x1 -= dx1
        x2 -= dx2
        xi1[active], xi2[active] = x1, x2
        rem = np.flatnonzero(active)
        active[rem[done]] = False
    if np.any(active):
        raise ConvergenceError(f"{int(active.sum())} chart inversions did not converge")
    out = np.column_stack([xi1, xi2])
    bad = (
        (xi1 < chart.xi1_range[0] - 1e-9)
        | (xi1 > chart.xi1_range[1] + 1e-9)
        | (np.abs(xi2) > chart.halfwidth + 1e-9)
    )
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ChartDomainError(f"point {qpoints[k]!r} outside chart domain")
    return out


def chart_grid(chart: GeodesicChart, resolution: float = 0.1):
    """Regular (xi1, xi2) grid and its image points, for export and plots."""
    lo, hi = chart.xi1_range
    n1 = max(int(np.floor((hi - lo) / resolution)) + 1, 2)
    n2 = max(int(np.floor(2.0 * chart.halfwidth / resolution)) + 1, 2)
    xi1 = lo + resolution * np.arange(n1)
    xi2 = -chart.halfwidth + resolution * np.arange(n2)
    pts = np.empty((n1, n2, 2))
    gam = chart._gamma(xi1)
    e = chart._w(xi1) @ ROT90.T
    for j, x2 in enumerate(xi2):
        pts[:, j, :] = gam + x2 * e
    return xi1, xi2, pts


# ---------------------------------------------------------------------------
# speed law along a geodesic mode


@dataclass(frozen=True)
class SpeedLaw:
    """Solution of beta dbeta = alpha ds:  1/2 beta^2 = int_0^s alpha - c.

    ``c`` is the integration constant, fixed by the initial energy via
    c = -E so that beta(0) = sqrt(2 E).  Outside the classically allowed
    region (negative radicand) ``beta`` returns NaN.
    """

    alpha: Callable = field(repr=False)
    c: float
    s_grid: np.ndarray = field(repr=False)
    _integral: CubicSpline = field(repr=False)

    def integral(self, s):
        """int_0^s alpha(sigma) dsigma."""
        return self._integral(s)

    def radicand(self, s):
        return 2.0 * (self._integral(s) - self.c)

    def beta(self, s):
        r = self.radicand(s)
        with np.errstate(invalid="ignore"):
            return np.where(r >= 0.0, np.sqrt(np.maximum(r, 0.0)), np.nan)

    def turning_points(self) -> np.ndarray:
        """Arc-length positions where the radicand vanishes, within the grid."""
        s = self.s_grid
        r = self.radicand(s)
        roots = []
        for i in range(len(s) - 1):
            if r[i] == 0.0:
                roots.append(float(s[i]))
            elif r[i] * r[i + 1] < 0.0:
                roots.append(float(brentq(lambda x: self.radicand(x), s[i], s[i + 1])))
        if r[-1] == 0.0:
            roots.append(float(s[-1]))
        return np.array(sorted(roots))


def speed_law_solve(alpha, energy: float, s_range: tuple, num: int = 4001) -> SpeedLaw:
    """Integrate the along-geodesic speed law for tangential gradient ``alpha``.

    ``alpha`` maps arc length to the tangential gradient magnitude; ``energy``
    fixes the integration constant c = -E.  The quadrature grid spans
    ``s_range`` (which must contain 0) with ``num`` points.
    """
    a, b = float(s_range[0]), float(s_range[1])
    if not (a <= 0.0 <= b):
        raise ValueError("s_range must contain 0, the anchor of the integral")
    if energy < 0.0:
        raise ValueError(f"negative radicand at s=0: E={energy:g} is inconsistent")
    grid = np.linspace(a, b, num)
    i0 = int(np.argmin(np.abs(grid)))
    grid = grid - grid[i0]  # put one node exactly at s = 0

    try:
        vals = np.asarray(alpha(grid), dtype=float)
        if vals.shape != grid.shape:
            raise TypeError
    except TypeError:
        vals = np.array([float(alpha(x)) for x in grid])

    integral = np.empty_like(grid)
    integral[i0:] = cumulative_simpson(vals[i0:], x=grid[i0:], initial=0.0)
    if i0 > 0:
        left = cumulative_simpson(vals[i0::-1], x=-grid[i0::-1], initial=0.0)
        integral[:i0] = -left[::-1][:-1]
    spline = CubicSpline(grid, integral)
    return SpeedLaw(alpha=alpha, c=-float(energy), s_grid=grid, _integral=spline)

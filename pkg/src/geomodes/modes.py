"""Linearized eigenmodes, numerical mode detection, and strict-mode checks.

A strict mode is a configuration-space curve that the dynamics never leaves,
whatever the initial speed along it.  The two verified conditions are
(a) the curve is a geodesic (vanishing autoparallel defect) and (b) the
potential gradient is everywhere tangent to it.  Candidate modes are found
numerically: zero-velocity starts on an equipotential line, optimized over
the start angle for periodicity of the resulting trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.fft import next_fast_len, rfft, irfft
from scipy.interpolate import CubicSpline
from scipy.integrate import cumulative_simpson
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .dynamics import PotentialField, State, Trajectory, integrate, zero_potential
from .errors import ConvergenceError
from .manifold import (
    MetricField,
    christoffel,
    contravariant_gradient,
    metric_eval,
    tangential_normal_split,
)

EQUILIBRIUM_TOL = 1e-9
LEVELSET_TOL = 1e-10


# ---------------------------------------------------------------------------
# linearization


@dataclass(frozen=True)
class LinearMode:
    """Eigenmode of the linearization: direction (g-normalized) and frequency."""

    direction: np.ndarray
    omega: float

    @property
    def angle(self) -> float:
        """Direction angle in the coordinate plane (n = 2)."""
        return math.atan2(self.direction[1], self.direction[0])


def linearized_modes(metric: MetricField, potential: PotentialField, qstar, h: float = 1e-6):
    """Solve -H v = omega^2 g(qstar) v for the modes of the linearization.

    ``qstar`` must be an equilibrium (vanishing differential) with negative
    definite potential Hessian H; H is built from central differences of the
    differential.  Modes are returned sorted by frequency, eigenvectors
    normalized in the metric at the equilibrium.
    """
    qstar = np.asarray(qstar, dtype=float)
    df0 = potential.differential_at(qstar)
    if np.linalg.norm(df0) > EQUILIBRIUM_TOL:
        raise ValueError(f"not an equilibrium: |df| = {np.linalg.norm(df0):.3e}")
    n = qstar.size
    hess = np.empty((n, n))
    for j in range(n):
        dq = np.zeros(n)
        dq[j] = h
        hess[:, j] = (
            potential.differential_at(qstar + dq) - potential.differential_at(qstar - dq)
        ) / (2.0 * h)
    hess = 0.5 * (hess + hess.T)
    if np.any(np.linalg.eigvalsh(hess) >= 0.0):
        raise ValueError("potential Hessian is not negative definite at the equilibrium")
    g = metric_eval(metric, qstar)
    w2, vecs = scipy.linalg.eigh(-hess, g)
    modes = []
    for i in range(n):
        v = vecs[:, i]
        if v[int(np.argmax(np.abs(v)))] < 0.0:
            v = -v
        modes.append(LinearMode(direction=v, omega=float(np.sqrt(w2[i]))))
    return modes


# ---------------------------------------------------------------------------
# equipotential starts and periodicity


def equipotential_point(
    potential: PotentialField, energy: float, theta: float, qstar=None, r_max: float = 50.0
) -> np.ndarray:
    """Point on the level set f = -energy along the ray at angle ``theta``.

    Radial bracketing plus Brent root finding from the equilibrium; the
    returned point satisfies |f + energy| <= 1e-10.
    """
    if energy <= 0.0:
        raise ValueError("energy must be positive")
    qstar = np.zeros(2) if qstar is None else np.asarray(qstar, dtype=float)
    u = np.array([math.cos(theta), math.sin(theta)])

    def phi(r):
        return potential.value_at(qstar + r * u) + energy

    # gentle bracket growth: chart-backed potentials are only defined on a
    # strip, so a large overshoot past the root must be avoided
    r_lo, r_hi = 0.0, 1e-2
    while phi(r_hi) > 0.0:
        r_lo = r_hi
        r_hi *= 1.3
        if r_hi > r_max:
            raise ConvergenceError(
                f"level set f = {-energy:g} not reached within radius {r_max:g}"
            )
    r = brentq(phi, r_lo, r_hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    q = qstar + r * u
    if abs(potential.value_at(q) + energy) > LEVELSET_TOL:
        raise ConvergenceError("equipotential root finding left a residual above 1e-10")
    return q


def periodicity_measure(traj: Trajectory, lag_window=(0.1, 0.9)) -> float:
    """Normalized autocorrelation score of the state sequence, in [0, 1].

    The mean-removed (q, qdot) sequence is correlated against itself over all
    lags in ``lag_window`` (fractions of the run length); 1 means perfectly
    periodic.  The score only ranks candidates, absolute values carry no
    further meaning.
    """
    x = np.hstack([traj.q, traj.qdot])
    m = len(x)
    if m < 1000:
        raise ValueError("periodicity measure needs at least 1000 samples")
    y = x - x.mean(axis=0)
    norms = np.einsum("ij,ij->i", y, y)
    total = float(norms.sum())
    if total <= 0.0:
        raise ValueError("degenerate (constant) trajectory")

    nfft = next_fast_len(2 * m)
    spec = rfft(y, n=nfft, axis=0)
    r = irfft((spec * spec.conj()).real.sum(axis=1), n=nfft)[:m]

    cum = np.cumsum(norms)
    k = np.arange(m)
    n1 = cum[m - 1 - k]
    n2 = cum[-1] - np.concatenate([[0.0], cum[:-1]])
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = r / np.sqrt(n1 * n2)
    k_lo = max(int(math.ceil(lag_window[0] * m)), 1)
    k_hi = min(int(math.floor(lag_window[1] * m)), m - 1)
    if k_hi <= k_lo:
        raise ValueError("trajectory too short for the lag window")
    return float(np.clip(np.max(rho[k_lo : k_hi + 1]), 0.0, 1.0))


# ---------------------------------------------------------------------------
# period detection


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    std: float
    crossings: np.ndarray = field(repr=False)


def _rising_crossings(traj: Trajectory, coord: int) -> np.ndarray:
    v = traj.qdot[:, coord]
    t = traj.t
    idx = np.flatnonzero((v[:-1] < 0.0) & (v[1:] >= 0.0))
    return t[idx] - v[idx] * (t[idx + 1] - t[idx]) / (v[idx + 1] - v[idx])


def detect_period(traj: Trajectory, coord: int | None = None) -> PeriodEstimate:
    """Oscillation period from same-sign velocity zero crossings.

    Crossing times are refined by linear interpolation; the spread of the
    spacings is reported as the confidence.  When ``coord`` is not given, the
    coordinate with the most regular crossing pattern wins; a velocity with
    extra interior zeros (energy-dependent modes develop them) produces
    alternating spacings and is voted out by its spread.
    """
    if coord is not None:
        tc = _rising_crossings(traj, coord)
        if len(tc) < 3:
            raise ValueError(
                f"need at least 3 same-sign zero crossings of qdot[{coord}], found {len(tc)}"
            )
    else:
        best = None
        for c in range(traj.q.shape[1]):
            times = _rising_crossings(traj, c)
            if len(times) < 3:
                continue
            gaps = np.diff(times)
            spread = np.std(gaps) / np.mean(gaps)
            if best is None or spread < best[0]:
                best = (spread, times)
        if best is None:
            raise ValueError("need at least 3 same-sign velocity zero crossings")
        tc = best[1]
    gaps = np.diff(tc)
    return PeriodEstimate(period=float(np.mean(gaps)), std=float(np.std(gaps)), crossings=tc)


def velocity_crossings(traj: Trajectory, coord: int) -> np.ndarray:
    """All zero-crossing times of one coordinate's velocity, interpolated."""
    v = traj.qdot[:, coord]
    t = traj.t
    idx = np.flatnonzero(v[:-1] * v[1:] < 0.0)
    tc = t[idx] - v[idx] * (t[idx + 1] - t[idx]) / (v[idx + 1] - v[idx])
    exact = t[1:-1][v[1:-1] == 0.0]
    return np.sort(np.concatenate([tc, exact]))


@dataclass(frozen=True)
class TurningPoint:
    """Refined zero-velocity event of a conservative oscillation."""

    t: float
    q: np.ndarray
    kinetic: float
    potential_value: float


def turning_points(metric: MetricField, potential: PotentialField, traj: Trajectory):
    """Locate the kinetic-energy minima of a trajectory to sub-step accuracy.

    A parabola through the three samples around each interior minimum gives
    the event time; the configuration there comes from quadratic
    interpolation of the samples.  At a turning point of a mode the potential
    equals minus the total energy.
    """
    from .dynamics import kinetic_energies

    ke = kinetic_energies(metric, traj)
    out = []
    for i in range(1, len(ke) - 1):
        if not (ke[i] < ke[i - 1] and ke[i] <= ke[i + 1]):
            continue
        denom = ke[i - 1] - 2.0 * ke[i] + ke[i + 1]
        if denom <= 0.0:
            continue
        tau = 0.5 * (ke[i - 1] - ke[i + 1]) / denom
        tau = float(np.clip(tau, -1.0, 1.0))
        ke0 = ke[i] - 0.125 * (ke[i - 1] - ke[i + 1]) ** 2 / denom
        q0 = (
            traj.q[i]
            + 0.5 * tau * (traj.q[i + 1] - traj.q[i - 1])
            + 0.5 * tau * tau * (traj.q[i + 1] - 2.0 * traj.q[i] + traj.q[i - 1])
        )
        out.append(
            TurningPoint(
                t=float(traj.t[i] + tau * traj.dt),
                q=q0,
                kinetic=float(max(ke0, 0.0)),
                potential_value=potential.value_at(q0),
            )
        )
    return out


# ---------------------------------------------------------------------------
# curve resampling and distances


def resample_uniform_arclength(metric: MetricField, points, n_samples: int = 400):
    """Fit an ordered point set and resample it uniformly in metric arc length.

    Returns (s, q) with s the metric arc length (anchored at 0) and q the
    resampled points.  Consecutive duplicates are merged first; fewer than 5
    distinct points is an error.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("curve must be an (m, n) array of points")
    # thin to a minimum chord gap: trajectories bunch points quadratically
    # at zero-velocity ends, where sub-resolution jitter would dominate the
    # fitted derivatives
    total = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    min_gap = max(total / (2.0 * max(n_samples, 2)), 1e-12)
    keep = [0]
    for i in range(1, len(pts) - 1):
        if np.linalg.norm(pts[i] - pts[keep[-1]]) >= min_gap:
            keep.append(i)
    if np.linalg.norm(pts[-1] - pts[keep[-1]]) >= 1e-12:
        keep.append(len(pts) - 1)
    pts = pts[keep]
    if len(pts) < 5:
        raise ValueError("curve too short: need at least 5 distinct points")

    chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    u = np.concatenate([[0.0], np.cumsum(chord)])
    sp = CubicSpline(u, pts, axis=0)

    # metric arc length on a fine parameter grid
    uf = np.linspace(0.0, u[-1], 4 * len(pts))
    der = sp(uf, 1)
    if metric.matrix_batch is not None:
        gs = metric.matrix_batch(sp(uf))
        speed = np.sqrt(np.einsum("ti,tij,tj->t", der, gs, der))
    else:
        speed = np.sqrt(
            np.array([d @ metric_eval(metric, p) @ d for p, d in zip(sp(uf), der)])
        )
    s_of_u = cumulative_simpson(speed, x=uf, initial=0.0)
    s_sp = CubicSpline(uf, s_of_u)
    sd_sp = s_sp.derivative()

    s_new = np.linspace(0.0, s_of_u[-1], n_samples)
    u_new = np.interp(s_new, s_of_u, uf)
    for _ in range(4):  # Newton polish of the monotone inversion
        u_new = np.clip(u_new - (s_sp(u_new) - s_new) / sd_sp(u_new), 0.0, u[-1])
    return s_new, sp(u_new)


def curve_g_distance(metric: MetricField, curve_points, tangents, query_points) -> np.ndarray:
    """Transverse metric distance of query points to a densely sampled curve.

    Nearest-sample search, then the tangential component is projected out in
    the metric at the matched sample.  Adequate for offsets small against the
    curve's curvature radius.
    """
    cp = np.asarray(curve_points, dtype=float)
    tg = np.asarray(tangents, dtype=float)
    qp = np.atleast_2d(np.asarray(query_points, dtype=float))
    tree = cKDTree(cp)
    _, idx = tree.query(qp)
    out = np.empty(len(qp))
    for k, (p, i) in enumerate(zip(qp, idx)):
        g = metric_eval(metric, cp[i])
        delta = p - cp[i]
        t = tg[i]
        tn2 = float(t @ g @ t)
        full = float(delta @ g @ delta)
        tang = float(delta @ g @ t) ** 2 / tn2 if tn2 > 0 else 0.0
        out[k] = math.sqrt(max(full - tang, 0.0))
    return out


# ---------------------------------------------------------------------------
# strict-mode verification


@dataclass(frozen=True)
class StrictModeReport:
    """Per-sample residuals of the two strict-mode conditions on a curve.

    ``geodesic_residual`` is the metric norm of the autoparallel defect of
    the unit tangent field; ``tangency_residual`` the metric norm of the
    gradient component normal to the curve.  Entries are NaN where the
    finite-difference stencils do not reach.
    """

    s: np.ndarray
    geodesic_residual: np.ndarray
    tangency_residual: np.ndarray
    max_geodesic_residual: float
    max_tangency_residual: float
    tol: float

    @property
    def strict(self) -> bool:
        return (
            self.max_geodesic_residual <= self.tol
            and self.max_tangency_residual <= self.tol
        )


def _fd4(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative on a uniform grid; NaN on two end rows."""
    out = np.full_like(values, np.nan)
    out[2:-2] = (values[:-4] - 8.0 * values[1:-3] + 8.0 * values[3:-1] - values[4:]) / (
        12.0 * h
    )
    return out


def verify_strict_mode(
    metric: MetricField,
    potential: PotentialField,
    curve,
    tol: float = 1e-4,
    n_resample: int | None = None,
) -> StrictModeReport:
    """Check both strict-mode conditions on an ordered curve point set.

    The curve is resampled to uniform metric arc length; tangents and their
    derivatives come from fourth-order central differences.  ``n_resample``
    defaults to half the number of distinct input points (clamped to
    [64, 400]): finer resampling would differentiate the interpolation
    wiggle between input samples instead of the curve shape.  The verdict is
    strict iff both residual maxima stay at or below ``tol``.
    """
    if n_resample is None:
        n_resample = int(np.clip(len(np.asarray(curve)) // 2, 64, 400))
    s, q = resample_uniform_arclength(metric, curve, n_resample)
    ds = s[1] - s[0]
    w = _fd4(q, ds)
    dw = _fd4(np.nan_to_num(w, nan=0.0), ds)
    dw[:4] = np.nan
    dw[-4:] = np.nan

    m = len(s)
    geo = np.full(m, np.nan)
    tan = np.full(m, np.nan)
    for i in range(2, m - 2):
        gi = metric_eval(metric, q[i])
        wi = w[i]
        grad = contravariant_gradient(metric, potential, q[i])
        _, grad_perp = tangential_normal_split(metric, q[i], grad, wi)
        tan[i] = math.sqrt(grad_perp @ gi @ grad_perp)
        if 4 <= i < m - 4:
            gamma = christoffel(metric, q[i])
            defect = dw[i] + np.einsum("ijk,j,k->i", gamma, wi, wi)
            geo[i] = math.sqrt(defect @ gi @ defect)
    return StrictModeReport(
        s=s,
        geodesic_residual=geo,
        tangency_residual=tan,
        max_geodesic_residual=float(np.nanmax(geo)),
        max_tangency_residual=float(np.nanmax(tan)),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# velocity-scaling probe


@dataclass(frozen=True)
class ScalingProbe:
    """Outcome of the velocity-scaling necessity probe on a curve.

    ``ratios[k]`` is the median ratio of the normal covariant acceleration at
    scale ``scales[k]`` to the unscaled one (the quadratic law predicts
    scales[k]**2); NaN when the unscaled normal acceleration is below the
    flag threshold everywhere (geodesic case).  ``deviations[k]`` is the max
    transverse metric distance of the scaled-velocity trajectory from the
    curve.
    """

    scales: np.ndarray
    ratios: np.ndarray
    deviations: np.ndarray
    reference_norm: float
    n_flagged: int


def scaling_invariance_test(
    metric: MetricField,
    potential: PotentialField | None,
    curve,
    scales,
    horizon: float = 3.0,
    dt: float = 1e-3,
    n_resample: int = 200,
    ref_threshold: float = 1e-7,
    energy_tol: float = 1e-6,
    simulate: bool = True,
) -> ScalingProbe:
    """Probe how the normal covariant acceleration responds to speed scaling.

    For each scale c the acceleration of the motion tracing the curve with
    velocity c * w is evaluated at fixed curve points and its normal part is
    compared to the unscaled one; additionally a trajectory is started from
    the mid-curve point with velocity c * w and its departure from the curve
    is measured.  ``potential`` None means free motion.
    """
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0.0):
        raise ValueError("scales must be positive")
    s, q = resample_uniform_arclength(metric, curve, n_resample)
    ds = s[1] - s[0]
    w = _fd4(q, ds)
    d2q = _fd4(np.nan_to_num(w, nan=0.0), ds)
    valid = slice(4, len(s) - 4)

    pot = potential if potential is not None else zero_potential(q.shape[1])

    idxs = range(*valid.indices(len(s)))
    gammas = [christoffel(metric, q[i]) for i in idxs]
    gs = [metric_eval(metric, q[i]) for i in idxs]

    def normal_accel(c):
        out = np.empty(len(gammas))
        for k, i in enumerate(idxs):
            vel = c * w[i]
            acc = c * c * d2q[i]
            cov = acc + np.einsum("ijk,j,k->i", gammas[k], vel, vel)
            _, perp = tangential_normal_split(metric, q[i], cov, w[i])
            out[k] = math.sqrt(perp @ gs[k] @ perp)
        return out

    ref = normal_accel(1.0)
    usable = ref >= ref_threshold
    n_flagged = int(np.size(ref) - np.count_nonzero(usable))

    ratios = np.full(len(scales), np.nan)
    deviations = np.full(len(scales), np.nan)
    mid = len(s) // 2
    wmid = w[mid]
    g_mid = metric_eval(metric, q[mid])
    wmid = wmid / math.sqrt(wmid @ g_mid @ wmid)
    for k, c in enumerate(scales):
        if np.any(usable):
            ratios[k] = float(np.median(normal_accel(c)[usable] / ref[usable]))
        if simulate:
            traj = integrate(
                metric,
                pot,
                State(q=q[mid], qdot=c * wmid),
                horizon,
                dt,
                energy_tol=energy_tol,
            )
            deviations[k] = float(
                np.max(curve_g_distance(metric, q, np.nan_to_num(w, nan=0.0), traj.q))
            )
    return ScalingProbe(
        scales=scales,
        ratios=ratios,
        deviations=deviations,
        reference_norm=float(np.median(ref)),
        n_flagged=n_flagged,
    )


# ---------------------------------------------------------------------------
# mode search


@dataclass(frozen=True)
class ModeCandidate:
    """Detected mode: zero-velocity start on the equipotential line plus the
    traced configuration-space curve over one sweep."""

    energy: float
    theta: float
    start: np.ndarray
    trajectory: Trajectory = field(repr=False)
    curve: np.ndarray = field(repr=False)
    periodicity: float
    period: float


def _golden_section_max(fun, a: float, b: float, tol: float):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = (3.0 - math.sqrt(5.0)) / 2.0
    h = b - a
    c = a + invphi2 * h
    d = a + invphi * h
    fc = fun(c)
    fd = fun(d)
    while h > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + invphi2 * h
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + invphi * h
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def find_mode(
    metric: MetricField,
    potential: PotentialField,
    energy: float,
    theta0: float,
    qstar=None,
    bracket: float = 0.4,
    horizon: float = 50.0,
    dt: float = 1e-3,
    angle_tol: float = 1e-4,
    energy_tol: float = 1e-6,
    min_periodicity: float = 0.5,
    prescan: int = 33,
    prefer_nearest: bool = False,
) -> ModeCandidate:
    """Locate a nonlinear mode near the seed angle ``theta0``.

    Maximizes the periodicity of the trajectory started at rest from the
    equipotential point at angle theta.  The objective develops secondary
    recurrence lobes away from the mode, so a coarse scan of ``prescan``
    angles brackets a peak first and golden-section search then refines
    inside it.  ``prefer_nearest`` picks the scanned local maximum closest
    to the seed instead of the globally best one; continuation across energy
    levels uses this to stay on one solution branch.  Raises
    ConvergenceError when nothing in the bracket reaches ``min_periodicity``.
    """
    qstar = np.zeros(2) if qstar is None else np.asarray(qstar, dtype=float)
    n = qstar.size
    cache: dict[float, tuple] = {}

    def objective(theta):
        start = equipotential_point(potential, energy, theta, qstar=qstar)
        traj = integrate(
            metric, potential, State(q=start, qdot=np.zeros(n)), horizon, dt, energy_tol
        )
        p = periodicity_measure(traj)
        cache[theta] = (p, start, traj)
        return p

    grid = np.linspace(theta0 - bracket, theta0 + bracket, max(int(prescan), 3))
    scores = np.array([objective(float(th)) for th in grid])
    if prefer_nearest:
        pad = np.concatenate([[-np.inf], scores, [-np.inf]])
        is_peak = (scores >= pad[:-2]) & (scores >= pad[2:]) & (scores > min_periodicity)
        peaks = np.flatnonzero(is_peak)
        k = int(peaks[np.argmin(np.abs(grid[peaks] - theta0))]) if len(peaks) else int(np.argmax(scores))
    else:
        k = int(np.argmax(scores))
    lo = float(grid[max(k - 1, 0)])
    hi = float(grid[min(k + 1, len(grid) - 1)])
    _golden_section_max(objective, lo, hi, angle_tol)
    if prefer_nearest:
        in_window = {th: v for th, v in cache.items() if lo <= th <= hi}
        best_theta = max(in_window, key=lambda th: in_window[th][0])
    else:
        best_theta = max(cache, key=lambda th: cache[th][0])
    periodicity, start, traj = cache[best_theta]
    if periodicity <= min_periodicity:
        raise ConvergenceError(
            f"no periodic mode above score {min_periodicity:g} in the bracket "
            f"[{theta0 - bracket:g}, {theta0 + bracket:g}]"
        )
    est = detect_period(traj)
    # the mode curve is one sweep across configuration space: from the rest
    # start to the next full stop (first deep kinetic-energy minimum)
    t_end = traj.t[0] + 0.5 * est.period
    for tp in turning_points(metric, potential, traj):
        if tp.kinetic < 0.1 * energy:
            t_end = tp.t
            break
    sweep = traj.q[traj.t <= t_end + dt]
    return ModeCandidate(
        energy=float(energy),
        theta=float(best_theta),
        start=start,
        trajectory=traj,
        curve=sweep,
        periodicity=float(periodicity),
        period=float(est.period),
    )


def continue_mode_family(
    metric: MetricField,
    potential: PotentialField,
    energies,
    theta0: float,
    bracket: float = 0.4,
    step_bracket: float = 0.15,
    **find_kwargs,
) -> list:
    """Track one mode family across increasing energies.

    The first energy is searched in the full ``bracket`` around the seed;
    every following level reuses the previous optimum with the narrower
    ``step_bracket``, which keeps the search on the same solution branch
    (the periodicity landscape grows competing peaks at high energy).
    """
    energies = sorted(float(e) for e in energies)
    out = []
    theta = float(theta0)
    width = bracket
    nearest = False
    for e in energies:
        cand = find_mode(
            metric, potential, e, theta, bracket=width, prefer_nearest=nearest, **find_kwargs
        )
        out.append(cand)
        theta = cand.theta
        width = step_bracket
        nearest = True
    return out

"""Metric tensors, Christoffel symbols, and metric-orthogonal projections.

Everything here works in a single coordinate chart: configuration points are
plain float arrays of length n, tangent vectors are contravariant component
arrays of the same length.  The metric assigns each point a symmetric
positive-definite matrix g_ij; the Levi-Civita connection derived from it is
the unique torsion-free metric-compatible one, so the Christoffel symbols
follow the standard coordinate formula from g and its first partials.

All projections and norms use the metric inner product, never the coordinate
dot product.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import MetricError

#: central-difference step for metric and potential partials
FD_STEP = 1e-6

#: required symmetry of evaluated metric matrices
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class MetricField:
    """Point-dependent inertia tensor g.

    ``matrix(q)`` returns the (n, n) component matrix at ``q``.
    ``partials(q)`` returns the (n, n, n) array P[i, j, k] = dg_ij/dq^k; when
    omitted it is produced by central finite differences of ``matrix`` with
    step ``FD_STEP``.  ``matrix_batch`` optionally evaluates a whole (m, n)
    block of points at once and is only used to speed up bookkeeping.
    ``kernel`` is an opaque token consumed by the fast integration path.
    """

    matrix: Callable[[np.ndarray], np.ndarray]
    partials: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    matrix_batch: Callable[[np.ndarray], np.ndarray] | None = None
    kernel: tuple | None = None

    def without_partials(self) -> "MetricField":
        """Copy of this field that forces finite-difference partials."""
        return replace(self, partials=None)

    @staticmethod
    def constant(matrix: np.ndarray, name: str = "constant") -> "MetricField":
        m = np.array(matrix, dtype=float)
        n = m.shape[0]
        zeros = np.zeros((n, n, n))
        return MetricField(
            matrix=lambda q: m,
            partials=lambda q: zeros,
            name=name,
            matrix_batch=lambda qs: np.broadcast_to(m, (len(qs), n, n)),
        )


def euclidean_metric(n: int = 2) -> MetricField:
    """Identity metric in n coordinates."""
    return MetricField.constant(np.eye(n), name="euclidean")


def metric_eval(metric: MetricField, q) -> np.ndarray:
    """Evaluate and validate the metric matrix at a point.

    Raises MetricError when the point is non-finite, the matrix is not
    symmetric to ``SYMMETRY_TOL``, or a Cholesky factorization fails
    (not positive definite).
    """
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise MetricError(f"non-finite configuration point {q!r}")
    g = np.asarray(metric.matrix(q), dtype=float)
    n = q.size
    if g.shape != (n, n):
        raise MetricError(f"metric at {q!r} has shape {g.shape}, expected {(n, n)}")
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL:
        raise MetricError(f"metric not symmetric at {q!r}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise MetricError(f"invalid metric at point {q!r}: not positive definite") from None
    return g


def metric_partials(metric: MetricField, q) -> np.ndarray:
    """P[i, j, k] = dg_ij/dq^k, analytic if supplied, else central differences."""
    q = np.asarray(q, dtype=float)
    if metric.partials is not None:
        return np.asarray(metric.partials(q), dtype=float)
    n = q.size
    out = np.empty((n, n, n))
    for k in range(n):
        dq = np.zeros(n)
        dq[k] = FD_STEP
        gp = np.asarray(metric.matrix(q + dq), dtype=float)
        gm = np.asarray(metric.matrix(q - dq), dtype=float)
        out[:, :, k] = (gp - gm) / (2.0 * FD_STEP)
    return out


def inner_product(metric: MetricField, q, u, v) -> float:
    """Metric inner product <u, v> at q."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    g = metric_eval(metric, q)
    if u.shape != v.shape or u.size != g.shape[0]:
        raise ValueError(f"dimension mismatch: u{u.shape}, v{v.shape}, g{g.shape}")
    return float(u @ g @ v)


def g_norm(metric: MetricField, q, v) -> float:
    """Metric norm of a tangent vector."""
    return float(np.sqrt(inner_product(metric, q, v, v)))


def christoffel(metric: MetricField, q) -> np.ndarray:
    """Christoffel symbols of the Levi-Civita connection at a point.

    Returns the (n, n, n) array G[i, j, k] = Gamma^i_jk, symmetric in (j, k),
    computed as 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk).
    """
    g = metric_eval(metric, q)
    p = metric_partials(metric, q)
    n = g.shape[0]
    # lower[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    lower = 0.5 * (np.transpose(p, (0, 2, 1)) + p - np.transpose(p, (2, 0, 1)))
    try:
        gamma = np.linalg.solve(g, lower.reshape(n, n * n)).reshape(n, n, n)
    except np.linalg.LinAlgError:
        raise MetricError(f"singular metric at {np.asarray(q)!r}") from None
    return gamma


def covariant_acceleration(metric: MetricField, q, v, a) -> np.ndarray:
    """Covariant acceleration a^i + Gamma^i_jk v^j v^k.

    ``a`` is the coordinate second derivative of the motion, ``v`` its
    coordinate velocity.  For a geodesic flow the result vanishes.
    """
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    if v.shape != a.shape:
        raise ValueError("velocity and acceleration dimensions differ")
    gamma = christoffel(metric, q)
    return a + np.einsum("ijk,j,k->i", gamma, v, v)


def contravariant_gradient(metric: MetricField, potential, q) -> np.ndarray:
    """Raise the differential of a potential: (grad f)^i = g^ij df_j."""
    g = metric_eval(metric, q)
    df = np.asarray(potential.differential_at(q), dtype=float)
    try:
        return np.linalg.solve(g, df)
    except np.linalg.LinAlgError:
        raise MetricError(f"singular metric at {np.asarray(q)!r}") from None


def tangential_normal_split(metric: MetricField, q, x, tangent):
    """Split x into components parallel and g-orthogonal to ``tangent``.

    Returns (x_par, x_perp) with x = x_par + x_perp, x_par along ``tangent``
    and <x_perp, tangent> = 0 in the metric at q.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(tangent, dtype=float)
    g = metric_eval(metric, q)
    gt = g @ t
    tt = float(t @ gt)
    if tt <= 0.0:
        raise ValueError("zero tangent vector in tangential/normal split")
    x_par = (float(x @ gt) / tt) * t
    return x_par, x - x_par

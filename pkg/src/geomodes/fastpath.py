"""Dispatch of built-in system combinations to compiled integration kernels.

The generic integrator accepts arbitrary Python callables; for the bundled
double-pendulum systems that is orders of magnitude too slow for 200 s runs
at dt = 1e-3, so the metric/potential pairs below are routed to numba
kernels.  Numerical results agree with the generic path to rounding noise
(see tests); disabling the fast path only changes wall-clock time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartDomainError, ConvergenceError

#: module switch, mainly for tests and benchmarking
ENABLED = True

_kernels = None


def _load():
    global _kernels
    if _kernels is None:
        try:
            from . import _kernels as mod
        except ImportError:
            _kernels = False
            return None
        _kernels = mod
    return _kernels if _kernels else None


@dataclass(frozen=True)
class DesignedKernelData:
    """Plain-array snapshot of a designed potential for the numba kernel."""

    gamma_c: np.ndarray      # (4, m, 2) chart curve spline coefficients
    w_c: np.ndarray          # (4, m, 2) tangent spline coefficients
    dw_c: np.ndarray         # (4, m, 2) tangent-derivative spline coefficients
    s0: float                # first breakpoint
    hs: float                # uniform breakpoint spacing
    s_samples: np.ndarray    # (m+1,) breakpoints, for Newton seeding
    q_samples: np.ndarray    # (m+1, 2) curve points, for Newton seeding
    alpha_desc: np.ndarray   # descending poly coefficients of alpha(xi1)
    s_c: np.ndarray          # (4, m) on-geodesic transverse force spline
    d_c: np.ndarray          # (3, m) its derivative spline
    bp_desc: np.ndarray      # descending poly coefficients of int_0^xi2 beta
    x1min: float
    x1max: float
    halfwidth: float
    newton_tol: float = 1e-12
    newton_maxit: int = 50

    def seed_for(self, q) -> np.ndarray:
        d2 = np.einsum("ij,ij->i", self.q_samples - q, self.q_samples - q)
        return np.array([self.s_samples[int(np.argmin(d2))], 0.0])


def select_kernel(metric, potential):
    """Return a runner ``(q0, v0, dt, nsteps) -> (qs, vs)`` or None."""
    if not ENABLED:
        return None
    mk = metric.kernel
    pk = potential.kernel
    if mk != ("dp",) or pk is None:
        return None
    mod = _load()
    if mod is None:
        return None

    if pk[0] == "circular":
        k0 = float(pk[1])

        def run_circular(q0, v0, dt, nsteps):
            return mod.rk4_dp_circular(q0, v0, dt, nsteps, k0)

        return run_circular

    if pk[0] == "designed":
        data: DesignedKernelData = pk[1]

        def run_designed(q0, v0, dt, nsteps):
            qs, vs, status, done = mod.rk4_dp_designed(
                q0,
                v0,
                dt,
                nsteps,
                data.gamma_c,
                data.w_c,
                data.dw_c,
                data.s0,
                data.hs,
                data.alpha_desc,
                data.s_c,
                data.d_c,
                data.bp_desc,
                data.x1min,
                data.x1max,
                data.halfwidth,
                data.newton_tol,
                data.newton_maxit,
                data.seed_for(q0),
            )
            if status == 1:
                raise ConvergenceError(
                    f"chart inverse did not converge at t={dt * (done + 1):g}"
                )
            if status == 2:
                raise ChartDomainError(
                    f"state left the validated chart domain at t={dt * (done + 1):g}"
                )
            return qs, vs

        return run_designed

    return None

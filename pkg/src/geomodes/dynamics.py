"""Equations of motion, time integration, and the built-in example systems.

The governing second-order system in coordinates is

    qdd^i = -Gamma^i_jk qd^j qd^k + (grad f)^i

Note the sign convention: the potential gradient enters with a plus sign, so
an attracting potential is *negative* definite around its equilibrium and the
total energy is E = 1/2 <qd, qd>_g - f(q).  Most mechanics texts write
qdd = -grad V with V = -f; keep this in mind when supplying potentials.

Integration is fixed-step classical Runge-Kutta (order 4) on the first-order
form.  Energy is recorded at every sample and the run fails loudly when the
relative drift exceeds the configured bound, which makes the accuracy
compromise of a non-symplectic scheme observable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fastpath
from .errors import EnergyDriftError, NumericalError
from .manifold import (
    FD_STEP,
    MetricField,
    christoffel,
    contravariant_gradient,
    metric_eval,
)

DEFAULT_DT = 1e-3
DEFAULT_ENERGY_TOL = 1e-6


@dataclass(frozen=True)
class PotentialField:
    """Scalar potential f with its differential df (a covector field).

    ``value(q)`` returns f(q); ``differential(q)`` returns the length-n array
    of partial derivatives df/dq^i.  A missing differential is replaced by
    central finite differences of ``value`` with step ``FD_STEP``.
    """

    value: Callable[[np.ndarray], float]
    differential: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    value_batch: Callable[[np.ndarray], np.ndarray] | None = None
    kernel: tuple | None = None

    def value_at(self, q) -> float:
        return float(self.value(np.asarray(q, dtype=float)))

    def differential_at(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.differential is not None:
            return np.asarray(self.differential(q), dtype=float)
        n = q.size
        out = np.empty(n)
        for k in range(n):
            dq = np.zeros(n)
            dq[k] = FD_STEP
            out[k] = (self.value(q + dq) - self.value(q - dq)) / (2.0 * FD_STEP)
        return out

    def values_at(self, qs: np.ndarray) -> np.ndarray:
        qs = np.asarray(qs, dtype=float)
        if self.value_batch is not None:
            return np.asarray(self.value_batch(qs), dtype=float)
        return np.array([self.value(p) for p in qs], dtype=float)


def zero_potential(n: int = 2) -> PotentialField:
    zeros = np.zeros(n)
    return PotentialField(
        value=lambda q: 0.0,
        differential=lambda q: zeros,
        name="zero",
        value_batch=lambda qs: np.zeros(len(qs)),
    )


@dataclass(frozen=True)
class State:
    """Configuration, coordinate velocity, and time."""

    q: np.ndarray
    qdot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qdot", np.asarray(self.qdot, dtype=float))
        if self.q.shape != self.qdot.shape:
            raise ValueError("q and qdot dimensions differ")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise NumericalError("non-finite state")


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed samples of a simulation with per-sample total energy."""

    t: np.ndarray          # (m,)
    q: np.ndarray          # (m, n)
    qdot: np.ndarray       # (m, n)
    energy: np.ndarray     # (m,)
    dt: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def drift(self) -> float:
        """Max relative energy drift |E(t) - E(0)| / max(|E(0)|, 1)."""
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(abs(e0), 1.0))

    def state(self, i: int) -> State:
        return State(q=self.q[i], qdot=self.qdot[i], t=float(self.t[i]))


def total_energy(metric: MetricField, potential: PotentialField, s: State) -> float:
    """E = 1/2 <qdot, qdot>_g - f(q)."""
    g = metric_eval(metric, s.q)
    return 0.5 * float(s.qdot @ g @ s.qdot) - potential.value_at(s.q)


def kinetic_energies(metric: MetricField, traj: Trajectory) -> np.ndarray:
    """Per-sample kinetic energy 1/2 <qdot, qdot>_g of a trajectory."""
    if metric.matrix_batch is not None:
        gs = metric.matrix_batch(traj.q)
        return 0.5 * np.einsum("ti,tij,tj->t", traj.qdot, gs, traj.qdot)
    return np.array(
        [0.5 * v @ metric_eval(metric, p) @ v for p, v in zip(traj.q, traj.qdot)]
    )


def equations_of_motion(metric: MetricField, potential: PotentialField, s: State) -> np.ndarray:
    """Coordinate acceleration of the conservative system at a state."""
    gamma = christoffel(metric, s.q)
    grad = contravariant_gradient(metric, potential, s.q)
    if not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite potential gradient at {s.q!r}")
    return -np.einsum("ijk,j,k->i", gamma, s.qdot, s.qdot) + grad


def _integrate_python(metric, potential, q0, v0, dt, nsteps):
    n = q0.size
    qs = np.empty((nsteps + 1, n))
    vs = np.empty((nsteps + 1, n))
    qs[0], vs[0] = q0, v0

    def acc(q, v):
        return equations_of_motion(metric, potential, State(q=q, qdot=v))

    q, v = q0.copy(), v0.copy()
    for i in range(nsteps):
        a1 = acc(q, v)
        k1q, k1v = v, a1
        a2 = acc(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
        k2q, k2v = v + 0.5 * dt * k1v, a2
        a3 = acc(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
        k3q, k3v = v + 0.5 * dt * k2v, a3
        a4 = acc(q + dt * k3q, v + dt * k3v)
        k4q, k4v = v + dt * k3v, a4
        q = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
            raise NumericalError(f"non-finite state at step {i + 1} (t={dt * (i + 1):g})")
        qs[i + 1], vs[i + 1] = q, v
    return qs, vs


def integrate(
    metric: MetricField,
    potential: PotentialField,
    s0: State,
    horizon: float,
    dt: float = DEFAULT_DT,
    energy_tol: float = DEFAULT_ENERGY_TOL,
    use_fastpath: bool = True,
) -> Trajectory:
    """Simulate the conservative system with fixed-step RK4.

    ``horizon`` is the simulated duration in seconds (0 returns the single
    initial sample).  Raises NumericalError on non-finite states and
    EnergyDriftError when the relative energy drift exceeds ``energy_tol``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    nsteps = int(round(horizon / dt))
    q0 = np.asarray(s0.q, dtype=float).copy()
    v0 = np.asarray(s0.qdot, dtype=float).copy()

    runner = fastpath.select_kernel(metric, potential) if use_fastpath else None
    if runner is not None and nsteps > 0:
        qs, vs = runner(q0, v0, dt, nsteps)
        if not (np.all(np.isfinite(qs)) and np.all(np.isfinite(vs))):
            bad = int(np.argmax(~np.all(np.isfinite(qs), axis=1)))
            raise NumericalError(f"non-finite state at step {bad} (t={dt * bad:g})")
    else:
        qs, vs = _integrate_python(metric, potential, q0, v0, dt, nsteps)

    t = s0.t + dt * np.arange(nsteps + 1)
    if metric.matrix_batch is not None:
        gs = metric.matrix_batch(qs)
        kin = 0.5 * np.einsum("ti,tij,tj->t", vs, gs, vs)
    else:
        kin = np.array([0.5 * v @ metric_eval(metric, p) @ v for p, v in zip(qs, vs)])
    energy = kin - potential.values_at(qs)

    traj = Trajectory(t=t, q=qs, qdot=vs, energy=energy, dt=dt)
    if traj.drift > energy_tol:
        raise EnergyDriftError(
            f"relative energy drift {traj.drift:.3e} exceeds bound {energy_tol:.3e}"
        )
    return traj


# ---------------------------------------------------------------------------
# built-in example systems


def double_pendulum_metric() -> MetricField:
    """Inertia tensor of the planar double pendulum with unit lengths/masses.

    In coordinates (q1, q2) = (absolute angle of the first link, relative
    angle of the second):  g11 = 3 + 2 cos q2, g12 = g21 = 1 + cos q2,
    g22 = 1.  Analytic partials are included (only the q2 derivative is
    nonzero).
    """

    def matrix(q):
        c = np.cos(q[1])
        return np.array([[3.0 + 2.0 * c, 1.0 + c], [1.0 + c, 1.0]])

    def partials(q):
        s = np.sin(q[1])
        p = np.zeros((2, 2, 2))
        p[0, 0, 1] = -2.0 * s
        p[0, 1, 1] = -s
        p[1, 0, 1] = -s
        return p

    def matrix_batch(qs):
        c = np.cos(qs[:, 1])
        out = np.empty((len(qs), 2, 2))
        out[:, 0, 0] = 3.0 + 2.0 * c
        out[:, 0, 1] = 1.0 + c
        out[:, 1, 0] = 1.0 + c
        out[:, 1, 1] = 1.0
        return out

    return MetricField(
        matrix=matrix,
        partials=partials,
        name="double_pendulum",
        matrix_batch=matrix_batch,
        kernel=("dp",),
    )


def circular_potential(k0: float = 100.0) -> PotentialField:
    """Independent linear springs of stiffness k0 on each joint.

    f(q) = -1/2 k0 (q1^2 + q2^2); equipotential lines are circles.
    """
    if k0 <= 0.0:
        raise ValueError("spring stiffness k0 must be positive")
    return PotentialField(
        value=lambda q: -0.5 * k0 * float(q @ q),
        differential=lambda q: -k0 * q,
        name=f"circular(k0={k0:g})",
        value_batch=lambda qs: -0.5 * k0 * np.einsum("ti,ti->t", qs, qs),
        kernel=("circular", float(k0)),
    )


def quadratic_potential(stiffness) -> PotentialField:
    """Separable attracting potential f(q) = -1/2 sum_i k_i q_i^2."""
    k = np.asarray(stiffness, dtype=float)
    if np.any(k <= 0.0):
        raise ValueError("stiffness entries must be positive")
    return PotentialField(
        value=lambda q: -0.5 * float(k @ (q * q)),
        differential=lambda q: -k * q,
        name="quadratic",
        value_batch=lambda qs: -0.5 * np.einsum("i,ti->t", k, qs * qs),
    )

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomodes import fastpath
from geomodes.dynamics import (
    PotentialField,
    State,
    circular_potential,
    equations_of_motion,
    integrate,
    quadratic_potential,
    total_energy,
    zero_potential,
)
from geomodes.errors import EnergyDriftError, NumericalError
from geomodes.outputs import read_csv, trajectory_csv


def test_equilibrium_zero_acceleration(dp_metric):
    s = State(q=np.zeros(2), qdot=np.zeros(2))
    np.testing.assert_allclose(
        equations_of_motion(dp_metric, zero_potential(), s), 0.0, atol=1e-12
    )


def test_zero_velocity_acceleration_is_gradient(dp_metric, circ_pot):
    from geomodes.manifold import contravariant_gradient

    q = np.array([0.37, -0.82])
    s = State(q=q, qdot=np.zeros(2))
    np.testing.assert_allclose(
        equations_of_motion(dp_metric, circ_pot, s),
        contravariant_gradient(dp_metric, circ_pot, q),
        atol=1e-13,
    )


def test_acceleration_example(dp_metric, circ_pot):
    s = State(q=np.array([0.1, 0.0]), qdot=np.zeros(2))
    np.testing.assert_allclose(
        equations_of_motion(dp_metric, circ_pot, s), [-10.0, 20.0], atol=1e-12
    )


def test_total_energy_examples(dp_metric, euclid):
    assert total_energy(
        euclid, zero_potential(), State(q=np.zeros(2), qdot=np.array([3.0, 4.0]))
    ) == pytest.approx(12.5)
    assert total_energy(
        dp_metric, zero_potential(), State(q=np.zeros(2), qdot=np.array([1.0, 0.0]))
    ) == pytest.approx(2.5)
    assert total_energy(
        euclid, circular_potential(100.0), State(q=np.zeros(2), qdot=np.zeros(2))
    ) == pytest.approx(0.0)


def test_circular_potential_values():
    pot = circular_potential(100.0)
    assert pot.value_at([0.0, 0.0]) == 0.0
    assert pot.value_at([0.1, 0.0]) == pytest.approx(-0.5)
    np.testing.assert_allclose(pot.differential_at([0.1, 0.0]), [-10.0, 0.0])


@given(r=st.floats(0.01, 2.0), a=st.floats(0, 2 * np.pi), b=st.floats(0, 2 * np.pi))
@settings(max_examples=50, deadline=None)
def test_circular_potential_radially_symmetric(r, a, b):
    pot = circular_potential(100.0)
    va = pot.value_at([r * np.cos(a), r * np.sin(a)])
    vb = pot.value_at([r * np.cos(b), r * np.sin(b)])
    assert va == pytest.approx(vb, rel=1e-12)


def test_circular_potential_rejects_nonpositive_stiffness():
    with pytest.raises(ValueError):
        circular_potential(0.0)


def test_finite_difference_differential_consistency():
    pot = PotentialField(value=lambda q: -0.5 * (3.0 * q[0] ** 2 + 7.0 * q[1] ** 2))
    rng = np.random.default_rng(7)
    for q in rng.uniform(-1, 1, size=(10, 2)):
        np.testing.assert_allclose(
            pot.differential_at(q), [-3.0 * q[0], -7.0 * q[1]], atol=1e-5
        )


def test_harmonic_oscillator_cosine(euclid):
    pot = quadratic_potential([1.0, 1.0])
    traj = integrate(euclid, pot, State(q=np.array([1.0, 0.0]), qdot=np.zeros(2)), 10.0, 1e-3)
    np.testing.assert_allclose(traj.q[:, 0], np.cos(traj.t), atol=1e-6)
    np.testing.assert_allclose(traj.q[:, 1], 0.0, atol=1e-12)


def test_zero_horizon_returns_initial_sample(dp_metric, circ_pot):
    s0 = State(q=np.array([0.1, 0.2]), qdot=np.array([0.3, -0.1]))
    traj = integrate(dp_metric, circ_pot, s0, 0.0, 1e-3)
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.q[0], s0.q)


def test_integrate_validates_arguments(dp_metric, circ_pot):
    s0 = State(q=np.zeros(2), qdot=np.zeros(2))
    with pytest.raises(ValueError):
        integrate(dp_metric, circ_pot, s0, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(dp_metric, circ_pot, s0, -1.0, 1e-3)


def test_energy_drift_bound_enforced(dp_metric, circ_pot):
    s0 = State(q=np.array([0.5, 0.5]), qdot=np.zeros(2))
    with pytest.raises(EnergyDriftError):
        integrate(dp_metric, circ_pot, s0, 5.0, 1e-3, energy_tol=1e-14)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_nonfinite_state_raises(euclid):
    # repelling potential: exponential growth to overflow
    pot = PotentialField(
        value=lambda q: 0.5 * 1e4 * float(q @ q),
        differential=lambda q: 1e4 * q,
    )
    with pytest.raises(NumericalError):
        integrate(euclid, pot, State(q=np.array([1.0, 0.0]), qdot=np.zeros(2)), 20.0, 1e-2,
                  energy_tol=np.inf)


def test_fastpath_matches_generic(dp_metric, circ_pot):
    s0 = State(q=np.array([0.3, -0.2]), qdot=np.array([0.5, 1.0]))
    fast = integrate(dp_metric, circ_pot, s0, 1.0, 1e-3)
    old = fastpath.ENABLED
    try:
        fastpath.ENABLED = False
        slow = integrate(dp_metric, circ_pot, s0, 1.0, 1e-3)
    finally:
        fastpath.ENABLED = old
    np.testing.assert_allclose(fast.q, slow.q, atol=1e-12)
    np.testing.assert_allclose(fast.qdot, slow.qdot, atol=1e-11)


def test_time_reversal_symmetry(dp_metric, circ_pot):
    s0 = State(q=np.array([0.4, -0.3]), qdot=np.array([1.0, 0.5]))
    fwd = integrate(dp_metric, circ_pot, s0, 2.0, 1e-3)
    back = integrate(
        dp_metric,
        circ_pot,
        State(q=fwd.q[-1], qdot=-fwd.qdot[-1]),
        2.0,
        1e-3,
    )
    np.testing.assert_allclose(back.q[-1], s0.q, atol=1e-5)
    np.testing.assert_allclose(back.qdot[-1], -s0.qdot, atol=1e-5)


def test_integrator_fourth_order_convergence(dp_metric, circ_pot):
    s0 = State(q=np.array([0.4, 0.2]), qdot=np.array([0.0, 1.0]))
    ref = integrate(dp_metric, circ_pot, s0, 1.0, 2.5e-4)

    def terminal_error(dt):
        traj = integrate(dp_metric, circ_pot, s0, 1.0, dt)
        return np.linalg.norm(traj.q[-1] - ref.q[-1]) + np.linalg.norm(
            traj.qdot[-1] - ref.qdot[-1]
        )

    factor = terminal_error(4e-3) / terminal_error(2e-3)
    assert 12.0 <= factor <= 20.0


def test_short_drift_double_pendulum(dp_metric, circ_pot):
    rng = np.random.default_rng(3)
    for _ in range(2):
        q = rng.uniform(-0.5, 0.5, 2)
        traj = integrate(dp_metric, circ_pot, State(q=q, qdot=np.zeros(2)), 20.0, 1e-3)
        assert traj.drift < 1e-6


def test_trajectory_strictly_increasing_time(dp_metric, circ_pot):
    traj = integrate(
        dp_metric, circ_pot, State(q=np.array([0.1, 0.1]), qdot=np.zeros(2)), 0.5, 1e-3
    )
    assert np.all(np.diff(traj.t) > 0.0)


def test_trajectory_csv_roundtrip(tmp_path, dp_metric, circ_pot):
    traj = integrate(
        dp_metric, circ_pot, State(q=np.array([0.1, 0.1]), qdot=np.zeros(2)), 0.05, 1e-3
    )
    path = tmp_path / "traj.csv"
    trajectory_csv(path, traj)
    header, data = read_csv(path)
    assert header == ["t", "q1", "q2", "qd1", "qd2", "E"]
    np.testing.assert_allclose(data[:, 0], traj.t, atol=1e-16)
    np.testing.assert_allclose(data[:, 1:3], traj.q, rtol=1e-16)
    np.testing.assert_allclose(data[:, 5], traj.energy, rtol=1e-15)
    # 17-significant-digit formatting keeps full precision
    text = path.read_text().splitlines()[1]
    assert len(text.split(",")) == 6


def test_state_validation():
    with pytest.raises(ValueError):
        State(q=np.zeros(2), qdot=np.zeros(3))
    with pytest.raises(NumericalError):
        State(q=np.array([np.nan, 0.0]), qdot=np.zeros(2))


def test_double_pendulum_partial_values(dp_metric):
    from geomodes.manifold import metric_partials

    p = metric_partials(dp_metric, np.array([0.3, np.pi / 2]))
    assert p[0, 0, 1] == pytest.approx(-2.0)


def test_metric_eval_any_first_angle(dp_metric):
    np.testing.assert_allclose(
        dp_metric.matrix(np.array([123.4, np.pi / 2])), [[3.0, 1.0], [1.0, 1.0]], atol=1e-12
    )

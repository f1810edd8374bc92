import math

import numpy as np
import pytest

from geomodes.design import DesignSpec, design_strict_potential
from geomodes.dynamics import (
    State,
    circular_potential,
    double_pendulum_metric,
    integrate,
)
from geomodes.geodesics import geodesic_chart, shoot_geodesic_two_sided
from geomodes.manifold import euclidean_metric


@pytest.fixture(scope="session")
def dp_metric():
    return double_pendulum_metric()


@pytest.fixture(scope="session")
def circ_pot():
    return circular_potential(100.0)


@pytest.fixture(scope="session")
def euclid():
    return euclidean_metric(2)


@pytest.fixture(scope="session")
def design_result(dp_metric):
    """The bundled design instance: alpha = -5 xi1, beta = -47.86."""
    ang = -math.pi / 4.0
    curve = shoot_geodesic_two_sided(
        dp_metric, np.zeros(2), np.array([math.cos(ang), math.sin(ang)]), 1.8, 0.01
    )
    chart = geodesic_chart(curve, 0.3)
    spec = DesignSpec(
        chart=chart, alpha=np.array([0.0, -5.0]), beta=np.array([-47.86]), epsilon=1.6
    )
    return design_strict_potential(dp_metric, spec)


DESIGN_PERIOD = 2.0 * math.pi / math.sqrt(5.0)


@pytest.fixture(scope="session")
def designed_runs(dp_metric, design_result):
    """On-geodesic trajectories of the designed system keyed by energy.

    The 5.63 J run covers five periods (shared by several checks); the lower
    energies cover three.
    """
    curve = design_result.spec.chart.curve
    i0 = int(np.argmin(np.abs(curve.s)))
    out = {}
    for energy, periods in ((1.0, 3.0), (3.0, 3.0), (5.63, 5.0)):
        s0 = State(q=curve.q[i0], qdot=math.sqrt(2.0 * energy) * curve.w[i0])
        out[energy] = integrate(
            dp_metric, design_result.potential, s0, periods * DESIGN_PERIOD * 1.02, 1e-3
        )
    return out

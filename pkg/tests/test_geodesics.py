import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from geomodes.errors import ChartDomainError, NumericalError
from geomodes.geodesics import (
    chart_grid,
    chart_inverse,
    chart_inverse_batch,
    geodesic_chart,
    geodesic_residuals,
    shoot_geodesic,
    shoot_geodesic_two_sided,
    speed_law_solve,
)
from geomodes.manifold import MetricField, g_norm, inner_product


@pytest.fixture(scope="module")
def design_curve(dp_metric):
    ang = -np.pi / 4.0
    return shoot_geodesic_two_sided(
        dp_metric, np.zeros(2), np.array([np.cos(ang), np.sin(ang)]), 1.8, 0.01
    )


@pytest.fixture(scope="module")
def design_chart(dp_metric, design_curve):
    return geodesic_chart(design_curve, 0.3)


def test_euclidean_straight_segment(euclid):
    curve = shoot_geodesic(euclid, np.zeros(2), np.array([1.0, 0.0]), 2.0, 0.01)
    np.testing.assert_allclose(curve.q[-1], [2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(curve.q[:, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(curve.w, [[1.0, 0.0]] * len(curve), atol=1e-12)


def test_constant_metric_geodesics_affine():
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = rng.normal(size=(2, 2))
        metric = MetricField.constant(a @ a.T + 2.0 * np.eye(2))
        q0 = rng.normal(size=2)
        v0 = rng.normal(size=2)
        curve = shoot_geodesic(metric, q0, v0, 1.5, 0.01)
        frac = (curve.s - curve.s[0]) / (curve.s[-1] - curve.s[0])
        chord = curve.q[0] + frac[:, None] * (curve.q[-1] - curve.q[0])
        assert np.max(np.abs(curve.q - chord)) < 1e-10


def test_unit_speed_invariant(dp_metric, design_curve):
    devs = [abs(g_norm(dp_metric, q, w) - 1.0) for q, w in zip(design_curve.q, design_curve.w)]
    assert max(devs) < 1e-8


def test_geodesic_residual_small(dp_metric, design_curve):
    assert np.max(geodesic_residuals(dp_metric, design_curve)) < 1e-8


def test_design_geodesic_bends(design_curve):
    frac = (design_curve.s - design_curve.s[0]) / (design_curve.s[-1] - design_curve.s[0])
    chord = design_curve.q[0] + frac[:, None] * (design_curve.q[-1] - design_curve.q[0])
    assert np.max(np.linalg.norm(design_curve.q - chord, axis=1)) > 0.01


def test_geodesic_reversibility(dp_metric):
    v0 = np.array([np.cos(0.3), np.sin(0.3)])
    fwd = shoot_geodesic(dp_metric, np.array([0.1, -0.2]), v0, 1.0, 0.01)
    back = shoot_geodesic(dp_metric, fwd.q[-1], -fwd.w[-1], 1.0, 0.01)
    np.testing.assert_allclose(back.q, fwd.q[::-1], atol=1e-8)


def test_two_sided_shot_is_continuous(dp_metric, design_curve):
    assert design_curve.s[0] == pytest.approx(-1.8)
    assert design_curve.s[-1] == pytest.approx(1.8)
    assert np.all(np.diff(design_curve.s) > 0.0)
    gaps = np.linalg.norm(np.diff(design_curve.q, axis=0), axis=1)
    assert gaps.max() < 0.02


def test_shoot_rejects_zero_tangent(dp_metric):
    with pytest.raises(ValueError):
        shoot_geodesic(dp_metric, np.zeros(2), np.zeros(2), 1.0, 0.01)


def test_curve_reversed_view(design_curve):
    rev = design_curve.reversed()
    np.testing.assert_allclose(rev.q, design_curve.q[::-1])
    np.testing.assert_allclose(rev.w, -design_curve.w[::-1])
    assert np.all(np.diff(rev.s) > 0.0)


# ---------------------------------------------------------------------------
# chart


def test_identity_chart_for_straight_euclidean_line(euclid):
    curve = shoot_geodesic_two_sided(euclid, np.zeros(2), np.array([1.0, 0.0]), 1.0, 0.01)
    chart = geodesic_chart(curve, 0.5)
    xi = np.array([0.37, -0.21])
    np.testing.assert_allclose(chart.forward(xi), xi, atol=1e-12)
    np.testing.assert_allclose(chart.jacobian(xi), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(chart_inverse(chart, [0.4, 0.1]), [0.4, 0.1], atol=1e-10)


def test_forward_reproduces_samples_on_axis(design_chart, design_curve):
    for i in range(0, len(design_curve), 40):
        xi = np.array([design_curve.s[i], 0.0])
        np.testing.assert_allclose(design_chart.forward(xi), design_curve.q[i], atol=1e-12)


def test_jacobian_first_column_is_tangent_on_axis(design_chart, design_curve):
    for i in range(0, len(design_curve), 60):
        jac = design_chart.jacobian((design_curve.s[i], 0.0))
        np.testing.assert_allclose(jac[:, 0], design_curve.w[i], atol=1e-12)


def test_det_jacobian_at_origin(design_chart):
    assert np.linalg.det(design_chart.jacobian((0.0, 0.0))) == pytest.approx(1.0, abs=1e-8)


def test_chart_inverse_on_geodesic(design_chart, design_curve):
    i = len(design_curve) // 3
    xi = chart_inverse(design_chart, design_curve.q[i])
    assert xi[0] == pytest.approx(design_curve.s[i], abs=1e-9)
    assert xi[1] == pytest.approx(0.0, abs=1e-9)


@given(x1=st.floats(-1.7, 1.7), x2=st.floats(-0.29, 0.29))
@settings(max_examples=60, deadline=None)
def test_chart_roundtrip(dp_metric, x1, x2):
    chart = _cached_chart(dp_metric)
    xi = np.array([x1, x2])
    back = chart_inverse(chart, chart.forward(xi))
    np.testing.assert_allclose(back, xi, atol=1e-8)


_chart_cache = {}


def _cached_chart(metric):
    if "c" not in _chart_cache:
        ang = -np.pi / 4.0
        curve = shoot_geodesic_two_sided(
            metric, np.zeros(2), np.array([np.cos(ang), np.sin(ang)]), 1.8, 0.01
        )
        _chart_cache["c"] = geodesic_chart(curve, 0.3)
    return _chart_cache["c"]


def test_chart_inverse_batch_matches_scalar(design_chart):
    rng = np.random.default_rng(5)
    xis = np.column_stack([rng.uniform(-1.5, 1.5, 40), rng.uniform(-0.25, 0.25, 40)])
    pts = design_chart.forward(xis)
    batch = chart_inverse_batch(design_chart, pts)
    np.testing.assert_allclose(batch, xis, atol=1e-8)


def test_chart_inverse_outside_domain(design_chart):
    with pytest.raises(ChartDomainError):
        chart_inverse(design_chart, np.array([0.0, 0.0]) + np.array([0.5, 0.5]))


def test_chart_domain_trimmed_where_jacobian_degrades(dp_metric, design_curve):
    wide = geodesic_chart(design_curve, 2.0)
    assert wide.xi1_range[0] > design_curve.s[0]
    assert wide.xi1_range[1] < design_curve.s[-1]
    assert wide.xi1_range[0] < 0.0 < wide.xi1_range[1]


def test_chart_rejects_fully_degenerate_domain():
    # unit circle with a transverse extent beyond its curvature radius:
    # det J vanishes at xi2 = 1 for every xi1
    from geomodes.geodesics import GeodesicCurve

    s = 0.01 * np.arange(629)
    q = np.column_stack([np.cos(s), np.sin(s)])
    w = np.column_stack([-np.sin(s), np.cos(s)])
    circle = GeodesicCurve(s=s, q=q, w=w, ds=0.01)
    with pytest.raises(NumericalError):
        geodesic_chart(circle, 2.0)


def test_chart_grid_shape(design_chart):
    xi1, xi2, pts = chart_grid(design_chart, 0.1)
    assert pts.shape == (len(xi1), len(xi2), 2)
    np.testing.assert_allclose(pts[:, list(xi2).index(min(xi2, key=abs)), :],
                               design_chart._gamma(xi1), atol=1e-12)


# ---------------------------------------------------------------------------
# speed law


def test_speed_law_free_motion():
    law = speed_law_solve(lambda s: np.zeros_like(s), 0.5, (-1.0, 1.0))
    np.testing.assert_allclose(law.beta(np.linspace(-1, 1, 11)), 1.0, atol=1e-12)


def test_speed_law_linear_alpha_closed_form():
    law = speed_law_solve(Polynomial([0.0, -5.0]), 5.63, (-2.0, 2.0))
    s = np.linspace(-1.4, 1.4, 31)
    np.testing.assert_allclose(law.beta(s), np.sqrt(11.26 - 5.0 * s * s), atol=1e-10)
    tp = law.turning_points()
    np.testing.assert_allclose(np.abs(tp), np.sqrt(11.26 / 5.0), atol=1e-6)
    assert tp[tp > 0][0] == pytest.approx(1.5006, abs=2e-4)


@given(e=st.floats(0.01, 20.0))
@settings(max_examples=30, deadline=None)
def test_speed_law_initial_speed(e):
    law = speed_law_solve(Polynomial([0.0, -5.0]), e, (-3.0, 3.0))
    assert 0.5 * float(law.beta(0.0)) ** 2 == pytest.approx(e, rel=1e-9)


def test_speed_law_rejects_negative_energy():
    with pytest.raises(ValueError):
        speed_law_solve(lambda s: -s, -1.0, (-1.0, 1.0))


def test_speed_law_nan_beyond_turning():
    law = speed_law_solve(Polynomial([0.0, -5.0]), 1.0, (-2.0, 2.0))
    assert np.isnan(law.beta(1.9))


def test_covariant_acceleration_vanishes_along_geodesic(dp_metric, design_curve):
    # independent second-derivative route: differentiate the stored tangents
    from geomodes.geodesics import fd4_uniform
    from geomodes.manifold import covariant_acceleration

    dw = fd4_uniform(design_curve.w, design_curve.ds)
    for i in range(5, len(design_curve), 50):
        cov = covariant_acceleration(dp_metric, design_curve.q[i], design_curve.w[i], dw[i])
        g = dp_metric.matrix(design_curve.q[i])
        assert np.sqrt(cov @ g @ cov) < 1e-8


def test_metric_compatibility_along_geodesic(dp_metric, design_curve):
    # <w, w>_g constant along the flow is metric compatibility in practice
    vals = [inner_product(dp_metric, q, w, w) for q, w in zip(design_curve.q, design_curve.w)]
    assert np.max(np.abs(np.array(vals) - 1.0)) < 1e-8

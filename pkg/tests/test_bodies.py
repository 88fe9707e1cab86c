import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qclab.bodies import (
    Ellipsoid,
    GaugeBody,
    LinearImage,
    LpBall,
    PConvex,
    QuasiConvex,
    Scaled,
    Star,
    aoki_rolewicz_gauge,
    envelope_exponent,
    gauge,
    quasi_constant,
    support_function,
)
from qclab.functionals import sample_body_uniform

from conftest import sample_bodies


# -- gauge ------------------------------------------------------------------

def test_gauge_examples():
    assert gauge(LpBall(2, 1.0), [1.0, 0.0]) == 1.0
    assert gauge(LpBall(2, 0.5), [1.0, 1.0]) == pytest.approx(4.0, rel=1e-15)
    assert gauge(Ellipsoid.from_diag([1.0, 4.0]), [0.0, 1.0]) == 2.0


def test_gauge_errors():
    with pytest.raises(ValueError, match="dimension"):
        gauge(LpBall(3, 1.0), [1.0, 2.0])
    with pytest.raises(ValueError, match="non-finite"):
        gauge(LpBall(2, 1.0), [np.nan, 1.0])
    with pytest.raises(ValueError, match="non-finite"):
        gauge(LpBall(2, 1.0), [np.inf, 1.0])


def test_gauge_zero_everywhere():
    for body in sample_bodies():
        assert gauge(body, np.zeros(body.dim)) == 0.0


@pytest.mark.parametrize("body", sample_bodies(), ids=lambda b: b.label)
def test_homogeneity(body, gen):
    x = gen.standard_normal((1000, body.dim))
    t = gen.standard_normal(1000) * np.exp(gen.uniform(-5, 5, 1000))
    lhs = body.gauge(t[:, None] * x)
    rhs = np.abs(t) * body.gauge(x)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


@given(
    p=st.floats(0.1, 1.0),
    x=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    y=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
)
@settings(max_examples=300, deadline=None)
def test_p_triangle_hypothesis(p, x, y):
    b = LpBall(3, p)
    x, y = np.array(x), np.array(y)
    lhs = b.gauge(x + y) ** p
    rhs = b.gauge(x) ** p + b.gauge(y) ** p
    assert lhs <= rhs * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8, 1.0])
def test_p_triangle_random_pairs(p, gen):
    b = LpBall(5, p)
    x = gen.standard_normal((10_000, 5)) * gen.exponential(1, (10_000, 1))
    y = gen.standard_normal((10_000, 5)) * gen.exponential(1, (10_000, 1))
    lhs = b.gauge(x + y) ** p
    rhs = b.gauge(x) ** p + b.gauge(y) ** p
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_parallelogram_identity(gen):
    m = gen.standard_normal((6, 6))
    e = Ellipsoid(m @ m.T + 0.5 * np.eye(6))
    x = gen.standard_normal((5000, 6))
    y = gen.standard_normal((5000, 6))
    lhs = e.gauge(x + y) ** 2 + e.gauge(x - y) ** 2
    rhs = 2 * (e.gauge(x) ** 2 + e.gauge(y) ** 2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_positive_off_origin(gen):
    for body in sample_bodies():
        d = gen.standard_normal((1000, body.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        assert body.gauge(d).min() > 1e-9


def test_ellipsoid_rejects_bad_shapes():
    with pytest.raises(ValueError, match="positive definite"):
        Ellipsoid(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="symmetric"):
        Ellipsoid(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        LpBall(2, 0.0)
    with pytest.raises(ValueError):
        LpBall(0, 1.0)


def test_gauge_body_rejects_unbounded():
    # vanishes along the first axis: an infinite slab
    with pytest.raises(ValueError, match="unbounded"):
        GaugeBody(2, lambda x: np.abs(x[:, 1]))


def test_algebra_gauges(gen):
    base = LpBall(3, 0.5)
    a = gen.standard_normal((3, 3)) + 3 * np.eye(3)
    x = gen.standard_normal((100, 3))
    np.testing.assert_allclose(Scaled(base, 2.5).gauge(x), base.gauge(x) / 2.5, rtol=1e-15)
    img = LinearImage(base, a)
    np.testing.assert_allclose(img.gauge(x @ a.T), base.gauge(x), rtol=1e-12)
    assert img.convexity == PConvex(0.5)
    with pytest.raises(ValueError, match="singular"):
        LinearImage(base, np.zeros((3, 3)))


def test_convexity_classes():
    assert LpBall(3, 0.5).convexity == PConvex(0.5)
    assert LpBall(3, 3.0).convexity == PConvex(1.0)
    assert Ellipsoid.euclidean(2).convexity == PConvex(1.0)
    with pytest.raises(ValueError):
        PConvex(1.5)
    with pytest.raises(ValueError):
        QuasiConvex(0.5)


# -- volumes ----------------------------------------------------------------

def test_closed_form_volumes():
    assert math.exp(LpBall(2, 1.0).log_volume()) == pytest.approx(2.0)
    assert math.exp(LpBall(3, 2.0).log_volume()) == pytest.approx(4 * math.pi / 3)
    assert math.exp(Ellipsoid.from_diag([1.0, 4.0]).log_volume()) == pytest.approx(math.pi / 2)
    # l_1/2 unit ball in the plane has area 2/3
    assert math.exp(LpBall(2, 0.5).log_volume()) == pytest.approx(2.0 / 3.0)
    assert math.exp(Scaled(LpBall(2, 1.0), 3.0).log_volume()) == pytest.approx(18.0)
    assert LinearImage(LpBall(2, 1.0), np.diag([2.0, 3.0])).log_volume() == pytest.approx(math.log(12.0))


# -- support function -------------------------------------------------------

def test_support_examples():
    u = np.ones(3) / math.sqrt(3)
    assert support_function(Ellipsoid.euclidean(5), np.eye(5)[2]) == pytest.approx(1.0, abs=1e-15)
    assert support_function(LpBall(3, 1.0), u) == pytest.approx(1 / math.sqrt(3), rel=1e-15)
    assert support_function(LpBall(2, 1.0), np.array([3.0, 4.0]) / 5) == pytest.approx(0.8, rel=1e-15)


def test_support_dual_exponent(gen):
    u = gen.standard_normal((50, 4))
    np.testing.assert_allclose(LpBall(4, 3.0).support(u), LpBall(4, 1.5).gauge(u), rtol=1e-12)
    e = Ellipsoid.from_diag([1.0, 4.0, 9.0, 16.0])
    np.testing.assert_allclose(e.support(u), Ellipsoid.from_diag([1, 1 / 4, 1 / 9, 1 / 16]).gauge(u), rtol=1e-12)


def test_support_brute_force(gen):
    # sup <u,x> over boundary points of a linear image of the l_1.5 ball, found by dense angle scan
    a = np.array([[2.0, 0.3], [0.1, 0.7]])
    body = LinearImage(LpBall(2, 1.5), a)
    th = np.linspace(0, 2 * np.pi, 200_001)
    circ = np.stack([np.cos(th), np.sin(th)], 1)
    bd = circ / body.gauge(circ)[:, None]
    for u in gen.standard_normal((5, 2)):
        assert support_function(body, u) == pytest.approx((bd @ u).max(), rel=1e-8)


def test_support_zero_direction():
    with pytest.raises(ValueError, match="nonzero"):
        support_function(LpBall(2, 1.0), [0.0, 0.0])


def test_support_cloud_fallback_from_below():
    # oracle-only body with the l_1 gauge: true support is the max norm
    body = GaugeBody(3, lambda x: np.abs(x).sum(axis=1), PConvex(1.0), "l1-oracle")
    u = np.array([[1.0, 0.2, -0.3], [0.1, 0.1, 1.0]])
    coarse = support_function(body, u, cloud_size=2_000, seed=1)
    fine = support_function(body, u, cloud_size=200_000, seed=1)
    truth = np.abs(u).max(axis=1)
    assert np.all(coarse <= truth + 1e-12)
    assert np.all(fine <= truth + 1e-12)
    assert np.all(truth - fine <= truth - coarse + 1e-12)
    np.testing.assert_allclose(fine, truth, rtol=2e-2)


def test_support_of_pconvex_ball_is_hull():
    u = np.array([0.3, -0.9, 0.2])
    assert support_function(LpBall(3, 0.3), u) == pytest.approx(0.9)


# -- quasi-convexity constant -----------------------------------------------

def _grid_quasi_constant_oracle(body, points=8000):
    """Exhaustive max of gauge(x+y) over pairs of unit-gauge points on an angle grid.

    ``points`` is a multiple of 4 so the grid contains the axis directions.
    """
    th = np.linspace(0.0, 2 * np.pi, points, endpoint=False)
    circ = np.stack([np.cos(th), np.sin(th)], 1)
    pts = circ / body.gauge(circ)[:, None]
    best = 0.0
    for s in range(0, len(pts), 512):
        sums = pts[s:s + 512, None, :] + pts[None, :, :]
        best = max(best, float(body.gauge(sums).max()))
    return best


def test_quasi_constant_grid_oracle_lhalf():
    body = LpBall(2, 0.5)
    oracle = _grid_quasi_constant_oracle(body)
    assert 4.0 - 1e-2 <= oracle <= 4.0 + 1e-12
    est = quasi_constant(body, 10_000, seed=1)
    assert est == pytest.approx(4.0, rel=1e-12)
    assert abs(est - oracle) <= 1e-2


@pytest.mark.parametrize("p", [0.25, 0.5, 0.75, 1.0])
def test_quasi_constant_lp(p):
    assert quasi_constant(LpBall(4, p), 1000, seed=2) == pytest.approx(2 ** (1 / p), rel=1e-12)


def test_quasi_constant_ellipsoid():
    e = Ellipsoid.from_diag([1.0, 3.0, 10.0])
    assert quasi_constant(e, 5000, seed=3) == pytest.approx(2.0, rel=1e-12)


def test_quasi_constant_monotone_in_budget():
    body = GaugeBody(3, lambda x: np.abs(x).sum(1) + 0.5 * np.abs(x[:, 0] - x[:, 1]), Star())
    vals = [quasi_constant(body, b, seed=4) for b in (1, 100, 5000, 20_000)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[0] >= 1.0


# -- Aoki-Rolewicz envelope -------------------------------------------------

def test_envelope_exponent():
    # 2^(1/q) = 2c with c = 2^(1/p)
    assert envelope_exponent(LpBall(2, 0.5)) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        envelope_exponent(GaugeBody(2, lambda x: np.abs(x).sum(1), Star()))


def test_aoki_rolewicz_trivial_cases(gen):
    body = LpBall(3, 0.5)
    x = gen.standard_normal(3)
    assert aoki_rolewicz_gauge(body, x, depth=1) == pytest.approx(gauge(body, x), rel=1e-12)
    assert aoki_rolewicz_gauge(body, np.zeros(3), depth=3) == 0.0
    with pytest.raises(ValueError, match="depth"):
        aoki_rolewicz_gauge(body, x, depth=0)


def _two_part_grid_oracle(body, x, q, step=1e-2, span=3.0):
    """Exhaustive two-part split search on a grid of y in [-span, span]^2."""
    ax = np.arange(-span, span + step / 2, step)
    yy = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    vals = body.gauge(yy) ** q + body.gauge(x - yy) ** q
    return float(min(vals.min(), body.gauge(x) ** q)) ** (1 / q)


def test_aoki_rolewicz_lhalf_sandwich_and_grid_oracle():
    body = LpBall(2, 0.5)
    x = np.array([1.0, 1.0])
    g = gauge(body, x)
    c = 2 ** (1 / 0.5)
    q = envelope_exponent(body)
    oracle = _two_part_grid_oracle(body, x, q)
    val = aoki_rolewicz_gauge(body, x, depth=2)
    assert g / (2 * c) <= val <= g
    # q < p, so no split beats the gauge; both routes land on it
    assert oracle == pytest.approx(g, rel=1e-12)
    assert val == pytest.approx(oracle, rel=1e-9)


def test_aoki_rolewicz_monotone_and_sandwich(gen):
    e1, e2 = Ellipsoid.from_diag([1.0, 25.0]), Ellipsoid.from_diag([25.0, 1.0])
    fn = lambda x: np.minimum(e1.gauge(x), e2.gauge(x))  # noqa: E731
    c = quasi_constant(GaugeBody(2, fn, Star()), 50_000, seed=5)
    body = GaugeBody(2, fn, QuasiConvex(c), "cross")
    for x in gen.standard_normal((4, 2)):
        g = gauge(body, x)
        vals = [aoki_rolewicz_gauge(body, x, d) for d in (1, 2, 3)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        assert all(g / (2 * c) - 1e-12 <= v <= g + 1e-12 for v in vals)


@pytest.mark.parametrize("p", [0.3, 0.6, 1.0])
def test_aoki_rolewicz_equals_gauge_for_pconvex(p, gen):
    body = LpBall(3, p)
    for x in gen.standard_normal((3, 3)):
        assert aoki_rolewicz_gauge(body, x, depth=3) == pytest.approx(gauge(body, x), rel=1e-10)


# -- samplers tied to bodies --------------------------------------------------

@pytest.mark.parametrize("body", sample_bodies(3), ids=lambda b: b.label)
def test_exact_samplers_stay_inside(body):
    pts = sample_body_uniform(body, 20_000, 11)
    assert pts.shape == (20_000, 3)
    assert body.gauge(pts).max() <= 1 + 1e-12

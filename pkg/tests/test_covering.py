import math

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix

from qclab.bodies import Ellipsoid, GaugeBody, LpBall, PConvex, Scaled, euclidean_ball
from qclab.covering import (
    CoverCapError,
    CoveringReport,
    EntropyEstimate,
    absorption_check,
    absorption_instance,
    absorption_radius,
    count_at,
    cover_radius,
    covering_counts,
    entropy_number,
    greedy_net,
    lemma2_bound,
    lemma4_bound,
    pconvex_cover_bound,
    traverse,
    volume_lower,
    write_centers,
)
from qclab.functionals import sample_body_uniform


# -- oracles ----------------------------------------------------------------

def _disc_grid(h):
    ax = np.arange(-1, 1 + h / 2, h)
    g = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    return g[np.linalg.norm(g, axis=1) <= 1 + 1e-12]


def grid_set_cover_opt(cloud, t, h):
    """Exact minimum number of radius-t disks centered on an h-grid covering the cloud (ILP)."""
    g = _disc_grid(h)
    hit = np.linalg.norm(cloud[:, None] - g[None], axis=2) <= t
    res = milp(np.ones(len(g)), constraints=LinearConstraint(csr_matrix(hit.astype(float)), lb=1),
               integrality=np.ones(len(g)), bounds=Bounds(0, 1))
    assert res.status == 0
    return int(round(res.fun))


def two_center_grid_radius(pts, h):
    """Exhaustive min over pairs of h-grid centers of the covering radius of pts."""
    g = _disc_grid(h)
    d = np.linalg.norm(pts[:, None] - g[None], axis=2).T
    return min(float(np.minimum(d[i][None], d[i:]).max(axis=1).min()) for i in range(len(g)))


DISC_CLOUD = (1500, 31)        # cloud size, seed
DISC_HALF_OPT = 7              # certified by the ILP oracle below
E2_DISC = 1.0                  # two-center grid oracle on circle + cloud


@pytest.mark.slow
def test_disc_cover_oracle_reproduces():
    cloud = sample_body_uniform(euclidean_ball(2), *DISC_CLOUD)
    h = 0.03
    upper = grid_set_cover_opt(cloud, 0.5, h)
    # any continuous center has a grid point within h/sqrt(2)
    lower = grid_set_cover_opt(cloud, 0.5 + h / math.sqrt(2), h)
    assert lower == upper == DISC_HALF_OPT


def _circle_plus_cloud():
    th = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    return np.vstack([np.stack([np.cos(th), np.sin(th)], 1),
                      sample_body_uniform(euclidean_ball(2), 1000, 32)])


def test_two_center_oracle_reproduces():
    assert two_center_grid_radius(_circle_plus_cloud(), 0.05) == pytest.approx(E2_DISC, abs=1e-12)


# -- greedy nets ------------------------------------------------------------

def test_body_covers_itself_with_one_center():
    for K in (euclidean_ball(2), LpBall(3, 0.5), Ellipsoid.from_diag([1.0, 9.0])):
        rep = greedy_net(K, K, 1.0, 5000, 1)
        assert rep.upper_count == 1
        np.testing.assert_array_equal(rep.centers, np.zeros((1, K.dim)))


def test_interval_half():
    I = LpBall(1, 1.0)
    plain = greedy_net(I, I, 0.5, 20_000, 2)
    assert plain.greedy_count == 3
    rep = greedy_net(I, I, 0.5, 20_000, 2, refine=True)
    assert rep.upper_count == 2
    np.testing.assert_allclose(np.sort(rep.centers.ravel()), [-0.5, 0.5], atol=1e-3)
    assert rep.certificate()


def test_disc_half_within_factor_two():
    cloud = sample_body_uniform(euclidean_ball(2), *DISC_CLOUD)
    D = euclidean_ball(2)
    plain = greedy_net(D, D, 0.5, 0, 0, cloud=cloud)
    refined = greedy_net(D, D, 0.5, 0, 0, cloud=cloud, refine=True)
    assert plain.greedy_count <= 2 * DISC_HALF_OPT
    # a valid covering of the cloud cannot beat the certified optimum
    assert DISC_HALF_OPT <= refined.upper_count <= 2 * DISC_HALF_OPT
    assert refined.certificate() and plain.certificate()
    assert np.all(D.gauge(refined.centers) <= 1 + 1e-9)


@pytest.mark.parametrize("K,B", [
    (LpBall(2, 0.5), euclidean_ball(2)),
    (LpBall(3, 1.0), LpBall(3, 0.5)),
    (Ellipsoid.from_diag([1.0, 4.0]), LpBall(2, 1.0)),
])
def test_certificate_and_separation(K, B):
    rep = greedy_net(K, B, 0.3, 20_000, 3)
    assert rep.certificate()
    assert rep.radius <= 0.3
    assert np.all(K.gauge(rep.centers) <= 1 + 1e-9)
    c = rep.centers
    sep = np.array([B.gauge(c[i] - np.delete(c, i, axis=0)).min() for i in range(len(c))])
    assert sep.min() > 0.3


def test_generic_gauge_path_matches_kernel():
    cloud = sample_body_uniform(LpBall(2, 1.0), 4000, 4)
    D = euclidean_ball(2)
    oracle = GaugeBody(2, D.gauge, PConvex(1.0), "disc-oracle")
    a = traverse(cloud, D, 0.2, 10_000)
    b = traverse(cloud, oracle, 0.2, 10_000)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12)


def test_counts_monotone_in_t():
    ts = np.linspace(0.2, 1.0, 9)
    for K in (LpBall(2, 0.5), LpBall(2, 1.0)):
        counts = covering_counts(K, euclidean_ball(2), ts, 50_000, 5)
        assert np.all(np.diff(counts) <= 0)
        single = [greedy_net(K, euclidean_ball(2), t, 50_000, 5).upper_count for t in ts]
        np.testing.assert_array_equal(counts, single)


def test_cap_error():
    with pytest.raises(CoverCapError) as err:
        greedy_net(euclidean_ball(2), euclidean_ball(2), 0.01, 20_000, 6, cap=50)
    assert err.value.partial_count == 51


def test_count_at():
    radii = np.array([1.0, 0.7, 0.4, 0.1])
    assert count_at(radii, 1.0) == 1
    assert count_at(radii, 0.5) == 3
    with pytest.raises(ValueError):
        count_at(radii, 0.05)


def test_cover_radius_exhaustive(gen):
    cloud = gen.uniform(-1, 1, (500, 2))
    centers = gen.uniform(-1, 1, (7, 2))
    brute = np.linalg.norm(cloud[:, None] - centers[None], axis=2).min(1).max()
    assert cover_radius(cloud, centers, euclidean_ball(2)) == pytest.approx(brute, rel=1e-14)


def test_errors():
    with pytest.raises(ValueError):
        greedy_net(euclidean_ball(2), euclidean_ball(2), 0.0, 10, 0)
    with pytest.raises(ValueError):
        greedy_net(euclidean_ball(2), euclidean_ball(3), 0.5, 10, 0)


def test_report_csv_and_centers_file(tmp_path):
    rep = greedy_net(LpBall(2, 1.0), euclidean_ball(2), 0.5, 2000, 7)
    assert list(rep.csv_row()) == list(CoveringReport.CSV_FIELDS)
    path = tmp_path / "c.txt"
    write_centers(str(path), rep.centers)
    np.testing.assert_array_equal(np.loadtxt(path, ndmin=2), rep.centers)


# -- volume bound -----------------------------------------------------------

def test_volume_lower_trivial():
    for K in (euclidean_ball(3), LpBall(2, 0.5)):
        assert volume_lower(K, K, 1.0) == pytest.approx(1.0)
        assert volume_lower(K, K, 0.25) == pytest.approx(2 ** K.dim * volume_lower(K, K, 0.5))


def test_volume_lower_l1_disc_with_mc_volume():
    val = volume_lower(LpBall(2, 1.0), euclidean_ball(2), 0.1)
    assert val == pytest.approx(2 / (math.pi * 0.01), rel=1e-12)
    # MC area of the cross-polytope from the bounding square
    u = np.random.default_rng(8).uniform(-1, 1, (1_000_000, 2))
    hit = (np.abs(u).sum(1) <= 1).astype(float)
    area, se = 4 * hit.mean(), 4 * hit.std(ddof=1) / 1000
    mc = area / (math.pi * 0.01)
    assert abs(mc - val) <= 3 * se / (math.pi * 0.01)


def test_volume_lower_unknown():
    g = GaugeBody(2, lambda x: np.abs(x).sum(1))
    with pytest.raises(ValueError, match="no closed-form volume"):
        volume_lower(g, euclidean_ball(2), 0.5)


@pytest.mark.parametrize("K,B,t", [
    (LpBall(2, 0.5), euclidean_ball(2), 0.2),
    (euclidean_ball(3), LpBall(3, 1.0), 0.5),
    (LpBall(3, 1.0), euclidean_ball(3), 0.3),
])
def test_volume_sandwich_dense(K, B, t):
    rep = greedy_net(K, B, t, 100_000, 9)
    assert rep.volume_lower <= rep.upper_count


# -- analytic bounds --------------------------------------------------------

def test_lemma2_bound_shape():
    D = euclidean_ball(4)
    assert lemma2_bound(D, 1.0, 1e9) == pytest.approx(2.0)
    b1, b2 = lemma2_bound(D, 0.3, 1.0), lemma2_bound(D, 0.3, 2.0)
    assert math.log(b2 / 2) == pytest.approx(math.log(b1 / 2) / 4, rel=1e-12)
    assert lemma2_bound(LpBall(2, 0.5), 1.0, 100.0) == pytest.approx(2 * math.exp(2 * 2 * (4 / 100) ** 2))
    with pytest.raises(ValueError):
        lemma2_bound(D, 1.0, 0.0)
    with pytest.raises(ValueError):
        lemma2_bound(GaugeBody(4, lambda x: np.abs(x).sum(1)), 1.0, 1.0)


def test_lemma2_dominates_disc_cover():
    D = euclidean_ball(2)
    rep = greedy_net(D, D, 0.5, 50_000, 10)
    assert rep.upper_count <= rep.lemma2_bound(1.0, c_abs=2.0, a=2.0)


def test_lemma4_specializations():
    D = euclidean_ball(3)
    K = LpBall(3, 1.0)
    v = lemma4_bound(K, D, 0.4, 0.5, 2.0, 1.0, 0.7)
    assert v == pytest.approx(2 * math.exp((0.7 * 3 / 2) * (2 * 0.4 / 0.5) ** 2))
    assert lemma4_bound(K, D, 0.4, 1e9, 1.5, 1.3, 0.7) == pytest.approx(2 * 1.3 ** 3)
    p = LpBall(3, 0.5)
    assert pconvex_cover_bound(p, 0.2, 0.5, 0.3) == pytest.approx(
        2 * math.exp((0.3 * 3 / 0.5) * (2 * 0.2 / 0.5) ** 0.5))
    with pytest.raises(ValueError):
        lemma4_bound(K, D, 0.4, -1.0, 2.0, 1.0, 0.7)
    with pytest.raises(ValueError):
        pconvex_cover_bound(GaugeBody(3, lambda x: np.abs(x).sum(1)), 0.2, 0.5, 0.3)


def test_lemma4_overflow_is_inf():
    assert lemma4_bound(LpBall(2, 1.0), euclidean_ball(2), 1.0, 1e-4, 2.0, 1.0, 1.0) == math.inf


# -- absorption -------------------------------------------------------------

def test_absorption_radius_values():
    assert absorption_radius(1.0, 0.5) == 2.0
    assert absorption_radius(0.5, 0.25) == pytest.approx(4.0, rel=1e-15)
    assert absorption_radius(0.5, 1e-12) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ValueError):
        absorption_radius(1.0, 1.0)


def test_absorption_single_center():
    # centers {0} cover B by K only when B is inside K; t_r then bounds the gauge
    D = euclidean_ball(3)
    K = Scaled(LpBall(3, 1.0), math.sqrt(3))
    res = absorption_check(D, K, 0.3, np.zeros((1, 3)), cloud_size=50_000, rng=1)
    assert res.holds and res.max_gauge <= 1.0


def test_absorption_preconditions():
    D = euclidean_ball(2)
    K = LpBall(2, 1.0)
    with pytest.raises(ValueError, match="precondition violated"):
        absorption_check(D, K, 0.2, np.array([[0.5, 0.0]]), cloud_size=1000)
    with pytest.raises(ValueError, match="precondition violated"):
        absorption_check(D, Scaled(K, 0.5), 0.2, np.zeros((1, 2)), cloud_size=1000)


@pytest.mark.parametrize("p,r", [(0.5, 0.3), (1.0, 0.5)])
def test_absorption_end_to_end_small(p, r):
    D, K, rep = absorption_instance(2, p, r, 0.1, 20_000, 11)
    res = absorption_check(D, K, r, rep, cloud_size=50_000, rng=12)
    assert res.holds
    assert res.t_r == absorption_radius(p, r)


# -- entropy numbers --------------------------------------------------------

def test_entropy_e1_is_one():
    for K in (euclidean_ball(2), LpBall(2, 0.5)):
        e = entropy_number(K, K, 1, 1e-4, 20_000, 13)
        assert e.lower <= e.e_k <= e.upper and e.upper - e.lower <= 1e-4
        assert 1 - 2e-3 <= e.e_k <= 1 + 1e-4


def test_entropy_monotone_in_k():
    cloud = sample_body_uniform(euclidean_ball(2), 20_000, 14)
    vals = [entropy_number(euclidean_ball(2), LpBall(2, 1.0), k, 1e-4, 0, 0, cloud=cloud).e_k
            for k in range(1, 8)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_entropy_e2_disc_brackets_oracle():
    pts = _circle_plus_cloud()
    D = euclidean_ball(2)
    e = entropy_number(D, D, 2, 1e-4, 0, 0, cloud=pts)
    slack = 0.05 / math.sqrt(2)  # grid-center discretization of the oracle
    assert e.lower <= E2_DISC + 1e-4
    assert e.upper >= E2_DISC - slack
    assert isinstance(e, EntropyEstimate)
    assert list(e.csv_row()) == list(EntropyEstimate.CSV_FIELDS)


def test_entropy_errors():
    with pytest.raises(ValueError):
        entropy_number(euclidean_ball(2), euclidean_ball(2), 0, 1e-3, 100, 0)
    with pytest.raises(ValueError):
        entropy_number(euclidean_ball(2), euclidean_ball(2), 1, 0.0, 100, 0)

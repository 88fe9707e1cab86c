import math

import numpy as np
import pytest

from qclab.functionals import factor_A, sample_sphere
from qclab.projections import (
    JLReport,
    ProjectionOp,
    complement,
    haar_frame,
    haar_orthogonal,
    haar_projection,
    jl_concentration,
    jl_points,
    orthonormalize,
)


def test_orthonormalize_prefix_span(gen):
    g = gen.standard_normal((8, 5))
    q = orthonormalize(g)
    np.testing.assert_allclose(q.T @ q, np.eye(5), atol=1e-12)
    for j in range(1, 6):
        # columns of g[:, :j] lie in span q[:, :j]
        resid = g[:, :j] - q[:, :j] @ (q[:, :j].T @ g[:, :j])
        assert np.abs(resid).max() < 1e-12


def test_orthonormalize_redraws_collapsed(gen):
    g = gen.standard_normal((5, 3))
    g[:, 2] = g[:, 0] * 2.0
    with pytest.raises(np.linalg.LinAlgError):
        orthonormalize(g)
    q = orthonormalize(g, gen)
    np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)


def test_haar_orthogonal():
    u = haar_orthogonal(6, 3)
    np.testing.assert_allclose(u @ u.T, np.eye(6), atol=1e-12)
    assert np.array_equal(u, haar_orthogonal(6, 3))


def test_projection_invariants(gen):
    p = haar_projection(12, 5, 4)
    np.testing.assert_allclose(p.basis @ p.basis.T, np.eye(5), atol=1e-10)
    x = gen.standard_normal((10_000, 12))
    y = gen.standard_normal((10_000, 12))
    px = p.apply(x)
    nx = np.linalg.norm(x, axis=1)
    assert np.all(np.linalg.norm(p.apply(px) - px, axis=1) <= 1e-10 * nx)
    np.testing.assert_allclose(np.einsum("ij,ij->i", px, y), np.einsum("ij,ij->i", x, p.apply(y)), atol=1e-10)
    assert np.all(np.linalg.norm(px, axis=1) <= nx * (1 + 1e-10))
    np.testing.assert_allclose(p.lift(p.coords(x)), px, atol=1e-12)
    np.testing.assert_allclose(p.matrix() @ x[0], px[0], atol=1e-12)


def test_full_rank_is_identity(gen):
    p = haar_projection(7, 7, 5)
    x = gen.standard_normal((100, 7))
    np.testing.assert_allclose(np.linalg.norm(p.apply(x), axis=1), np.linalg.norm(x, axis=1), rtol=1e-12)


def test_projection_rejects_bad_basis():
    with pytest.raises(ValueError, match="orthonormal"):
        ProjectionOp(3, 2, np.array([[1.0, 0, 0], [1.0, 0, 0]]))
    with pytest.raises(ValueError):
        haar_projection(3, 0, 1)
    with pytest.raises(ValueError):
        haar_projection(3, 4, 1)


@pytest.mark.parametrize("n,k", [(5, 1), (10, 3), (20, 10), (50, 40)])
def test_projected_mass(n, k):
    # E |P theta|^2 = k/n: one projection per trial, one sphere point per trial
    trials = 100_000
    frame = haar_frame(n, k, 6)
    theta = sample_sphere(n, trials, 7)
    # fixed P with random theta has the same law as random P with fixed theta
    v = np.linalg.norm(theta @ frame.T, axis=1) ** 2 * n / k
    assert abs(v.mean() - 1.0) <= 3 * v.std(ddof=1) / math.sqrt(trials)


def test_projected_mass_random_projections():
    n, k, trials = 8, 3, 20_000
    e1 = np.eye(n)[0]
    vals = np.array([np.sum(haar_projection(n, k, t).coords(e1) ** 2) for t in range(trials)]) * n / k
    assert abs(vals.mean() - 1.0) <= 3 * vals.std(ddof=1) / math.sqrt(trials)


def test_complement(gen):
    p = haar_projection(9, 4, 8)
    q = complement(p)
    assert q.rank == 5
    x = gen.standard_normal((500, 9))
    np.testing.assert_allclose(p.apply(x) + q.apply(x), x, atol=1e-10)
    np.testing.assert_allclose(np.sum(p.coords(x) ** 2, 1) + np.sum(q.coords(x) ** 2, 1),
                               np.sum(x ** 2, 1), rtol=1e-10)
    back = complement(q)
    np.testing.assert_allclose(back.matrix(), p.matrix(), atol=1e-10)
    zero = complement(ProjectionOp.identity(4))
    assert zero.rank == 0
    np.testing.assert_array_equal(zero.apply(np.ones(4)), np.zeros(4))
    assert complement(zero).rank == 4


# -- JL harness -----------------------------------------------------------------

def test_jl_full_rank_never_fails():
    y = jl_points(30, 20, 1)
    rep = jl_concentration(y, 30, 0.01, 500, 2)
    assert rep.failures == 0 and rep.empirical_failure == 0.0


def test_jl_direction_invariance():
    n, k, eps, trials = 40, 10, 0.2, 20_000
    a = jl_concentration(np.eye(n)[:1], k, eps, trials, 3)
    b = jl_concentration(np.eye(n)[1:2] * 5.0, k, eps, trials, 4)
    sig = math.hypot(a.binomial_sigma, b.binomial_sigma)
    assert abs(a.empirical_failure - b.empirical_failure) <= 3 * sig


def test_jl_frame_matches_direct():
    y = jl_points(30, 5, 5)
    a = jl_concentration(y, 10, 0.3, 3000, 6, method="frame")
    b = jl_concentration(y, 10, 0.3, 3000, 7, method="direct")
    sig = math.hypot(a.binomial_sigma, b.binomial_sigma)
    assert abs(a.empirical_failure - b.empirical_failure) <= 3 * sig


def test_jl_monotone_shared_seed():
    n = 60
    y = jl_points(n, 10, 8)
    for k in (n // 4, n // 2, 3 * n // 4):
        rates = [jl_concentration(y, k, e, 1000, 9).empirical_failure for e in (0.3, 0.5, 0.8)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
    for e in (0.3, 0.5, 0.8):
        rates = [jl_concentration(y, k, e, 1000, 9).empirical_failure for k in (n // 4, n // 2, 3 * n // 4)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_jl_single_point_against_exact_law():
    # for one point, |P U y|^2 / |y|^2 ~ Beta(k/2, (n-k)/2)
    from scipy import stats

    n, k, eps, trials = 20, 6, 0.4, 50_000
    rep = jl_concentration(np.ones((1, n)), k, eps, trials, 10)
    a = factor_A(n, k) * math.sqrt(k / n)
    beta = stats.beta(k / 2, (n - k) / 2)
    exact = beta.cdf((a * (1 - eps)) ** 2) + beta.sf((a * (1 + eps)) ** 2)
    assert abs(rep.empirical_failure - exact) <= 3 * math.sqrt(exact * (1 - exact) / trials)


def test_jl_errors():
    with pytest.raises(ValueError, match="zero point"):
        jl_concentration(np.zeros((2, 3)), 1, 0.5, 10, 0)
    with pytest.raises(ValueError):
        jl_concentration(np.ones((2, 3)), 1, 0.0, 10, 0)
    with pytest.raises(ValueError):
        jl_concentration(np.ones((2, 3)), 1, 0.5, 0, 0)
    with pytest.raises(ValueError):
        jl_concentration(np.ones((2, 3)), 1, 0.5, 10, 0, method="other")


def test_jl_report_fields():
    r = JLReport(200, 50, 0.5, 10, 1000, 25, 7)
    assert r.empirical_failure == 0.025
    assert r.bound_failure(1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-12.5))
    assert r.in_regime(1.0) and not r.in_regime(100.0)
    assert list(r.csv_row()) == list(JLReport.CSV_FIELDS)


def test_jl_deterministic_across_workers(monkeypatch):
    y = jl_points(20, 4, 11)
    out = []
    for threads in ("1", "4"):
        monkeypatch.setenv("QCLAB_THREADS", threads)
        out.append(jl_concentration(y, 5, 0.3, 1000, 12))
    assert out[0] == out[1]

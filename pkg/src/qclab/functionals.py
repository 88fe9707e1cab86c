"""Seeded samplers and Monte Carlo estimators of scalar body functionals.

Estimators shard their sample count into blocks of :func:`~qclab.rng.shard_rows`
points; block ``i`` draws from ``rng.substream(i)`` and block moments are
merged in index order, so an estimate is a pure function of
``(seed, stream_id, count)`` whatever the worker count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaincinv, gammaln

from .bodies import Body, support_oracle
from .rng import RngStream, as_stream, combine_moments, parallel_map, shard_rows, shard_sizes

#: proposals allowed to the rejection sampler before giving up
MAX_PROPOSALS = 10 ** 8
#: largest dimension for which the bounding-box rejection sampler is allowed
REJECTION_MAX_DIM = 6


class SamplingError(RuntimeError):
    """The body cannot be sampled with the available methods."""


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo point estimate with its standard error.

    ``std_error`` is the sample standard deviation over ``sqrt(samples)``.
    Spreads at the level of floating-point rounding are reported as zero.
    """

    value: float
    std_error: float
    samples: int
    seed: int

    CSV_FIELDS = ("value", "std_error", "samples", "seed")

    @classmethod
    def from_moments(cls, n: int, mean: float, m2: float, seed: int) -> "MCEstimate":
        if n < 1:
            raise ValueError("an estimate needs at least one sample")
        sd = math.sqrt(max(m2, 0.0) / (n - 1)) if n > 1 else 0.0
        if sd <= 64.0 * np.finfo(float).eps * abs(mean):
            sd = 0.0
        return cls(float(mean), sd / math.sqrt(n), int(n), int(seed))

    @classmethod
    def from_values(cls, values: np.ndarray, seed: int) -> "MCEstimate":
        v = np.asarray(values, dtype=np.float64).ravel()
        return cls.from_moments(v.size, *_moments(v)[1:], seed=seed)

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.value - k * self.std_error, self.value + k * self.std_error

    def csv_row(self) -> dict:
        return {"value": self.value, "std_error": self.std_error,
                "samples": self.samples, "seed": self.seed}

    def __str__(self):
        return f"{self.value:.6g} +- {3 * self.std_error:.2g} (3 s.e., {self.samples} samples)"


def _moments(v: np.ndarray) -> tuple[int, float, float]:
    if v.size == 0:
        return 0, 0.0, 0.0
    mean = float(v.mean())
    d = v - mean
    return v.size, mean, float(d @ d)


def _sharded(count: int, dim: int, rng: RngStream,
             block: Callable[[int, RngStream], np.ndarray]) -> list[np.ndarray]:
    sizes = shard_sizes(count, shard_rows(dim))
    return parallel_map(lambda a: block(a[1], rng.substream(a[0])), list(enumerate(sizes)))


def _estimate(count: int, dim: int, rng, values: Callable[[int, RngStream], np.ndarray],
              min_count: int = 2) -> MCEstimate:
    if count < min_count:
        raise ValueError(f"count must be >= {min_count}, got {count}")
    rng = as_stream(rng)
    sizes = shard_sizes(count, shard_rows(dim))
    parts = parallel_map(lambda a: _moments(values(a[1], rng.substream(a[0]))), list(enumerate(sizes)))
    n, mean, m2 = combine_moments(parts)
    return MCEstimate.from_moments(n, mean, m2, rng.seed)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def _sphere_block(n: int, count: int, gen: np.random.Generator) -> np.ndarray:
    g = gen.standard_normal((count, n))
    nrm = np.sqrt(np.einsum("ij,ij->i", g, g))
    while np.any(nrm == 0.0):  # probability zero, but a zero row cannot be normalized
        bad = nrm == 0.0
        g[bad] = gen.standard_normal((int(bad.sum()), n))
        nrm = np.sqrt(np.einsum("ij,ij->i", g, g))
    return g / nrm[:, None]


def sample_sphere(n: int, count: int, rng) -> np.ndarray:
    """``count`` points from the normalized rotation-invariant measure on S^(n-1)."""
    if n < 1 or count < 1:
        raise ValueError("n and count must be positive")
    rng = as_stream(rng)
    blocks = _sharded(count, n, rng, lambda m, s: _sphere_block(n, m, s.generator()))
    return np.concatenate(blocks, axis=0)


def _exp_power_variates(p: float, size, gen: np.random.Generator,
                        method: str = "gamma") -> np.ndarray:
    """Nonnegative variates with density proportional to ``exp(-t^p)``.

    ``t = G^(1/p)`` with ``G ~ Gamma(1/p)``.  ``method="gamma"`` uses numpy's
    exact gamma generator; ``method="inverse_cdf"`` inverts the regularized
    incomplete gamma function instead (slower, kept as a cross-check).
    """
    a = 1.0 / p
    if method == "gamma":
        g = gen.standard_exponential(size) if a == 1.0 else gen.standard_gamma(a, size)
    elif method == "inverse_cdf":
        g = gammaincinv(a, gen.random(size))
    else:
        raise ValueError(f"unknown method {method!r}")
    return g if p == 1.0 else g ** (1.0 / p)


def _sample_lp_ball(n: int, p: float, count: int, gen: np.random.Generator,
                    method: str = "gamma") -> np.ndarray:
    """Exact uniform sample of the l_p unit ball, any ``p > 0``.

    Coordinates ``s_i Y_i / (sum Y_i^p + W)^(1/p)`` with ``Y_i`` from
    ``exp(-t^p)``, random signs ``s_i`` and an independent standard
    exponential ``W``.
    """
    if p == 2.0 and method == "gamma":
        # gaussian direction with radius U^(1/n): same law, cheaper
        d = _sphere_block(n, count, gen)
        r = gen.random(count) ** (1.0 / n)
        return d * r[:, None]
    y = _exp_power_variates(p, (count, n), gen, method)
    w = gen.standard_exponential(count)
    signs = gen.integers(0, 2, size=(count, n), dtype=np.int8) * 2 - 1
    if p == 1.0:
        norm = y.sum(axis=1) + w
    else:
        norm = ((y ** p).sum(axis=1) + w) ** (1.0 / p)
    return signs * (y / norm[:, None])


def _bounding_radius(body: Body, probes: int = 20_000) -> float:
    gen = RngStream(0xB0C5, 1).generator()
    d = _sphere_block(body.dim, probes, gen)
    g = body.gauge(d)
    if np.any(g <= 0):
        raise SamplingError("gauge vanishes on the sphere: body is unbounded")
    # radial function probed on a finite set; pad by 50% for the unprobed gaps
    return 1.5 / float(g.min())


def _rejection_block(body: Body, count: int, radius: float, gen: np.random.Generator,
                     budget: int) -> tuple[np.ndarray, int]:
    n = body.dim
    out = []
    have = 0
    used = 0
    batch = max(1024, 4 * count)
    while have < count:
        if used >= budget:
            raise SamplingError("body too thin for rejection sampling")
        m = min(batch, budget - used)
        prop = gen.uniform(-radius, radius, size=(m, n))
        used += m
        keep = prop[body.gauge(prop) <= 1.0]
        out.append(keep[: count - have])
        have += min(len(keep), count - have)
    return np.concatenate(out, axis=0), used


def sample_body_uniform(body: Body, count: int, rng) -> np.ndarray:
    """``count`` points uniformly distributed in ``body``.

    Exact samplers are used for l_p balls, ellipsoids and their images;
    other bodies of dimension <= 6 fall back to rejection from a bounding
    box, limited to ``MAX_PROPOSALS`` proposals in total.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    rng = as_stream(rng)
    if body.has_exact_sampler:
        return np.concatenate(
            _sharded(count, body.dim, rng, lambda m, s: body.sample_uniform(m, s.generator())), axis=0)
    if body.dim > REJECTION_MAX_DIM:
        raise SamplingError(f"no exact sampler for {body.label} and dim {body.dim} > {REJECTION_MAX_DIM}")
    radius = _bounding_radius(body)
    sizes = shard_sizes(count, shard_rows(body.dim))
    budget = MAX_PROPOSALS // max(1, len(sizes))
    blocks = parallel_map(
        lambda a: _rejection_block(body, a[1], radius, rng.substream(a[0]).generator(), budget)[0],
        list(enumerate(sizes)))
    return np.concatenate(blocks, axis=0)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def estimate_M(body: Body, count: int, rng) -> MCEstimate:
    """Mean of the gauge over the euclidean unit sphere."""
    n = body.dim
    return _estimate(count, n, rng, lambda m, s: body.gauge(_sphere_block(n, m, s.generator())))


def estimate_M_star(body: Body, count: int, rng, cloud_size: int = 100_000) -> MCEstimate:
    """Mean support function over the sphere (M of the polar body).

    For non-convex bodies this is the value for the convex hull.
    """
    n = body.dim
    stream = as_stream(rng)
    h = support_oracle(body, cloud_size, stream.substream(0xC10D))
    return _estimate(count, n, stream, lambda m, s: h(_sphere_block(n, m, s.generator())))


def estimate_MKB(K: Body, B: Body, count: int, rng) -> MCEstimate:
    """Mean B-gauge of a uniform point of K; with ``B = D`` this is M-tilde of K."""
    if K.dim != B.dim:
        raise ValueError(f"dimension mismatch: {K.dim} vs {B.dim}")
    stream = as_stream(rng)
    if K.has_exact_sampler:
        return _estimate(count, K.dim, stream,
                         lambda m, s: B.gauge(K.sample_uniform(m, s.generator())))
    pts = sample_body_uniform(K, count, stream)
    return MCEstimate.from_values(B.gauge(pts), stream.seed)


def estimate_M_tilde(K: Body, count: int, rng) -> MCEstimate:
    """Mean euclidean norm of a uniform point of K."""
    from .bodies import euclidean_ball

    return estimate_MKB(K, euclidean_ball(K.dim), count, rng)


def factor_A(n: int, k: int) -> float:
    """``sqrt(n/k) * E |(x_1..x_k)|`` for x uniform on S^(n-1), via log-gamma.

    Equals ``sqrt(n/k) G((k+1)/2) G(n/2) / (G(k/2) G((n+1)/2))``.
    """
    n, k = int(n), int(k)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    if k == n:
        return 1.0
    log_a = (0.5 * (math.log(n) - math.log(k)) + gammaln((k + 1) / 2.0) + gammaln(n / 2.0)
             - gammaln(k / 2.0) - gammaln((n + 1) / 2.0))
    return float(math.exp(log_a))


def c_theta_ratios(body: Body, theta: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-pair ratios whose supremum defines c_theta.

    ``((|x+y|^t + |x-y|^t) / (2 (|x|^t + |y|^t)))^(1/t)`` in the body's gauge;
    pairs with ``x = y = 0`` are dropped.
    """
    t = float(theta)
    den = 2.0 * (body.gauge(x) ** t + body.gauge(y) ** t)
    num = body.gauge(x + y) ** t + body.gauge(x - y) ** t
    ok = den > 0
    return (num[ok] / den[ok]) ** (1.0 / t)


_PAIR_CHUNK = 4096


def estimate_c_theta(body: Body, theta: float, budget: int, rng) -> float:
    """Lower estimate of the best constant c_theta of the body.

    Sup of :func:`c_theta_ratios` over the pairs ``(x, 0)`` (ratio 1), the
    coordinate pairs ``(e_i, e_j)`` and ``budget`` gaussian pairs drawn in
    fixed chunks, so the estimate is nondecreasing in ``budget``.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    n = body.dim
    stream = as_stream(rng)
    best = 1.0
    m = min(n, 32)
    eye = np.eye(n)[:m]
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    cx, cy = eye[ii.ravel()], eye[jj.ravel()]
    best = max(best, float(c_theta_ratios(body, theta, cx, cy).max()))
    done, chunk = 0, 0
    while done < budget:
        m = min(_PAIR_CHUNK, budget - done)
        g = stream.substream(chunk).generator().standard_normal((2, _PAIR_CHUNK, n))[:, :m]
        r = c_theta_ratios(body, theta, g[0], g[1])
        if r.size:
            best = max(best, float(r.max()))
        done += m
        chunk += 1
    return best


def mean_norm(body: Body, count: int, rng) -> tuple[float, Optional[MCEstimate]]:
    """M-tilde of the body: the closed form when known, else an MC estimate."""
    exact = body.mean_norm_exact()
    if exact is not None:
        return exact, None
    est = estimate_M_tilde(body, count, rng)
    return est.value, est

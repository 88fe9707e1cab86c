"""Covering numbers, entropy numbers and the analytic covering bounds.

``N(K, tB)`` is estimated on a finite uniform cloud of K by farthest-point
traversal started at the origin: each new center is the cloud point farthest
(in the B-gauge) from the centers chosen so far, ties going to the lowest
index.  The traversal order does not depend on ``t``, so the count is
nonincreasing in ``t`` and one traversal answers every radius.  Cloud counts
under-estimate the true covering number; compare them only against upper
bounds, or against exact oracles at tiny dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import ConvexHull, QhullError

from . import kernels
from .bodies import Body, LpBall, PConvex, Scaled, euclidean_ball, is_convex, sum_constant
from .functionals import sample_body_uniform
from .rng import as_stream

DEFAULT_CAP = 10 ** 6
CERT_TOL = 1e-9


class CoverCapError(RuntimeError):
    """Center cap exceeded; ``partial_count`` is a certified lower bound on the cloud cover."""

    def __init__(self, partial_count: int, cap: int):
        super().__init__(f"covering needs more than {cap} centers (partial count {partial_count})")
        self.partial_count = partial_count
        self.cap = cap


# ---------------------------------------------------------------------------
# traversal
# ---------------------------------------------------------------------------


def _distance_fn(B: Body) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    form = B.lp_form()
    if form is None:
        return lambda pts, c: B.gauge(pts - c)
    T, p = form
    return lambda pts, c: LpBall(B.dim, p).gauge((pts - c) @ T.T)


def traverse(cloud: np.ndarray, B: Body, t_stop: float, max_centers: int):
    """Farthest-point traversal of ``cloud`` under the B-gauge.

    Returns ``(idx, radii, mind)`` as :func:`qclab.kernels.farthest_point_traversal`.
    Bodies whose gauge is ``||T x||_p`` go through the compiled kernel.
    """
    form = B.lp_form()
    if form is not None:
        T, p = form
        mapped = np.ascontiguousarray(cloud @ T.T)
        return kernels.farthest_point_traversal(mapped, float(p), float(t_stop), int(max_centers))
    n = cloud.shape[0]
    mind = B.gauge(cloud)
    best = int(np.argmax(mind))
    idx, radii = [], [float(mind[best])]
    while radii[-1] > t_stop and len(idx) < max_centers:
        idx.append(best)
        np.minimum(mind, B.gauge(cloud - cloud[best]), out=mind)
        best = int(np.argmax(mind))
        radii.append(float(mind[best]))
    return np.asarray(idx, dtype=np.int64), np.asarray(radii), mind


def count_at(radii: np.ndarray, t: float) -> int:
    """Centers (origin included) the traversal needs to reach radius ``t``."""
    below = np.flatnonzero(radii <= t)
    if below.size == 0:
        raise ValueError("traversal stopped before reaching radius t")
    return int(below[0]) + 1


def cover_radius(cloud: np.ndarray, centers: np.ndarray, B: Body, chunk: int = 64) -> float:
    """Max over cloud points of the B-distance to the nearest center (exhaustive)."""
    dist = _distance_fn(B)
    mind = np.full(cloud.shape[0], np.inf)
    for c in np.atleast_2d(centers):
        np.minimum(mind, dist(cloud, c), out=mind)
    return float(mind.max()) if mind.size else 0.0


# ---------------------------------------------------------------------------
# k-center reduction
# ---------------------------------------------------------------------------


def _one_center(pts: np.ndarray, B: Body, K: Body) -> np.ndarray:
    if is_convex(B) and pts.shape[1] > 1 and pts.shape[0] > pts.shape[1] + 1:
        # a convex gauge attains its max over the cluster at a hull vertex
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    start = 0.5 * (lo + hi)
    if pts.shape[1] > 1 and pts.shape[0] > 1:
        f = lambda c: float(B.gauge(pts - c).max())  # noqa: E731
        res = minimize(f, start, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400 * pts.shape[1]})
        c = res.x if res.fun <= f(start) else start
    else:
        c = start
    g = float(K.gauge(c))
    return c / g if g > 1.0 else c


def _assign(cloud: np.ndarray, centers: np.ndarray, B: Body) -> tuple[np.ndarray, np.ndarray]:
    dist = _distance_fn(B)
    d = np.stack([dist(cloud, c) for c in centers], axis=1)
    a = np.argmin(d, axis=1)
    return a, d[np.arange(cloud.shape[0]), a]


def _minimax_lloyd(cloud, centers, B, K, t, iters):
    centers = centers.copy()
    for _ in range(iters):
        a, d = _assign(cloud, centers, B)
        if d.max() <= t:
            return True, centers
        for j in range(centers.shape[0]):
            members = cloud[a == j]
            if members.shape[0]:
                centers[j] = _one_center(members, B, K)
    a, d = _assign(cloud, centers, B)
    return bool(d.max() <= t), centers


def reduce_centers(cloud: np.ndarray, centers: np.ndarray, B: Body, K: Body, t: float,
                   attempts: int = 8, iters: int = 12) -> np.ndarray:
    """Try to drop centers one at a time, re-optimizing the rest (minimax Lloyd).

    A removal is accepted only if the re-optimized centers still cover the
    whole cloud within ``t`` and stay inside K.
    """
    current = np.array(centers, dtype=np.float64)
    while current.shape[0] > 1:
        a, _ = _assign(cloud, current, B)
        order = np.argsort(np.bincount(a, minlength=current.shape[0]), kind="stable")
        for j in order[:attempts]:
            trial = np.delete(current, j, axis=0)
            ok, moved = _minimax_lloyd(cloud, trial, B, K, t, iters)
            if ok and np.all(K.gauge(moved) <= 1.0 + CERT_TOL):
                current = moved
                break
        else:
            break
    return current


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class CoveringReport:
    """A covering of a cloud of K by translates ``x_i + tB``.

    ``greedy_count`` is the farthest-point count; ``upper_count`` the final
    count (smaller only when reduction ran).  ``radius`` is the exhaustively
    re-checked covering radius of the final centers.
    """

    outer: Body
    inner: Body
    t: float
    centers: np.ndarray
    upper_count: int
    greedy_count: int
    radius: float
    cloud_size: int
    seed: int
    volume_lower: Optional[float] = None
    cloud: Optional[np.ndarray] = field(default=None, repr=False)

    CSV_FIELDS = ("outer", "inner", "n", "t", "upper_count", "greedy_count", "radius",
                  "volume_lower", "cloud_size", "seed")

    @property
    def n(self) -> int:
        return self.outer.dim

    def lemma2_bound(self, M_K: float, c_abs: float = 2.0, a: Optional[float] = None) -> float:
        return lemma2_bound(self.inner, M_K, self.t, c_abs, a)

    def lemma4_bound(self, M_KB: float, c_abs: float, theta: float, c_theta: float,
                     a: Optional[float] = None) -> float:
        return lemma4_bound(self.outer, self.inner, M_KB, self.t, theta, c_theta, c_abs, a)

    def certificate(self, tol: float = CERT_TOL) -> bool:
        if self.cloud is None:
            raise ValueError("report was built without keeping its cloud")
        return cover_radius(self.cloud, self.centers, self.inner) <= self.t + tol

    def csv_row(self) -> dict:
        return {"outer": self.outer.label, "inner": self.inner.label, "n": self.n, "t": self.t,
                "upper_count": self.upper_count, "greedy_count": self.greedy_count,
                "radius": self.radius,
                "volume_lower": "" if self.volume_lower is None else self.volume_lower,
                "cloud_size": self.cloud_size, "seed": self.seed}


def greedy_net(K: Body, B: Body, t: float, cloud_size: int, rng, cap: int = DEFAULT_CAP,
               refine: bool = False, cloud: Optional[np.ndarray] = None) -> CoveringReport:
    """Cover a uniform cloud of K by translates of tB with centers in K.

    Centers are the origin followed by farthest-point picks, so they are
    t-separated in the B-gauge.  With ``refine=True`` (meant for dim <= 3)
    :func:`reduce_centers` then tries to shrink the center set.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if K.dim != B.dim:
        raise ValueError(f"dimension mismatch: {K.dim} vs {B.dim}")
    stream = as_stream(rng)
    if cloud is None:
        cloud = sample_body_uniform(K, cloud_size, stream)
    idx, radii, _ = traverse(cloud, B, t, cap)
    if radii[-1] > t:
        raise CoverCapError(len(idx) + 1, cap)
    centers = np.vstack([np.zeros((1, K.dim)), cloud[idx]])
    greedy = centers.shape[0]
    if refine:
        centers = reduce_centers(cloud, centers, B, K, t)
    radius = cover_radius(cloud, centers, B)
    try:
        vol = volume_lower(K, B, t)
    except ValueError:
        vol = None
    return CoveringReport(K, B, float(t), centers, centers.shape[0], greedy, radius,
                          cloud.shape[0], stream.seed, vol, cloud)


def covering_counts(K: Body, B: Body, ts, cloud_size: int, rng,
                    cloud: Optional[np.ndarray] = None) -> np.ndarray:
    """Greedy counts for several radii from a single traversal."""
    ts = np.asarray(ts, dtype=np.float64)
    if cloud is None:
        cloud = sample_body_uniform(K, cloud_size, as_stream(rng))
    _, radii, _ = traverse(cloud, B, float(ts.min()), DEFAULT_CAP)
    return np.array([count_at(radii, t) for t in ts])


def write_centers(path: str, centers: np.ndarray) -> None:
    """Dump centers as a plain-text points file, one point per row."""
    np.savetxt(path, np.atleast_2d(centers), fmt="%.17g")


# ---------------------------------------------------------------------------
# analytic bounds
# ---------------------------------------------------------------------------


def volume_lower(K: Body, B: Body, t: float) -> float:
    """Volumetric lower bound ``|K| / |tB|`` for ``N(K, tB)``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    lk, lb = K.log_volume(), B.log_volume()
    if lk is None or lb is None:
        raise ValueError("no closed-form volume")
    return float(np.exp(lk - lb - K.dim * math.log(t)))


def _exp_or_inf(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def _class_constant(body: Body, a: Optional[float], what: str) -> float:
    if a is not None:
        return float(a)
    c = sum_constant(body.convexity)
    if c is None:
        raise ValueError(f"{what}: star body needs an explicit constant a")
    return c


def lemma2_bound(K: Body, M_K: float, t: float, c_abs: float = 2.0,
                 a: Optional[float] = None) -> float:
    """``2 exp(c_abs n (a M_K / t)^2)``, upper bound for ``N(D, tK)``.

    ``a`` (with ``K - K`` inside ``aK``) defaults to the value implied by the
    body's class: 2 when convex, ``2^(1/p)`` when p-convex, c when
    quasi-convex.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not M_K > 0:
        raise ValueError(f"M_K must be positive, got {M_K}")
    a = _class_constant(K, a, "lemma2_bound")
    return 2.0 * _exp_or_inf(c_abs * K.dim * (a * M_K / t) ** 2)


def log_lemma4_bound(K: Body, B: Body, M_KB: float, t: float, theta: float, c_theta: float,
                     c_abs: float, a: Optional[float] = None) -> float:
    for name, v in (("M_KB", M_KB), ("t", t), ("theta", theta), ("c_theta", c_theta), ("c_abs", c_abs)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    a = _class_constant(B, a, "lemma4_bound")
    n = K.dim
    return math.log(2.0) + n * math.log(c_theta) + (c_abs * n / theta) * (a * M_KB / t) ** theta


def lemma4_bound(K: Body, B: Body, M_KB: float, t: float, theta: float, c_theta: float,
                 c_abs: float, a: Optional[float] = None) -> float:
    """``2 c_theta^n exp((c_abs n / theta) (a M(K,B) / t)^theta)``, bound for ``N(K, tB)``.

    ``a`` (with ``B + B`` inside ``aB``) defaults to the value implied by B's class.
    """
    return _exp_or_inf(log_lemma4_bound(K, B, M_KB, t, theta, c_theta, c_abs, a))


def pconvex_cover_bound(K: Body, M_tilde: float, t: float, c_abs: float) -> float:
    """``2 exp((c n / p)(2 M-tilde / t)^p)`` for a p-convex K covered by euclidean balls."""
    if not isinstance(K.convexity, PConvex):
        raise ValueError("pconvex_cover_bound needs a p-convex body")
    p = K.convexity.p
    return lemma4_bound(K, euclidean_ball(K.dim), M_tilde, t, p, 1.0, c_abs, a=2.0)


# ---------------------------------------------------------------------------
# absorption
# ---------------------------------------------------------------------------


class Absorption(NamedTuple):
    holds: bool
    t_r: float
    max_gauge: float


def absorption_radius(p: float, r: float) -> float:
    """``(1 - r^p)^(-1/p)``."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    return (1.0 - r ** p) ** (-1.0 / p)


def absorption_check(B: Body, K: Body, r: float, covering, cloud_size: int = 200_000,
                     rng=0, tol: float = 1e-9) -> Absorption:
    """Check that ``B`` lies in ``t_r K`` given a covering of B by translates of K.

    ``covering`` is a :class:`CoveringReport` or an array of centers; the
    centers must lie in ``rB`` and ``x_i + K`` must cover a dense uniform
    sample of B, otherwise ``ValueError("precondition violated ...")``.
    """
    if not isinstance(K.convexity, PConvex):
        raise ValueError("absorption_check needs a p-convex K")
    t_r = absorption_radius(K.convexity.p, r)
    centers = covering.centers if isinstance(covering, CoveringReport) else np.atleast_2d(covering)
    if np.any(B.gauge(centers) > r + tol):
        raise ValueError("precondition violated: covering centers not in rB")
    sample = sample_body_uniform(B, cloud_size, as_stream(rng))
    if cover_radius(sample, centers, K) > 1.0 + tol:
        raise ValueError("precondition violated: translates of K do not cover B")
    max_gauge = float(K.gauge(sample).max())
    return Absorption(bool(max_gauge <= t_r + tol), t_r, max_gauge)


def absorption_instance(n: int, p: float, r: float, net: float, cloud_size: int, rng):
    """Covering of D by translates of a scaled l_p ball with centers in rD.

    Centers are a ``net``-net of rD; the l_p ball is scaled to contain
    ``(1 - r + 2 net) D``, which makes the translates cover D.  Returns
    ``(D, K, report)``.
    """
    stream = as_stream(rng)
    D = euclidean_ball(n)
    s = (1.0 - r + 2.0 * net) * n ** max(0.0, 1.0 / p - 0.5)
    K = Scaled(LpBall(n, p), s)
    report = greedy_net(Scaled(D, r), D, net, cloud_size, stream.substream(1))
    return D, K, report


# ---------------------------------------------------------------------------
# entropy numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyEstimate:
    """Entropy number ``e_k`` bracketed by bisection on greedy counts."""

    k: int
    e_k: float
    lower: float
    upper: float

    CSV_FIELDS = ("k", "e_k", "lower", "upper")

    def csv_row(self) -> dict:
        return {"k": self.k, "e_k": self.e_k, "lower": self.lower, "upper": self.upper}


def entropy_number(K_outer: Body, K_inner: Body, k: int, tol: float, cloud_size: int, rng,
                   cloud: Optional[np.ndarray] = None) -> EntropyEstimate:
    """``inf{eps : N(K_outer, eps K_inner) <= 2^(k-1)}`` with greedy counts as the N-oracle."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if cloud is None:
        cloud = sample_body_uniform(K_outer, cloud_size, as_stream(rng))
    budget = 2 ** (k - 1)
    _, radii, _ = traverse(cloud, K_inner, 0.0, budget - 1)
    lo, hi = 0.0, float(radii[0]) + tol
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        # origin plus j centers reach radius radii[j]; j < budget keeps the count <= 2^(k-1)
        if (radii[:budget] <= mid).any():
            hi = mid
        else:
            lo = mid
    return EntropyEstimate(int(k), 0.5 * (lo + hi), lo, hi)

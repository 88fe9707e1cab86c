"""Symmetric star bodies given by gauge oracles.

A body is described by its gauge (Minkowski functional)
``||x||_K = inf{s > 0 : x in sK}`` together with a declared convexity class.
Concrete bodies (l_p balls, ellipsoids) also know their volume, support
function and an exact uniform sampler; the algebra (:class:`Scaled`,
:class:`LinearImage`) propagates all of these.

All ``gauge`` methods are vectorized over leading axes: an ``(..., n)`` array
maps to an ``(...)`` array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import gammaln

from .rng import RngStream, as_stream

# ---------------------------------------------------------------------------
# convexity classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Star:
    """No convexity assumption beyond being a symmetric star body."""

    def __str__(self):
        return "star"


@dataclass(frozen=True)
class QuasiConvex:
    """``K + K`` is contained in ``c K``."""

    c: float

    def __post_init__(self):
        if not self.c >= 1.0:
            raise ValueError(f"quasi-convexity constant must be >= 1, got {self.c}")

    def __str__(self):
        return f"quasiconvex(c={self.c:g})"


@dataclass(frozen=True)
class PConvex:
    """Gauge satisfies the p-triangle inequality; ``p = 1`` is convex."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p-convexity exponent must lie in (0, 1], got {self.p}")

    def __str__(self):
        return "convex" if self.p == 1.0 else f"pconvex(p={self.p:g})"


Convexity = Union[Star, QuasiConvex, PConvex]

CONVEX = PConvex(1.0)


def sum_constant(cls: Convexity) -> Optional[float]:
    """Constant ``a`` with ``K + K`` inside ``a K`` implied by the class (None for Star)."""
    if isinstance(cls, PConvex):
        return 2.0 ** (1.0 / cls.p)
    if isinstance(cls, QuasiConvex):
        return cls.c
    return None


def is_convex(body: "Body") -> bool:
    return isinstance(body.convexity, PConvex) and body.convexity.p == 1.0


# ---------------------------------------------------------------------------
# bodies
# ---------------------------------------------------------------------------


class Body:
    """Base class: a centrally symmetric compact star body in R^dim.

    Subclasses implement :meth:`gauge`; the optional hooks return ``None``
    when a closed form is not available.
    """

    dim: int
    convexity: Convexity
    label: str

    def gauge(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def support(self, u: np.ndarray) -> Optional[np.ndarray]:
        """Closed-form support function of the convex hull, if known."""
        return None

    def log_volume(self) -> Optional[float]:
        return None

    def sample_uniform(self, count: int, gen: np.random.Generator) -> Optional[np.ndarray]:
        """Exact uniform sampler, if one exists for this body."""
        return None

    @property
    def has_exact_sampler(self) -> bool:
        return False

    def lp_form(self) -> Optional[tuple[np.ndarray, float]]:
        """``(T, p)`` with ``gauge(x) == ||T x||_p``, if the gauge has that form."""
        return None

    def mean_norm_exact(self) -> Optional[float]:
        """Closed-form mean euclidean norm of a uniform point, if known."""
        return None

    def __repr__(self):
        return f"<{type(self).__name__} {self.label} [{self.convexity}]>"


class LpBall(Body):
    """Unit ball of ``(sum |x_i|^p)^(1/p)`` in R^n, for any ``p > 0``."""

    def __init__(self, n: int, p: float):
        n = int(n)
        p = float(p)
        if n < 1:
            raise ValueError(f"dimension must be positive, got {n}")
        if not (0.0 < p < math.inf):
            raise ValueError(f"p must be a positive finite real, got {p}")
        self.dim = n
        self.p = p
        self.convexity = PConvex(min(p, 1.0))
        self.label = f"lp(p={p:g},n={n})"

    def gauge(self, x):
        x = np.asarray(x, dtype=np.float64)
        a = np.abs(x)
        p = self.p
        if p == 2.0:
            return np.sqrt(np.einsum("...i,...i->...", x, x))
        if p == 1.0:
            return a.sum(axis=-1)
        return (a ** p).sum(axis=-1) ** (1.0 / p)

    def support(self, u):
        u = np.abs(np.asarray(u, dtype=np.float64))
        p = self.p
        if p <= 1.0:
            # conv(B_p) = B_1 for p <= 1, whose support function is the max norm
            return u.max(axis=-1)
        if p == 2.0:
            return np.sqrt(np.einsum("...i,...i->...", u, u))
        q = p / (p - 1.0)
        return (u ** q).sum(axis=-1) ** (1.0 / q)

    def log_volume(self):
        n, p = self.dim, self.p
        return n * (math.log(2.0) + float(gammaln(1.0 + 1.0 / p))) - float(gammaln(1.0 + n / p))

    has_exact_sampler = True

    def sample_uniform(self, count, gen):
        from .functionals import _sample_lp_ball

        return _sample_lp_ball(self.dim, self.p, count, gen)

    def lp_form(self):
        return np.eye(self.dim), self.p

    def mean_norm_exact(self):
        if self.p == 2.0:
            return self.dim / (self.dim + 1.0)
        return None


class Ellipsoid(Body):
    """Ellipsoid ``{x : x^T M x <= 1}`` for a symmetric positive-definite ``M``."""

    def __init__(self, shape, label: Optional[str] = None):
        m = np.atleast_2d(np.asarray(shape, dtype=np.float64))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"shape matrix must be square, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("shape matrix has non-finite entries")
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-14):
            raise ValueError("shape matrix must be symmetric")
        m = 0.5 * (m + m.T)
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise ValueError("shape matrix must be positive definite") from None
        self.dim = m.shape[0]
        self.shape = m
        self._chol = chol
        self._identity = bool(np.array_equal(m, np.eye(self.dim)))
        self.convexity = CONVEX
        if label is None:
            if np.array_equal(m, np.diag(np.diag(m))):
                label = "ellipsoid(diag=" + ",".join(f"{v:g}" for v in np.diag(m)) + ")"
            else:
                label = f"ellipsoid(n={self.dim})"
        self.label = label

    @classmethod
    def euclidean(cls, n: int) -> "Ellipsoid":
        return cls(np.eye(int(n)))

    @classmethod
    def from_diag(cls, diag) -> "Ellipsoid":
        return cls(np.diag(np.asarray(diag, dtype=np.float64)))

    def gauge(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = x if self._identity else x @ self._chol
        return np.sqrt(np.einsum("...i,...i->...", y, y))

    def support(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self._identity:
            w = u
        else:
            # ||L^{-1} u|| with M = L L^T
            w = np.linalg.solve(self._chol, u.reshape(-1, self.dim).T).T.reshape(u.shape)
        return np.sqrt(np.einsum("...i,...i->...", w, w))

    def log_volume(self):
        n = self.dim
        log_ball = 0.5 * n * math.log(math.pi) - float(gammaln(1.0 + 0.5 * n))
        _, logdet = np.linalg.slogdet(self.shape)
        return log_ball - 0.5 * float(logdet)

    has_exact_sampler = True

    def sample_uniform(self, count, gen):
        from .functionals import _sample_lp_ball

        z = _sample_lp_ball(self.dim, 2.0, count, gen)
        if self._identity:
            return z
        # x = L^{-T} z gives x^T M x = |z|^2
        return np.linalg.solve(self._chol.T, z.T).T

    def lp_form(self):
        return self._chol.T.copy(), 2.0

    def mean_norm_exact(self):
        if self._identity:
            return self.dim / (self.dim + 1.0)
        return None


class Scaled(Body):
    """Dilation ``t K`` of a body ``K`` (``t > 0``)."""

    def __init__(self, base: Body, t: float):
        t = float(t)
        if not (t > 0.0 and math.isfinite(t)):
            raise ValueError(f"scale factor must be positive and finite, got {t}")
        self.base = base
        self.t = t
        self.dim = base.dim
        self.convexity = base.convexity
        self.label = f"scale({base.label},{t:g})"

    def gauge(self, x):
        return self.base.gauge(x) / self.t

    def support(self, u):
        h = self.base.support(u)
        return None if h is None else self.t * h

    def log_volume(self):
        lv = self.base.log_volume()
        return None if lv is None else lv + self.dim * math.log(self.t)

    @property
    def has_exact_sampler(self):
        return self.base.has_exact_sampler

    def sample_uniform(self, count, gen):
        s = self.base.sample_uniform(count, gen)
        return None if s is None else self.t * s

    def lp_form(self):
        f = self.base.lp_form()
        return None if f is None else (f[0] / self.t, f[1])

    def mean_norm_exact(self):
        m = self.base.mean_norm_exact()
        return None if m is None else self.t * m


class LinearImage(Body):
    """Image ``A K`` of a body under an invertible matrix ``A``."""

    def __init__(self, base: Body, matrix, source: Optional[str] = None):
        a = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if a.shape != (base.dim, base.dim):
            raise ValueError(f"matrix must be {base.dim}x{base.dim}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        if np.linalg.cond(a) > 1e12:
            raise ValueError("matrix is singular or numerically rank-deficient")
        self.base = base
        self.matrix = a
        self._inv = np.linalg.inv(a)
        self.dim = base.dim
        self.convexity = base.convexity
        self.label = f"linimg({base.label},{source if source else 'matrix'})"

    def gauge(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.base.gauge(x @ self._inv.T)

    def support(self, u):
        u = np.asarray(u, dtype=np.float64)
        return self.base.support(u @ self.matrix)

    def log_volume(self):
        lv = self.base.log_volume()
        if lv is None:
            return None
        return lv + float(np.linalg.slogdet(self.matrix)[1])

    @property
    def has_exact_sampler(self):
        return self.base.has_exact_sampler

    def sample_uniform(self, count, gen):
        s = self.base.sample_uniform(count, gen)
        return None if s is None else s @ self.matrix.T

    def lp_form(self):
        f = self.base.lp_form()
        return None if f is None else (f[0] @ self._inv, f[1])


class GaugeBody(Body):
    """Body defined by an arbitrary vectorized gauge callable.

    The callable must accept an ``(m, n)`` array and return ``(m,)`` values.
    Construction probes the coordinate axes plus 1000 random sphere directions
    and rejects the body if the gauge drops below ``1e-9`` anywhere (an
    unbounded body).
    """

    PROBE_DIRECTIONS = 1000
    PROBE_FLOOR = 1e-9

    def __init__(self, dim: int, fn: Callable[[np.ndarray], np.ndarray],
                 convexity: Convexity = Star(), label: str = "gauge"):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        self._fn = fn
        self.convexity = convexity
        self.label = label
        gen = RngStream(0x9E3779B97F4A7C15).generator()
        g = gen.standard_normal((self.PROBE_DIRECTIONS, self.dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        g = np.vstack([np.eye(self.dim), g])
        vals = np.asarray(fn(g), dtype=np.float64)
        if vals.shape != (len(g),):
            raise ValueError("gauge callable must map (m, n) arrays to (m,) arrays")
        if not np.all(np.isfinite(vals)) or vals.min() < self.PROBE_FLOOR:
            raise ValueError("gauge vanishes on the unit sphere: body is unbounded")

    def gauge(self, x):
        x = np.asarray(x, dtype=np.float64)
        flat = x.reshape(-1, self.dim)
        return np.asarray(self._fn(flat), dtype=np.float64).reshape(x.shape[:-1])


def euclidean_ball(n: int) -> Ellipsoid:
    """The standard euclidean ball D in R^n."""
    return Ellipsoid.euclidean(n)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _check_points(body: Body, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != body.dim:
        raise ValueError(f"point dimension {x.shape[-1] if x.ndim else 0} does not match body dimension {body.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return x


def gauge(body: Body, x) -> Union[float, np.ndarray]:
    """Checked gauge evaluation; returns a float for a single point."""
    x = _check_points(body, x)
    g = body.gauge(x)
    return float(g) if x.ndim == 1 else g


def support_oracle(body: Body, cloud_size: int = 100_000,
                   seed: Union[RngStream, int, None] = 0) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized support function ``u -> h(u)`` of the convex hull of the body.

    Uses the closed form when the body has one; otherwise takes the max of
    ``<u, x>`` over a uniform cloud pushed radially onto the boundary, which
    converges from below as ``cloud_size`` grows.
    """
    if body.support(np.ones(body.dim)) is not None:
        return body.support
    from .functionals import sample_body_uniform

    cloud = sample_body_uniform(body, cloud_size, as_stream(seed))
    g = body.gauge(cloud)
    keep = g > 0
    cloud = cloud[keep] / g[keep, None]

    def h(u):
        u = np.asarray(u, dtype=np.float64)
        flat = u.reshape(-1, body.dim)
        out = np.empty(flat.shape[0])
        for s in range(0, flat.shape[0], 256):
            out[s:s + 256] = (flat[s:s + 256] @ cloud.T).max(axis=1)
        return out.reshape(u.shape[:-1])

    return h


def support_function(body: Body, u, cloud_size: int = 100_000,
                     seed: Union[RngStream, int, None] = 0) -> Union[float, np.ndarray]:
    """Support function ``h(u) = sup_{x in K} <u, x>`` (of the convex hull of K)."""
    u = _check_points(body, u)
    if np.any(np.all(u == 0.0, axis=-1)):
        raise ValueError("support function needs a nonzero direction")
    h = support_oracle(body, cloud_size, seed)(u)
    return float(h) if u.ndim == 1 else h


def _pair_ratio_max(body: Body, x: np.ndarray, y: np.ndarray) -> float:
    den = np.maximum(body.gauge(x), body.gauge(y))
    num = body.gauge(x + y)
    ok = den > 0
    if not np.any(ok):
        return 1.0
    return float((num[ok] / den[ok]).max())


def _coordinate_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (e_i, +-e_j); all index pairs for n <= 32, cyclic neighbours beyond."""
    if n <= 32:
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
    else:
        ii = np.concatenate([np.arange(n), np.arange(n)])
        jj = np.concatenate([np.arange(n), (np.arange(n) + 1) % n])
    eye = np.eye(n)
    x = np.concatenate([eye[ii], eye[ii]])
    y = np.concatenate([eye[jj], -eye[jj]])
    return x, y


_PAIR_CHUNK = 4096


def quasi_constant(body: Body, budget: int = 10_000,
                   seed: Union[RngStream, int, None] = 0) -> float:
    """Lower estimate of the smallest c with ``||x+y|| <= c max(||x||, ||y||)``.

    Sup of the ratio over the deterministic pairs ``(x, x)`` and
    ``(e_i, +-e_j)`` and ``budget`` gaussian random pairs.  Random pairs are
    drawn in fixed chunks so a larger budget sees a superset of pairs.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    n = body.dim
    stream = as_stream(seed)
    x, y = _coordinate_pairs(n)
    best = max(2.0, _pair_ratio_max(body, x, y))
    done = 0
    chunk = 0
    while done < budget:
        m = min(_PAIR_CHUNK, budget - done)
        gen = stream.substream(chunk).generator()
        g = gen.standard_normal((2, _PAIR_CHUNK, n))[:, :m]
        best = max(best, _pair_ratio_max(body, g[0], g[1]))
        done += m
        chunk += 1
    return best


def envelope_exponent(body: Body) -> float:
    """Exponent q with ``2^(1/q) = 2c`` for the body's quasi-convexity constant c."""
    c = sum_constant(body.convexity)
    if c is None:
        raise ValueError("Aoki-Rolewicz envelope needs a quasi-convex or p-convex body")
    return 1.0 / math.log2(2.0 * c)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f: Callable[[float], float], a: float, b: float, iters: int) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _best_split(body: Body, x: np.ndarray, q: float, seed: int,
                directions: int, iters: int) -> tuple[float, np.ndarray]:
    """Best two-part split ``x = y + (x - y)`` for ``||y||^q + ||x-y||^q``."""
    n = body.dim
    g = lambda v: float(body.gauge(v))  # noqa: E731
    best_val, best_y = math.inf, x
    nz = np.flatnonzero(x)
    if nz.size > 1:
        for i in nz[:64]:
            e = np.zeros(n)
            e[i] = x[i]
            s, val = _golden_min(lambda s: g(s * e) ** q + g(x - s * e) ** q, 0.0, 1.0, iters)
            # golden section never lands on the endpoint, where the pure coordinate split sits
            v_end = g(e) ** q + g(x - e) ** q
            if v_end < val:
                s, val = 1.0, v_end
            if val < best_val:
                best_val, best_y = val, s * e
    gen = RngStream(seed, 0xA0B1).generator()
    norm = float(np.linalg.norm(x))
    for _ in range(directions):
        v = gen.standard_normal(n)
        v *= norm / np.linalg.norm(v)
        half = 0.5 * x
        s, val = _golden_min(lambda s: g(half + s * v) ** q + g(half - s * v) ** q, -1.0, 1.0, iters)
        if val < best_val:
            best_val, best_y = val, half + s * v
    return best_val, best_y


def aoki_rolewicz_gauge(body: Body, x, depth: int, seed: int = 0,
                        directions: int = 8, iters: int = 40) -> float:
    """Upper estimate of the q-convex envelope gauge at ``x``.

    The envelope is ``inf (sum ||x_i||^q)^(1/q)`` over decompositions
    ``x = x_1 + ... + x_m`` with ``m <= depth``, where ``2^(1/q) = 2c``.  The
    search peels off one part at a time using the best two-part split found
    on coordinate-aligned and random lines (golden-section refinement along
    each).  The split chosen at a point does not depend on ``depth``, so the
    result is nonincreasing in ``depth``; ``depth = 1`` returns the gauge.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    x = _check_points(body, x)
    if x.ndim != 1:
        raise ValueError("aoki_rolewicz_gauge takes a single point")
    q = envelope_exponent(body)
    if not np.any(x):
        return 0.0

    def powered(z: np.ndarray, d: int) -> float:
        own = float(body.gauge(z)) ** q
        if d == 1 or not np.any(z):
            return own
        _, y = _best_split(body, z, q, seed, directions, iters)
        rest = z - y
        if not np.any(y) or not np.any(rest):
            return own
        return min(own, float(body.gauge(y)) ** q + powered(rest, d - 1))

    return powered(x, depth) ** (1.0 / q)

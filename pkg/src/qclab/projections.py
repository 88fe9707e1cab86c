"""Haar-random orthogonal projections and the Johnson-Lindenstrauss harness."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .functionals import factor_A
from .rng import RngStream, as_stream, parallel_map

ORTHO_TOL = 1e-10


def orthonormalize(g: np.ndarray, gen: Optional[np.random.Generator] = None) -> np.ndarray:
    """Gram-Schmidt with one reorthogonalization pass on the columns of ``g``.

    Column ``j`` of the result spans the same flag as the first ``j`` columns
    of ``g``.  A column that collapses numerically is redrawn from ``gen``.
    """
    g = np.array(g, dtype=np.float64)
    n, k = g.shape
    q = np.empty((n, k))
    for j in range(k):
        v = g[:, j].copy()
        while True:
            scale = np.linalg.norm(v)
            for _ in range(2):
                v -= q[:, :j] @ (q[:, :j].T @ v)
            nv = np.linalg.norm(v)
            if scale > 0 and nv > 1e-10 * scale:
                break
            if gen is None:
                raise np.linalg.LinAlgError("rank-deficient input to orthonormalize")
            v = gen.standard_normal(n)
        q[:, j] = v / nv
    return q


def haar_frame(n: int, m: int, rng) -> np.ndarray:
    """``(m, n)`` array of orthonormal rows spanning a Haar-random m-subspace.

    The rows come from orthonormalizing an ``n x m`` gaussian matrix, so the
    span of the first ``j`` rows is itself Haar-random for every ``j``.
    """
    gen = as_stream(rng).generator()
    return orthonormalize(gen.standard_normal((n, m)), gen).T


def haar_orthogonal(n: int, rng) -> np.ndarray:
    """Haar-random ``n x n`` orthogonal matrix."""
    return haar_frame(n, n, rng)


@dataclass(frozen=True, eq=False)
class ProjectionOp:
    """Orthogonal projection of R^n onto the row span of ``basis`` (k x n)."""

    ambient_dim: int
    rank: int
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.float64).reshape(self.rank, self.ambient_dim)
        object.__setattr__(self, "basis", b)
        if self.rank and not np.allclose(b @ b.T, np.eye(self.rank), atol=ORTHO_TOL, rtol=0):
            raise ValueError("projection basis is not orthonormal")

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Coordinates of ``Px`` in the basis of the range, shape ``(..., k)``."""
        return np.asarray(x, dtype=np.float64) @ self.basis.T

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``Px`` in ambient coordinates."""
        return self.coords(x) @ self.basis

    def lift(self, c: np.ndarray) -> np.ndarray:
        """Ambient point with range coordinates ``c``."""
        return np.asarray(c, dtype=np.float64) @ self.basis

    def matrix(self) -> np.ndarray:
        return self.basis.T @ self.basis

    @classmethod
    def identity(cls, n: int) -> "ProjectionOp":
        return cls(n, n, np.eye(n))


def haar_projection(n: int, k: int, rng) -> ProjectionOp:
    """Rank-k orthogonal projection onto a Haar-random subspace of R^n."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    return ProjectionOp(n, k, haar_frame(n, k, rng))


def complement(proj: ProjectionOp) -> ProjectionOp:
    """Projection onto the orthogonal complement of the range."""
    n, k = proj.ambient_dim, proj.rank
    if k == 0:
        return ProjectionOp.identity(n)
    if k == n:
        return ProjectionOp(n, 0, np.zeros((0, n)))
    q, _ = np.linalg.qr(proj.basis.T, mode="complete")
    return ProjectionOp(n, n - k, q[:, k:].T.copy())


# ---------------------------------------------------------------------------
# Johnson-Lindenstrauss concentration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JLReport:
    """Outcome of :func:`jl_concentration`.

    ``empirical_failure`` is the fraction of trials in which some point left
    the two-sided band ``A (1 +- eps) sqrt(k/n) |y|``.
    """

    n: int
    k: int
    epsilon: float
    num_points: int
    trials: int
    failures: int
    seed: int

    CSV_FIELDS = ("n", "k", "epsilon", "N", "trials", "empirical_failure", "seed")

    @property
    def empirical_failure(self) -> float:
        return self.failures / self.trials

    @property
    def binomial_sigma(self) -> float:
        f = self.empirical_failure
        return math.sqrt(f * (1.0 - f) / self.trials)

    def bound_failure(self, c: float) -> float:
        """``sqrt(pi/2) exp(-eps^2 k / c)``."""
        return math.sqrt(math.pi / 2.0) * math.exp(-self.epsilon ** 2 * self.k / c)

    def in_regime(self, c: float) -> bool:
        """Whether ``eps > sqrt(c/k)`` and ``N < exp(eps^2 k / c)`` both hold."""
        e2k = self.epsilon ** 2 * self.k
        return self.epsilon > math.sqrt(c / self.k) and math.log(self.num_points) < e2k / c

    def csv_row(self) -> dict:
        return {"n": self.n, "k": self.k, "epsilon": self.epsilon, "N": self.num_points,
                "trials": self.trials, "empirical_failure": self.empirical_failure,
                "seed": self.seed}


#: trials per batch in :func:`jl_concentration`; each batch has its own substream
JL_BATCH = 256


def _haar_frames(gen: np.random.Generator, batch: int, n: int, m: int) -> np.ndarray:
    g = gen.standard_normal((batch, n, m))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diagonal(r, axis1=1, axis2=2))
    d[d == 0] = 1.0
    return q * d[:, None, :]


def jl_concentration(points, k: int, epsilon: float, trials: int, rng,
                     method: str = "frame") -> JLReport:
    """Empirical failure rate of the two-sided JL band for a point set.

    For each trial a Haar-random rotation ``U`` is drawn and the trial fails
    if some ``y_j`` violates
    ``A (1 - eps) sqrt(k/n) |y_j| <= |P U y_j| <= A (1 + eps) sqrt(k/n) |y_j|``
    with ``P`` the projection on the first k coordinates and
    ``A = factor_A(n, k)``.

    ``method="frame"`` samples only the action of ``U`` on the span of the
    points (a Haar frame of dimension ``rank(Y)``), which has the same law as
    the full rotation.  ``method="direct"`` draws a full
    :func:`haar_projection` per trial instead; it is slower and serves as a
    cross-check.
    """
    y = np.atleast_2d(np.asarray(points, dtype=np.float64))
    num, n = y.shape
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    norms = np.linalg.norm(y, axis=1)
    if np.any(norms == 0):
        raise ValueError("zero point in input")
    stream = as_stream(rng)
    scale = factor_A(n, k) * math.sqrt(k / n) * norms
    lo, hi = (1.0 - epsilon) * scale, (1.0 + epsilon) * scale

    if method == "frame":
        q_y, r_y = np.linalg.qr(y.T)
        m = q_y.shape[1]

        def batch_failures(b: tuple[int, int]) -> int:
            idx, size = b
            gen = stream.substream(idx).generator()
            f = _haar_frames(gen, size, n, m)
            proj = f[:, :k, :] @ r_y
            lens = np.linalg.norm(proj, axis=1)
            bad = (lens < lo) | (lens > hi)
            return int(bad.any(axis=1).sum())
    elif method == "direct":
        def batch_failures(b: tuple[int, int]) -> int:
            idx, size = b
            sub = stream.substream(idx)
            fails = 0
            for t in range(size):
                p = haar_projection(n, k, sub.substream(t))
                lens = np.linalg.norm(p.coords(y), axis=1)
                fails += bool(np.any((lens < lo) | (lens > hi)))
            return fails
    else:
        raise ValueError(f"unknown method {method!r}")

    full, rest = divmod(trials, JL_BATCH)
    batches = [(i, JL_BATCH) for i in range(full)] + ([(full, rest)] if rest else [])
    failures = sum(parallel_map(batch_failures, batches))
    return JLReport(n, k, float(epsilon), num, int(trials), failures, stream.seed)


def jl_points(n: int, num: int, rng) -> np.ndarray:
    """Standard gaussian test points for the JL harness."""
    return as_stream(rng).generator().standard_normal((num, n))

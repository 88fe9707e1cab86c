"""Seeded, splittable random streams and a deterministic parallel map.

Every stochastic routine in the package takes an :class:`RngStream`.  Work is
split into fixed-size shards whose substreams depend only on
``(seed, stream_id, shard index)``, so results never depend on how many
workers execute the shards.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

#: approximate number of float64 values per shard in sharded Monte Carlo loops
SHARD_VALUES = 1 << 20

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Deterministic random substream identified by ``(seed, stream_id)``.

    Parameters
    ----------
    seed
        64-bit master seed.
    stream_id
        64-bit stream identifier; distinct ids give independent streams.
    path
        Further spawn keys appended by :meth:`substream`.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not (0 <= int(self.seed) <= _MASK64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not (0 <= int(self.stream_id) <= _MASK64):
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {self.stream_id}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),) + self.path)
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> RngStream:
        """Child stream for shard, trial or worker ``index``."""
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))


def as_stream(rng: RngStream | int | None) -> RngStream:
    """Coerce an int seed (or None -> seed 0) into an :class:`RngStream`."""
    if rng is None:
        return RngStream(0)
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


def worker_count() -> int:
    """Worker cap from ``QCLAB_THREADS``, else the machine default."""
    env = os.environ.get("QCLAB_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"QCLAB_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"QCLAB_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Apply ``fn`` to ``items`` on a thread pool; output keeps input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def shard_rows(dim: int) -> int:
    """Rows per shard for points of dimension ``dim`` (depends on ``dim`` only)."""
    return max(1, SHARD_VALUES // max(1, int(dim)))


def shard_sizes(count: int, shard: int) -> list[int]:
    """Split ``count`` into full shards plus a remainder."""
    full, rest = divmod(int(count), int(shard))
    return [int(shard)] * full + ([rest] if rest else [])


def combine_moments(parts: Sequence[tuple[int, float, float]]) -> tuple[int, float, float]:
    """Merge ``(count, mean, M2)`` triples in the given order (Chan et al.)."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2

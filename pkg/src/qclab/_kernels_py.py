"""Pure-numpy reference versions of the compiled kernels in ``_kernels.pyx``."""
from __future__ import annotations

import numpy as np


def _powdist(x: np.ndarray, c: np.ndarray, p: float) -> np.ndarray:
    d = x - c
    if p == 2.0:
        return np.einsum("ij,ij->i", d, d)
    if p == 1.0:
        return np.abs(d).sum(axis=1)
    if np.isinf(p):
        return np.abs(d).max(axis=1)
    return (np.abs(d) ** p).sum(axis=1)


def _root(s, p: float):
    if p == 2.0:
        return np.sqrt(s)
    if p == 1.0 or np.isinf(p):
        return s
    return s ** (1.0 / p)


def farthest_point_traversal(cloud: np.ndarray, p: float, t_stop: float, max_centers: int):
    """Farthest-point traversal seeded with the origin as first center.

    Parameters
    ----------
    cloud : (N, d) array
        Points, already mapped so that the metric is the plain l_p distance.
    p : float
        Exponent of the l_p distance (``inf`` allowed).
    t_stop : float
        Stop once the covering radius of the cloud is ``<= t_stop``.
    max_centers : int
        Hard cap on the number of cloud centers added.

    Returns
    -------
    idx : (m,) int64 array
        Cloud indices of the centers in insertion order (origin excluded).
    radii : (m + 1,) float array
        ``radii[j]`` is the covering radius with the origin plus the first
        ``j`` centers; nonincreasing.
    mind : (N,) float array
        Final distance of each cloud point to its nearest center.
    """
    cloud = np.ascontiguousarray(cloud, dtype=np.float64)
    n, d = cloud.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.array([0.0]), np.zeros(0)
    if p == 2.0:
        stop_pow = t_stop * t_stop
    elif p == 1.0 or np.isinf(p):
        stop_pow = t_stop
    else:
        stop_pow = t_stop ** p
    mind = _powdist(cloud, np.zeros(d), p)
    best = int(np.argmax(mind))
    bestv = mind[best]
    idx: list[int] = []
    radii = [float(_root(bestv, p))]
    while bestv > stop_pow and len(idx) < max_centers:
        idx.append(best)
        np.minimum(mind, _powdist(cloud, cloud[best], p), out=mind)
        best = int(np.argmax(mind))
        bestv = mind[best]
        radii.append(float(_root(bestv, p)))
    return np.asarray(idx, dtype=np.int64), np.asarray(radii), _root(mind, p)


def cone_first_hit(pts: np.ndarray, norms: np.ndarray, dirs: np.ndarray,
                   cos_delta: float, chunk: int = 4096) -> np.ndarray:
    """For each unit direction, the norm of the first listed point in its cone.

    A point ``z`` is inside the cone of ``u`` when ``<z, u> >= cos_delta * |z|``.
    With ``pts`` sorted by decreasing norm this is the radial maximum over
    the cone.  Directions whose cone holds no point get ``nan``.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    out = np.full(dirs.shape[0], np.nan)
    open_ = np.arange(dirs.shape[0])
    for start in range(0, pts.shape[0], chunk):
        if open_.size == 0:
            break
        block = pts[start:start + chunk]
        dots = block @ dirs[open_].T
        hit = dots >= cos_delta * norms[start:start + chunk, None]
        found = hit.any(axis=0)
        if found.any():
            first = np.argmax(hit[:, found], axis=0)
            out[open_[found]] = norms[start + first]
            open_ = open_[~found]
    return out

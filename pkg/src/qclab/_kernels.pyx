# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: farthest-point traversal and radial cone search.

Semantics are identical to :mod:`qclab._kernels_py`; see that module for the
reference definitions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt, INFINITY, NAN

cnp.import_array()

cdef int P_ONE = 1
cdef int P_TWO = 2
cdef int P_INF = 3
cdef int P_HALF = 4
cdef int P_GEN = 0


cdef inline int _pkind(double p):
    if p == 1.0:
        return P_ONE
    if p == 2.0:
        return P_TWO
    if p == INFINITY:
        return P_INF
    if p == 0.5:
        return P_HALF
    return P_GEN


cdef inline double _powdist(const double[:, ::1] x, Py_ssize_t i, const double* c,
                            Py_ssize_t d, int kind, double p) noexcept nogil:
    # distance raised to the p-th power (squared for p=2, plain max for p=inf)
    cdef Py_ssize_t j
    cdef double s = 0.0, v
    if kind == P_TWO:
        for j in range(d):
            v = x[i, j] - c[j]
            s += v * v
    elif kind == P_ONE:
        for j in range(d):
            s += fabs(x[i, j] - c[j])
    elif kind == P_INF:
        for j in range(d):
            v = fabs(x[i, j] - c[j])
            if v > s:
                s = v
    elif kind == P_HALF:
        for j in range(d):
            s += sqrt(fabs(x[i, j] - c[j]))
    else:
        for j in range(d):
            s += pow(fabs(x[i, j] - c[j]), p)
    return s


cdef inline double _root(double s, int kind, double p) noexcept nogil:
    if kind == P_TWO:
        return sqrt(s)
    if kind == P_ONE or kind == P_INF:
        return s
    return pow(s, 1.0 / p)


def farthest_point_traversal(const double[:, ::1] cloud, double p, double t_stop,
                             Py_ssize_t max_centers):
    """Farthest-point traversal seeded with the origin as first center."""
    cdef Py_ssize_t n = cloud.shape[0], d = cloud.shape[1]
    cdef int kind = _pkind(p)
    cdef double[::1] mind = np.empty(n, dtype=np.float64)
    cdef double[::1] zero = np.zeros(d, dtype=np.float64)
    cdef double[::1] center = np.empty(d, dtype=np.float64)
    cdef Py_ssize_t i, j, best
    cdef double bestv, v, stop_pow
    idx = []
    radii = []
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.array([0.0]), np.zeros(0)
    if kind == P_TWO:
        stop_pow = t_stop * t_stop
    elif kind == P_GEN or kind == P_HALF:
        stop_pow = pow(t_stop, p)
    else:
        stop_pow = t_stop
    with nogil:
        best = 0
        bestv = -1.0
        for i in range(n):
            v = _powdist(cloud, i, &zero[0], d, kind, p)
            mind[i] = v
            if v > bestv:
                bestv = v
                best = i
    radii.append(_root(bestv, kind, p))
    while bestv > stop_pow and len(idx) < max_centers:
        idx.append(best)
        for j in range(d):
            center[j] = cloud[best, j]
        with nogil:
            bestv = -1.0
            for i in range(n):
                v = _powdist(cloud, i, &center[0], d, kind, p)
                if v < mind[i]:
                    mind[i] = v
                v = mind[i]
                if v > bestv:
                    bestv = v
                    best = i
        radii.append(_root(bestv, kind, p))
    out_mind = np.asarray(mind)
    if kind == P_TWO:
        out_mind = np.sqrt(out_mind)
    elif kind == P_GEN or kind == P_HALF:
        out_mind = out_mind ** (1.0 / p)
    return np.asarray(idx, dtype=np.int64), np.asarray(radii, dtype=np.float64), out_mind


def cone_first_hit(const double[:, ::1] pts, const double[::1] norms,
                   const double[:, ::1] dirs, double cos_delta):
    """Norm of the first point (in the given order) inside each direction's cone."""
    cdef Py_ssize_t m = pts.shape[0], k = pts.shape[1], g = dirs.shape[0]
    cdef double[::1] out = np.empty(g, dtype=np.float64)
    cdef Py_ssize_t a, i, j
    cdef double dot
    with nogil:
        for a in range(g):
            out[a] = NAN
            for i in range(m):
                dot = 0.0
                for j in range(k):
                    dot += pts[i, j] * dirs[a, j]
                if dot >= cos_delta * norms[i]:
                    out[a] = norms[i]
                    break
    return np.asarray(out)

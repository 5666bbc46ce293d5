# cython: language_level=3
"""Compiled inner loops: truncated-shift offset scanning and pairwise L1 distances."""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def offset_scan(const double[:, ::1] x, const double[::1] g, Py_ssize_t max_offset,
                bint normalized):
    """Per-row argmin integer shift of ``x`` against ``g``.

    For each row i, evaluates sum_{t<T-s} (x[i, t+s] - g[t])**2 over shifts
    s = 0..max_offset (optionally divided by the number of summed terms) and
    returns the smallest shift attaining the minimum.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t T = x.shape[1]
    cdef Py_ssize_t i, s, t, best_s
    cdef double loss, best_loss, r
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] out_v = out
    for i in range(n):
        best_loss = INFINITY
        best_s = 0
        for s in range(max_offset + 1):
            loss = 0.0
            for t in range(T - s):
                r = x[i, t + s] - g[t]
                loss += r * r
            if normalized:
                loss /= <double>(T - s)
            if loss < best_loss:
                best_loss = loss
                best_s = s
        out_v[i] = best_s
    return out


def shift_losses(const double[:, ::1] x, const double[::1] g, Py_ssize_t max_offset,
                 bint normalized):
    """Full (n, max_offset+1) loss table used by offset_scan."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t T = x.shape[1]
    cdef Py_ssize_t i, s, t
    cdef double loss, r
    out = np.zeros((n, max_offset + 1), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    for i in range(n):
        for s in range(max_offset + 1):
            loss = 0.0
            for t in range(T - s):
                r = x[i, t + s] - g[t]
                loss += r * r
            if normalized:
                loss /= <double>(T - s)
            out_v[i, s] = loss
    return out


def pairwise_l1(const double[:, ::1] m):
    """Symmetric matrix of L1 distances between the rows of ``m``."""
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t T = m.shape[1]
    cdef Py_ssize_t i, j, t
    cdef double acc, d
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for t in range(T):
                d = m[i, t] - m[j, t]
                acc += d if d >= 0 else -d
            out_v[i, j] = acc
            out_v[j, i] = acc
    return out

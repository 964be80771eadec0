# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the functions in pykernels."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def draw_indices(const double[::1] cdf, const double[::1] uniforms, Py_ssize_t last):
    cdef Py_ssize_t n = cdf.shape[0], m = uniforms.shape[0]
    cdef Py_ssize_t t, lo, hi, mid
    cdef double u
    out = np.empty(m, dtype=np.int64)
    cdef long long[::1] o = out
    for t in range(m):
        u = uniforms[t]
        # first j with cdf[j] > u
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) >> 1
            if cdf[mid] <= u:
                lo = mid + 1
            else:
                hi = mid
        if lo > last:
            lo = last
        o[t] = lo
    return out


def accumulate(const long long[::1] draws, Py_ssize_t n, const double[:, ::1] weights,
               const double[::1] probs, long long m):
    cdef Py_ssize_t k = weights.shape[0]
    cdef Py_ssize_t t, i, j
    counts = np.zeros(n, dtype=np.int64)
    u = np.zeros((k, n), dtype=np.float64)
    cdef long long[::1] c = counts
    cdef double[:, ::1] uv = u
    cdef double factor
    for t in range(draws.shape[0]):
        c[draws[t]] += 1
    for j in range(n):
        if c[j] > 0:
            factor = c[j] / (m * probs[j])
            for i in range(k):
                uv[i, j] = weights[i, j] * factor
    return counts, u


def correlate2d(const double[:, :, ::1] x, const double[:, :, :, ::1] kernels,
                Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t O = kernels.shape[0], kh = kernels.shape[2], kw = kernels.shape[3]
    cdef Py_ssize_t Ho = (H - kh) // sh + 1, Wo = (W - kw) // sw + 1
    cdef Py_ssize_t o, c, r, s, i, j
    cdef double tap
    cdef double* orow
    cdef const double* xrow
    out = np.zeros((O, Ho, Wo), dtype=np.float64)
    cdef double[:, :, ::1] ov = out
    if Ho <= 0 or Wo <= 0:
        return out
    # one kernel tap at a time over whole output rows: the inner loop is a
    # contiguous axpy. Every output sums its terms in (c, i, j) order and each
    # out channel is computed on its own, so a subset of the kernels
    # reproduces those channels bit for bit.
    for o in range(O):
        for c in range(C):
            for i in range(kh):
                for j in range(kw):
                    tap = kernels[o, c, i, j]
                    for r in range(Ho):
                        orow = &ov[o, r, 0]
                        xrow = &x[c, r * sh + i, j]
                        if sw == 1:
                            for s in range(Wo):
                                orow[s] += tap * xrow[s]
                        else:
                            for s in range(Wo):
                                orow[s] += tap * xrow[s * sw]
    return out

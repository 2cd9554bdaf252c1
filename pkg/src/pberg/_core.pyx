# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every routine here has a pure-numpy twin in :mod:`pberg._pycore` with the
same signature; :mod:`pberg._kernels` picks one at import time.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def neumaier_sum(const double[::1] x):
    """Compensated (Neumaier) sum of a contiguous float64 vector."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double s = 0.0, c = 0.0, t, v
    for i in range(n):
        v = x[i]
        t = s + v
        if (s if s >= 0 else -s) >= (v if v >= 0 else -v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def ring_accumulate(const double[:, ::1] a, const double complex[:, ::1] spec,
                    bint sum_mode):
    """out[k, l] = sum_i a[i, k] a[i, l] spec[i, (k -/+ l) mod M].

    Difference mode assumes each spectrum row is the DFT of real data, so the
    result is hermitian and only the lower triangle is accumulated.
    """
    cdef Py_ssize_t nr = a.shape[0], K = a.shape[1], M = spec.shape[1]
    cdef Py_ssize_t i, k, l, j, off
    cdef double aik, akl
    # spectrum row unwrapped to length 2K - 1 so the inner loop is contiguous
    er_arr = np.empty(2 * K, dtype=np.float64)
    ei_arr = np.empty(2 * K, dtype=np.float64)
    cdef double[::1] er = er_arr
    cdef double[::1] ei = ei_arr
    outr_arr = np.zeros((K, K), dtype=np.float64)
    outi_arr = np.zeros((K, K), dtype=np.float64)
    cdef double[:, ::1] outr = outr_arr
    cdef double[:, ::1] outi = outi_arr
    off = 0 if sum_mode else K - 1
    for i in range(nr):
        for j in range(2 * K - 1):
            if sum_mode:
                l = j % M
            else:
                l = ((j - off) % M + M) % M
            er[j] = spec[i, l].real
            ei[j] = spec[i, l].imag
        for k in range(K):
            aik = a[i, k]
            if aik == 0.0:
                continue
            for l in range(k + 1):
                akl = aik * a[i, l]
                if sum_mode:
                    j = k + l
                else:
                    j = k - l + off
                outr[k, l] += akl * er[j]
                outi[k, l] += akl * ei[j]
    out_arr = np.empty((K, K), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    for k in range(K):
        for l in range(k + 1):
            out[k, l] = outr[k, l] + 1j * outi[k, l]
            if sum_mode:
                out[l, k] = out[k, l]
            else:
                out[l, k] = outr[k, l] - 1j * outi[k, l]
    return out_arr


def monomial_design(const double complex[:, ::1] points, const long[:, ::1] exponents):
    """Evaluate z**alpha for every point (rows) and multi-index (columns)."""
    cdef Py_ssize_t N = points.shape[0], n = points.shape[1], K = exponents.shape[0]
    cdef Py_ssize_t i, j, k, e, dmax = 0
    for k in range(K):
        for j in range(n):
            if exponents[k, j] > dmax:
                dmax = exponents[k, j]
    out_arr = np.empty((N, K), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    table_arr = np.empty((n, dmax + 1), dtype=np.complex128)
    cdef double complex[:, ::1] table = table_arr
    cdef double complex v
    for i in range(N):
        for j in range(n):
            table[j, 0] = 1.0
            for e in range(1, dmax + 1):
                table[j, e] = table[j, e - 1] * points[i, j]
        for k in range(K):
            v = 1.0
            for j in range(n):
                v = v * table[j, exponents[k, j]]
            out[i, k] = v
    return out_arr

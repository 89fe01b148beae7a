# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_pykernels``."""

import numpy as np
from libc.math cimport sqrt


# Convolution is shared with the Python backend: numpy's compiled routine beats
# a hand-written loop here (see benchmarks/bench_kernels.py).
from ._pykernels import convolve, convolve_rows


cdef inline Py_ssize_t _lookup(const long long[::1] keys, long long key) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0] - 1, mid
    while lo <= hi:
        mid = (lo + hi) // 2
        if keys[mid] == key:
            return mid
        elif keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid - 1
    return -1


def many_body_matrix(states, h, w, double pair_factor):
    cdef const long long[:, ::1] S = np.ascontiguousarray(states, dtype=np.int64)
    cdef const double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t dim = S.shape[0], M = S.shape[1]
    cdef long long N = 0
    cdef Py_ssize_t a
    for a in range(M):
        N += S[0, a]
    # lexicographic order of tuples == ascending order of base-(N+1) keys
    pw_np = np.empty(M, dtype=np.int64)
    cdef long long[::1] pw = pw_np
    cdef long long base = N + 1
    pw[M - 1] = 1
    for a in range(M - 2, -1, -1):
        pw[a] = pw[a + 1] * base
    keys_np = np.asarray(S, dtype=np.int64) @ pw_np
    if dim > 1 and np.any(np.diff(keys_np) <= 0):
        raise ValueError("states must be distinct and in lexicographic order")
    cdef const long long[::1] keys = keys_np
    H = np.zeros((dim, dim))
    cdef double[:, ::1] Hv = H
    occ_np = np.empty(M, dtype=np.int64)
    cdef long long[::1] occ = occ_np
    cdef Py_ssize_t i, j, m, n, p, q
    cdef long long key
    cdef double amp, amp_n, amp_p, amp_q
    with nogil:
        for i in range(dim):
            for a in range(M):
                occ[a] = S[i, a]
            key = keys[i]
            for n in range(M):
                if occ[n] == 0:
                    continue
                amp_n = sqrt(<double>occ[n])
                occ[n] -= 1
                key -= pw[n]
                for m in range(M):
                    amp = amp_n * sqrt(<double>(occ[m] + 1))
                    j = _lookup(keys, key + pw[m])
                    Hv[j, i] += hv[m, n] * amp
                occ[n] += 1
                key += pw[n]
            if pair_factor == 0.0:
                continue
            for q in range(M):
                if occ[q] == 0:
                    continue
                amp_q = sqrt(<double>occ[q])
                occ[q] -= 1
                key -= pw[q]
                for p in range(M):
                    if occ[p] == 0:
                        continue
                    amp_p = amp_q * sqrt(<double>occ[p])
                    occ[p] -= 1
                    key -= pw[p]
                    for n in range(M):
                        amp_n = amp_p * sqrt(<double>(occ[n] + 1))
                        occ[n] += 1
                        key += pw[n]
                        for m in range(M):
                            amp = amp_n * sqrt(<double>(occ[m] + 1))
                            j = _lookup(keys, key + pw[m])
                            Hv[j, i] += pair_factor * wv[m, n, p, q] * amp
                        occ[n] -= 1
                        key -= pw[n]
                    occ[p] += 1
                    key += pw[p]
                occ[q] += 1
                key += pw[q]
    return H

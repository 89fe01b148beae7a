"""Reference (numpy / pure Python) versions of the hot loops.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
"""

import numpy as np


def convolve(f, stencil):
    """Direct sum ``out[i] = sum_k stencil[k + m] * f[i - k]`` over ``|k| <= m``.

    Samples outside ``f`` count as zero.  ``stencil`` has odd length ``2m + 1``
    and must not be longer than ``f``.
    """
    f = np.ascontiguousarray(f, dtype=float)
    stencil = np.ascontiguousarray(stencil, dtype=float)
    if stencil.size % 2 != 1 or stencil.size > f.size:
        raise ValueError("stencil must have odd length not exceeding the signal")
    return np.convolve(f, stencil, mode="same")


def convolve_rows(F, stencil):
    F = np.ascontiguousarray(F, dtype=float)
    stencil = np.ascontiguousarray(stencil, dtype=float)
    if stencil.size % 2 != 1 or stencil.size > F.shape[1]:
        raise ValueError("stencil must have odd length not exceeding the signal")
    out = np.empty_like(F)
    for r in range(F.shape[0]):
        out[r] = np.convolve(F[r], stencil, mode="same")
    return out


def many_body_matrix(states, h, w, pair_factor):
    """Dense matrix of ``sum h_mn a*_m a_n + c sum w_mnpq a*_m a*_n a_p a_q``.

    ``states`` is an integer array (dim, M) of occupation tuples with fixed
    particle number.  Matrix element ``H[j, i] = <j|H|i>``.
    """
    states = np.asarray(states, dtype=np.int64)
    dim, M = states.shape
    index = {tuple(s): i for i, s in enumerate(states.tolist())}
    H = np.zeros((dim, dim))
    for i, row in enumerate(states.tolist()):
        occ = list(row)
        for n in range(M):
            if occ[n] == 0:
                continue
            amp_n = np.sqrt(occ[n])
            occ[n] -= 1
            for m in range(M):
                amp = amp_n * np.sqrt(occ[m] + 1)
                occ[m] += 1
                H[index[tuple(occ)], i] += h[m, n] * amp
                occ[m] -= 1
            occ[n] += 1
        if pair_factor == 0.0:
            continue
        for q in range(M):
            if occ[q] == 0:
                continue
            amp_q = np.sqrt(occ[q])
            occ[q] -= 1
            for p in range(M):
                if occ[p] == 0:
                    continue
                amp_p = amp_q * np.sqrt(occ[p])
                occ[p] -= 1
                for n in range(M):
                    amp_n = amp_p * np.sqrt(occ[n] + 1)
                    occ[n] += 1
                    for m in range(M):
                        amp = amp_n * np.sqrt(occ[m] + 1)
                        occ[m] += 1
                        H[index[tuple(occ)], i] += pair_factor * w[m, n, p, q] * amp
                        occ[m] -= 1
                    occ[n] -= 1
                occ[p] += 1
            occ[q] += 1
    return H

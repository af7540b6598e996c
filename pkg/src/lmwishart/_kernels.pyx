# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Batched log-determinants of principal minors and of Gram minors."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, NAN, INFINITY

cnp.import_array()


def logdet_minors(double[:, :, ::1] S, long[::1] idx, long[::1] ptr):
    """out[n, m] = log det S[n][I_m, I_m] with I_m = idx[ptr[m]:ptr[m+1]].

    Non-positive-definite minors give NaN.
    """
    cdef Py_ssize_t n = S.shape[0], m = ptr.shape[0] - 1
    cdef Py_ssize_t kmax = 0, t, a, b, c, i, k, lo
    for t in range(m):
        if ptr[t + 1] - ptr[t] > kmax:
            kmax = ptr[t + 1] - ptr[t]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    buf_arr = np.zeros((max(kmax, 1), max(kmax, 1)), dtype=np.float64)
    cdef double[:, ::1] A = buf_arr
    cdef double s, s2, acc
    cdef bint ok
    for i in range(n):
        for t in range(m):
            lo = ptr[t]
            k = ptr[t + 1] - lo
            if k == 0:
                out[i, t] = 0.0
                continue
            for a in range(k):
                for b in range(a + 1):
                    A[a, b] = S[i, idx[lo + a], idx[lo + b]]
            acc = 0.0
            ok = True
            for a in range(k):
                s = A[a, a]
                for c in range(a):
                    s -= A[a, c] * A[a, c]
                if s <= 0.0:
                    ok = False
                    break
                s = sqrt(s)
                A[a, a] = s
                acc += log(s)
                # fill column a of the factor in the lower triangle
                for b in range(a + 1, k):
                    s2 = A[b, a]
                    for c in range(a):
                        s2 -= A[b, c] * A[a, c]
                    A[b, a] = s2 / s
            out[i, t] = 2.0 * acc if ok else NAN
    return out_arr


def logdet_gram_minors(double[:, :, ::1] F, long[::1] idx, long[::1] ptr):
    """out[n, m] = log det (F_K^T F_K) for the column subsets K of F[n].

    Householder QR with rows sorted by decreasing norm and column pivoting,
    which stays accurate when the rows of F differ wildly in scale.
    """
    cdef Py_ssize_t n = F.shape[0], p = F.shape[1], m = ptr.shape[0] - 1
    cdef Py_ssize_t kmax = 1, t, a, b, c, i, j, k, lo, best
    for t in range(m):
        if ptr[t + 1] - ptr[t] > kmax:
            kmax = ptr[t + 1] - ptr[t]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    W_arr = np.zeros((p, kmax), dtype=np.float64)
    cdef double[:, ::1] W = W_arr
    rn_arr = np.zeros(p, dtype=np.float64)
    cdef double[::1] rn = rn_arr
    ro_arr = np.zeros(p, dtype=np.intp)
    cdef Py_ssize_t[::1] ro = ro_arr
    cdef double s, nrm, alpha, v0, vv, dot, tmp, acc
    cdef bint singular
    for i in range(n):
        for t in range(m):
            lo = ptr[t]
            k = ptr[t + 1] - lo
            if k == 0:
                out[i, t] = 0.0
                continue
            # row norms over the chosen columns, then insertion sort (p is tiny)
            for a in range(p):
                s = 0.0
                for b in range(k):
                    tmp = F[i, a, idx[lo + b]]
                    s += tmp * tmp
                rn[a] = s
                ro[a] = a
            for a in range(1, p):
                b = a
                while b > 0 and rn[ro[b - 1]] < rn[ro[b]]:
                    c = ro[b - 1]
                    ro[b - 1] = ro[b]
                    ro[b] = c
                    b -= 1
            for a in range(p):
                for b in range(k):
                    W[a, b] = F[i, ro[a], idx[lo + b]]
            acc = 0.0
            singular = False
            for j in range(k):
                best = j
                nrm = -1.0
                for c in range(j, k):
                    s = 0.0
                    for a in range(j, p):
                        s += W[a, c] * W[a, c]
                    if s > nrm:
                        nrm = s
                        best = c
                if best != j:
                    for a in range(p):
                        tmp = W[a, j]
                        W[a, j] = W[a, best]
                        W[a, best] = tmp
                if nrm <= 0.0:
                    singular = True
                    break
                nrm = sqrt(nrm)
                alpha = -nrm if W[j, j] >= 0 else nrm
                acc += log(nrm)
                v0 = W[j, j] - alpha
                vv = v0 * v0
                for a in range(j + 1, p):
                    vv += W[a, j] * W[a, j]
                if vv > 0.0:
                    for c in range(j + 1, k):
                        dot = v0 * W[j, c]
                        for a in range(j + 1, p):
                            dot += W[a, j] * W[a, c]
                        dot = 2.0 * dot / vv
                        W[j, c] -= dot * v0
                        for a in range(j + 1, p):
                            W[a, c] -= dot * W[a, j]
                W[j, j] = alpha
            out[i, t] = -INFINITY if singular else 2.0 * acc
    return out_arr

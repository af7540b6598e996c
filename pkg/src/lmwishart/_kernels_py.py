"""NumPy fallback for the batched principal-minor log-determinant kernel."""

import numpy as np


def logdet_minors(S, idx, ptr):
    S = np.asarray(S, dtype=np.float64)
    n, m = S.shape[0], len(ptr) - 1
    out = np.zeros((n, m))
    for t in range(m):
        ix = np.asarray(idx[ptr[t]:ptr[t + 1]])
        if len(ix) == 0:
            continue
        sign, ld = np.linalg.slogdet(S[:, ix[:, None], ix[None, :]])
        out[:, t] = np.where(sign > 0, ld, np.nan)
    return out


def logdet_gram_minors(F, idx, ptr):
    F = np.asarray(F, dtype=np.float64)
    n, m = F.shape[0], len(ptr) - 1
    out = np.zeros((n, m))
    for t in range(m):
        ix = np.asarray(idx[ptr[t]:ptr[t + 1]])
        if len(ix) == 0:
            continue
        M = F[:, :, ix]
        # largest rows first keeps unpivoted Householder QR accurate
        order = np.argsort(-np.einsum("npk,npk->np", M, M), axis=1, kind="stable")
        M = np.take_along_axis(M, order[:, :, None], axis=1)
        R = np.linalg.qr(M, mode="r")
        with np.errstate(divide="ignore"):
            out[:, t] = 2.0 * np.log(np.abs(np.diagonal(R, axis1=1, axis2=2))).sum(axis=1)
    return out

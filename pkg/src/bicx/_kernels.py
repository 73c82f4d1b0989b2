"""Hot loops behind the posterior and tilt code.

Each kernel has a numba version and a plain numpy version with identical
semantics. Set ``BICX_NUMBA=0`` to force the numpy path (numba is also
skipped automatically when it cannot be imported).
"""

from __future__ import annotations

import math
import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("BICX_NUMBA", "1").strip() not in ("0", "false", "no")

# rows per numpy chunk; keeps the broadcast temporaries around 32 MB
_CHUNK_ELEMS = 4_000_000
# terms this far below the row maximum contribute < 1e-26 relative and are skipped
_LOG_CUTOFF = 60.0


def _chunk_rows(n_cols: int) -> int:
    return max(1, _CHUNK_ELEMS // max(1, n_cols))


# ---------------------------------------------------------------- numpy path

def _sqdist_np(a: np.ndarray, b: np.ndarray, inv_var: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,k,ijk->ij", diff, inv_var, diff)


def kernel_mean_np(y, x, logw, inv_var):
    m, n = y.shape[0], x.shape[0]
    z = np.empty((m, x.shape[1]))
    lse = np.empty(m)
    step = _chunk_rows(n * max(1, x.shape[1]))
    for s in range(0, m, step):
        e = min(m, s + step)
        lk = logw[None, :] - 0.5 * _sqdist_np(y[s:e], x, inv_var)
        mx = lk.max(axis=1, keepdims=True)
        w = np.exp(lk - mx)
        tot = w.sum(axis=1)
        z[s:e] = (w @ x) / tot[:, None]
        lse[s:e] = mx[:, 0] + np.log(tot)
    return z, lse


def log_kernel_sum_np(x, y, inv_var, log_coef):
    n, m = x.shape[0], y.shape[0]
    out = np.empty(n)
    step = _chunk_rows(m * max(1, x.shape[1]))
    for s in range(0, n, step):
        e = min(n, s + step)
        lk = log_coef[None, :] - 0.5 * _sqdist_np(x[s:e], y, inv_var)
        mx = lk.max(axis=1, keepdims=True)
        out[s:e] = mx[:, 0] + np.log(np.exp(lk - mx).sum(axis=1))
    return out


def nearest_index_np(q, pts):
    m = q.shape[0]
    out = np.empty(m, dtype=np.int64)
    ones = np.ones(pts.shape[1])
    step = _chunk_rows(pts.shape[0] * max(1, pts.shape[1]))
    for s in range(0, m, step):
        e = min(m, s + step)
        out[s:e] = np.argmin(_sqdist_np(q[s:e], pts, ones), axis=1)
    return out


# ---------------------------------------------------------------- numba path

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def kernel_mean_nb(y, x, logw, inv_var):
        m, n, k = y.shape[0], x.shape[0], x.shape[1]
        z = np.zeros((m, k))
        lse = np.empty(m)
        lk = np.empty(n)
        for j in range(m):
            mx = -np.inf
            for i in range(n):
                acc = 0.0
                for c in range(k):
                    dd = y[j, c] - x[i, c]
                    acc += dd * dd * inv_var[c]
                v = logw[i] - 0.5 * acc
                lk[i] = v
                if v > mx:
                    mx = v
            tot = 0.0
            for i in range(n):
                if lk[i] - mx < -_LOG_CUTOFF:
                    continue
                w = math.exp(lk[i] - mx)
                tot += w
                for c in range(k):
                    z[j, c] += w * x[i, c]
            for c in range(k):
                z[j, c] /= tot
            lse[j] = mx + math.log(tot)
        return z, lse

    @numba.njit(cache=True)
    def log_kernel_sum_nb(x, y, inv_var, log_coef):
        n, m, k = x.shape[0], y.shape[0], x.shape[1]
        out = np.empty(n)
        lk = np.empty(m)
        for i in range(n):
            mx = -np.inf
            for j in range(m):
                acc = 0.0
                for c in range(k):
                    dd = x[i, c] - y[j, c]
                    acc += dd * dd * inv_var[c]
                v = log_coef[j] - 0.5 * acc
                lk[j] = v
                if v > mx:
                    mx = v
            tot = 0.0
            for j in range(m):
                if lk[j] - mx >= -_LOG_CUTOFF:
                    tot += math.exp(lk[j] - mx)
            out[i] = mx + math.log(tot)
        return out

    @numba.njit(cache=True)
    def nearest_index_nb(q, pts):
        m, n, k = q.shape[0], pts.shape[0], pts.shape[1]
        out = np.empty(m, dtype=np.int64)
        for j in range(m):
            best = np.inf
            arg = 0
            for i in range(n):
                acc = 0.0
                for c in range(k):
                    dd = q[j, c] - pts[i, c]
                    acc += dd * dd
                if acc < best:
                    best = acc
                    arg = i
            out[j] = arg
        return out

else:  # pragma: no cover
    kernel_mean_nb = kernel_mean_np
    log_kernel_sum_nb = log_kernel_sum_np
    nearest_index_nb = nearest_index_np


def _f64(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got shape {a.shape}")
    return a


def kernel_mean(y, x, logw, inv_var):
    """Weighted Gaussian-kernel mean of ``x`` at each row of ``y``.

    Returns ``(z, lse)`` where ``z[j] = sum_i w_ij x_i / sum_i w_ij`` with
    ``log w_ij = logw_i - 0.5 * sum_c (y_jc - x_ic)^2 inv_var_c`` and
    ``lse[j] = log sum_i w_ij``.
    """
    args = (_f64(y, 2), _f64(x, 2), _f64(logw, 1), _f64(inv_var, 1))
    return (kernel_mean_nb if USE_NUMBA else kernel_mean_np)(*args)


def log_kernel_sum(x, y, inv_var, log_coef):
    """``log sum_j exp(log_coef_j - 0.5 * |x_i - y_j|^2_inv_var)`` per row of ``x``."""
    args = (_f64(x, 2), _f64(y, 2), _f64(inv_var, 1), _f64(log_coef, 1))
    return (log_kernel_sum_nb if USE_NUMBA else log_kernel_sum_np)(*args)


def nearest_index(q, pts):
    """Index of the Euclidean nearest row of ``pts`` for each row of ``q``."""
    args = (_f64(q, 2), _f64(pts, 2))
    return (nearest_index_nb if USE_NUMBA else nearest_index_np)(*args)

"""Inner loops of the multiplicative updates.

Two interchangeable backends expose the same functions:

* ``numba`` -- ``@njit`` kernels, row-parallel via ``prange``.
* ``numpy`` -- vectorised fallback built on ``np.bincount``.

The numba backend is used when numba imports and ``DNLFA_NO_NUMBA`` is
unset (or ``0``). Both accumulate every row's sums in the dataset's fixed
CSR/CSC order, so results do not depend on the thread count.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("DNLFA_NO_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


# --------------------------------------------------------------------------- numpy


def _np_predict_entries(rows, cols, X, Y, G, H, I, J):
    rhat = np.zeros(rows.size)
    for k in range(X.shape[1]):
        rhat += X[rows, k] * Y[cols, k]
    for k in range(G.shape[1]):
        rhat += I[rows, k] * G[rows, k] + J[cols, k] * H[cols, k]
    return rhat


def _np_factor_terms(ptr, perm, other, vals, rhat, F, O, lam):
    n, d = F.shape
    owner = np.repeat(np.arange(n), np.diff(ptr))
    o = other[perm]
    r = vals[perm]
    rh = rhat[perm]
    num = np.empty((n, d))
    den = np.empty((n, d))
    for k in range(d):
        ok = O[o, k]
        num[:, k] = np.bincount(owner, weights=r * ok, minlength=n)
        den[:, k] = np.bincount(owner, weights=rh * ok + lam * F[owner, k], minlength=n)
    return num, den


def _np_bias_terms(ptr, perm, vals, rhat, B, mask, lam):
    n, d = B.shape
    owner = np.repeat(np.arange(n), np.diff(ptr))
    r = vals[perm]
    rh = rhat[perm]
    num = np.empty((n, d))
    den = np.empty((n, d))
    for k in range(d):
        mk = mask[owner, k]
        num[:, k] = np.bincount(owner, weights=r * mk, minlength=n)
        den[:, k] = np.bincount(owner, weights=rh * mk + lam * B[owner, k], minlength=n)
    return num, den


def _np_loss_sums(rows, cols, vals, rhat, X, Y, G, H, I, J, lam):
    res = vals - rhat
    reg = np.zeros(rows.size)
    for k in range(X.shape[1]):
        reg += X[rows, k] ** 2 + Y[cols, k] ** 2
    for k in range(G.shape[1]):
        reg += (I[rows, k] * G[rows, k]) ** 2 + (J[cols, k] * H[cols, k]) ** 2
    return float(np.sum(res * res + lam * reg))


def _np_squared_error(vals, rhat):
    res = vals - rhat
    return float(np.sum(res * res))


numpy_backend = SimpleNamespace(
    name="numpy",
    predict_entries=_np_predict_entries,
    factor_terms=_np_factor_terms,
    bias_terms=_np_bias_terms,
    loss_sums=_np_loss_sums,
    squared_error=_np_squared_error,
    set_threads=lambda n: None,
)


# --------------------------------------------------------------------------- numba

if HAVE_NUMBA:

    @njit(parallel=True, nogil=True, cache=True)
    def _nb_predict_entries(rows, cols, X, Y, G, H, I, J):
        rhat = np.empty(rows.size)
        for e in prange(rows.size):
            m = rows[e]
            n = cols[e]
            acc = 0.0
            for k in range(X.shape[1]):
                acc += X[m, k] * Y[n, k]
            for k in range(G.shape[1]):
                acc += I[m, k] * G[m, k] + J[n, k] * H[n, k]
            rhat[e] = acc
        return rhat

    @njit(parallel=True, nogil=True, cache=True)
    def _nb_factor_terms(ptr, perm, other, vals, rhat, F, O, lam):
        n, d = F.shape
        num = np.zeros((n, d))
        den = np.zeros((n, d))
        for m in prange(n):
            for p in range(ptr[m], ptr[m + 1]):
                e = perm[p]
                o = other[e]
                r = vals[e]
                rh = rhat[e]
                for k in range(d):
                    num[m, k] += r * O[o, k]
                    den[m, k] += rh * O[o, k] + lam * F[m, k]
        return num, den

    @njit(parallel=True, nogil=True, cache=True)
    def _nb_bias_terms(ptr, perm, vals, rhat, B, mask, lam):
        n, d = B.shape
        num = np.zeros((n, d))
        den = np.zeros((n, d))
        for m in prange(n):
            for p in range(ptr[m], ptr[m + 1]):
                e = perm[p]
                r = vals[e]
                rh = rhat[e]
                for k in range(d):
                    num[m, k] += r * mask[m, k]
                    den[m, k] += rh * mask[m, k] + lam * B[m, k]
        return num, den

    @njit(nogil=True, cache=True)
    def _nb_loss_sums(rows, cols, vals, rhat, X, Y, G, H, I, J, lam):
        total = 0.0
        for e in range(rows.size):
            m = rows[e]
            n = cols[e]
            res = vals[e] - rhat[e]
            reg = 0.0
            for k in range(X.shape[1]):
                reg += X[m, k] ** 2 + Y[n, k] ** 2
            for k in range(G.shape[1]):
                reg += (I[m, k] * G[m, k]) ** 2 + (J[n, k] * H[n, k]) ** 2
            total += res * res + lam * reg
        return total

    @njit(nogil=True, cache=True)
    def _nb_squared_error(vals, rhat):
        total = 0.0
        for e in range(vals.size):
            res = vals[e] - rhat[e]
            total += res * res
        return total

    def _nb_set_threads(n):
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))

    numba_backend = SimpleNamespace(
        name="numba",
        predict_entries=_nb_predict_entries,
        factor_terms=_nb_factor_terms,
        bias_terms=_nb_bias_terms,
        loss_sums=_nb_loss_sums,
        squared_error=_nb_squared_error,
        set_threads=_nb_set_threads,
    )
else:  # pragma: no cover
    numba_backend = None


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Return a backend by name; ``None`` picks the default for this process."""
    if name is None:
        name = "numba" if HAVE_NUMBA and not _env_disabled() else "numpy"
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        if numba_backend is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return numba_backend
    raise ValueError(f"unknown backend {name!r}")

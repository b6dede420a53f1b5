"""Hot loop of the multiplicative-weights self-play, in two backends.

The compiled backend JITs the round loop with numba; the numpy backend
reproduces the identical update order with vectorized operations (the
per-type inverse-cdf sample uses the same sequential cumulative sums),
so the two agree to floating point noise and each is bit deterministic
on its own. Select with the BCCE_DISABLE_NUMBA environment variable or
the ``backend`` argument of the learning entry points.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = ["default_backend", "numba_available", "run_epoch", "BACKENDS"]

BACKENDS = ("numba", "numpy")

try:
    import numba

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - environment without numba
    numba = None
    _HAVE_NUMBA = False

_NUMBA_EPOCH = None


def numba_available() -> bool:
    return _HAVE_NUMBA


def default_backend() -> str:
    if os.environ.get("BCCE_DISABLE_NUMBA", "") not in ("", "0"):
        return "numpy"
    return "numba" if _HAVE_NUMBA else "numpy"


def _epoch_loop(first_price, n_buyers, V, B, W, eta, uniforms, weights,
                history, u_sum, realized):
    T, nv = uniforms.shape
    nb = B.shape[0]
    q = np.zeros(nb)
    L = np.zeros(nb)
    u = np.zeros((nv, nb))
    for t in range(T):
        for iv in range(nv):
            mx = weights[iv, 0]
            for ib in range(1, nb):
                if weights[iv, ib] > mx:
                    mx = weights[iv, ib]
            Z = 0.0
            for ib in range(nb):
                Z += math.exp(weights[iv, ib] - mx)
            target = uniforms[t, iv] * Z
            acc = 0.0
            pick = nb - 1
            for ib in range(nb):
                acc += math.exp(weights[iv, ib] - mx)
                if acc >= target:
                    pick = ib
                    break
            history[t, iv] = pick
        for ib in range(nb):
            q[ib] = 0.0
        for iv in range(nv):
            q[history[t, iv]] += W[iv]
        acc = 0.0
        for ib in range(nb):
            L[ib] = acc
            acc += q[ib]
        for iv in range(nv):
            v = V[iv]
            for ib in range(nb):
                lo = L[ib]
                e = q[ib]
                if e > 0.0:
                    hi = lo + e
                    win = (hi ** n_buyers - lo ** n_buyers) / (n_buyers * e)
                else:
                    win = lo ** (n_buyers - 1)
                if first_price:
                    u[iv, ib] = win * (v - B[ib])
                else:
                    u[iv, ib] = win * v - B[ib]
        for iv in range(nv):
            realized[iv] += u[iv, history[t, iv]]
            for ib in range(nb):
                u_sum[iv, ib] += u[iv, ib]
                weights[iv, ib] += eta * u[iv, ib]


def _epoch_numpy(first_price, n_buyers, V, B, W, eta, uniforms, weights,
                 history, u_sum, realized):
    T, nv = uniforms.shape
    rows = np.arange(nv)
    for t in range(T):
        ex = np.exp(weights - weights.max(axis=1)[:, None])
        cs = np.cumsum(ex, axis=1)
        target = uniforms[t] * cs[:, -1]
        picks = (cs < target[:, None]).sum(axis=1).astype(np.int32)
        history[t] = picks
        q = np.bincount(picks, weights=W, minlength=B.size)
        cum = np.cumsum(q)
        # exclusive prefix sum, matching the loop backend bit for bit
        L = np.concatenate(([0.0], cum[:-1]))
        hi = L + q
        with np.errstate(divide="ignore", invalid="ignore"):
            win = np.where(
                q > 0.0,
                (hi ** n_buyers - L ** n_buyers) / (n_buyers * np.where(q > 0.0, q, 1.0)),
                L ** (n_buyers - 1))
        if first_price:
            u = win[None, :] * (V[:, None] - B[None, :])
        else:
            u = win[None, :] * V[:, None] - B[None, :]
        realized += u[rows, picks]
        u_sum += u
        weights += eta * u


def _compiled_epoch():
    global _NUMBA_EPOCH
    if _NUMBA_EPOCH is None:
        _NUMBA_EPOCH = numba.njit(cache=True)(_epoch_loop)
    return _NUMBA_EPOCH


def run_epoch(backend, first_price, n_buyers, V, B, W, eta, uniforms,
              weights, history, u_sum, realized):
    """Advance one self-play epoch in place; all arrays are mutated."""
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}")
    if backend == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is missing")
        fn = _compiled_epoch()
    else:
        fn = _epoch_numpy
    fn(bool(first_price), int(n_buyers), V, B, W, float(eta), uniforms,
       weights, history, u_sum, realized)

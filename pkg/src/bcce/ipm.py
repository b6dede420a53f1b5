"""Sparse primal-dual interior point solver for equality-form LPs.

Solves min c @ x subject to A x = b, x >= 0 with a Mehrotra
predictor-corrector iteration on the normal equations

    (A Theta A' + delta I) dy = r,   Theta = x / z,

one sparse LU factorization per iteration. The delta regularization
keeps the factorization alive when the equality rows are rank
deficient, which the pair-relaxation constraint blocks are. The matrix
is geometric-mean equilibrated once up front; iterates are checked for
convergence in the original (unscaled) variables.

Deterministic: fixed pivot ordering (COLAMD), no randomness, so
repeated solves of the same problem are bit identical.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = ["solve_ipm"]

STEP_SCALE = 0.99995
REG_SCALE = 1e-10


def _gm_equilibrate(A: sp.csr_matrix, sweeps: int = 10):
    """Alternating geometric-mean row/column scaling of |A|."""
    m, n = A.shape
    dr = np.ones(m)
    dc = np.ones(n)
    As = A.copy().tocsr()
    for _ in range(sweeps):
        absd = np.abs(As.data)
        if absd.size == 0:
            break
        # row pass
        hi = np.full(m, -np.inf)
        lo = np.full(m, np.inf)
        rows = np.repeat(np.arange(m), np.diff(As.indptr))
        np.maximum.at(hi, rows, absd)
        np.minimum.at(lo, rows, absd)
        ok = np.isfinite(hi) & (hi > 0)
        s = np.ones(m)
        s[ok] = 1.0 / np.sqrt(hi[ok] * lo[ok])
        dr *= s
        As = sp.diags(s) @ As
        # column pass
        Ac = As.tocsc()
        absd = np.abs(Ac.data)
        hi = np.full(n, -np.inf)
        lo = np.full(n, np.inf)
        colidx = np.repeat(np.arange(n), np.diff(Ac.indptr))
        np.maximum.at(hi, colidx, absd)
        np.minimum.at(lo, colidx, absd)
        ok = np.isfinite(hi) & (hi > 0)
        s = np.ones(n)
        s[ok] = 1.0 / np.sqrt(hi[ok] * lo[ok])
        dc *= s
        As = (Ac @ sp.diags(s)).tocsr()
    return As, dr, dc


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return min(1.0, STEP_SCALE * float(np.min(-v[neg] / dv[neg])))


def solve_ipm(A: sp.csr_matrix, b: np.ndarray, c: np.ndarray, *,
              tol_res: float = 1e-9, tol_gap: float = 1e-9,
              tol_compl: float = 1e-8, max_iter: int = 200) -> dict:
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape

    As, dr, dc = _gm_equilibrate(A)
    bs = dr * b
    cs = dc * c
    AsT = As.T.tocsr()

    def normal_solve(theta, rhs_list):
        M = (As.multiply(theta)).dot(AsT).tocsc()
        diag = M.diagonal()
        delta = REG_SCALE * (diag.max() if diag.size else 1.0)
        M = M + delta * sp.identity(m, format="csc")
        lu = splu(M, permc_spec="COLAMD")
        return [lu.solve(r) for r in rhs_list]

    # Mehrotra starting point from a least squares pair
    ones = np.ones(n)
    w, y = normal_solve(ones, [bs, As @ cs])
    x = AsT @ w
    z = cs - AsT @ y
    dx = max(-1.5 * x.min(), 0.0)
    dz = max(-1.5 * z.min(), 0.0)
    xh = x + dx
    zh = z + dz
    dot = float(xh @ zh)
    sx = dot / zh.sum() if zh.sum() > 0 else 1.0
    sz = dot / xh.sum() if xh.sum() > 0 else 1.0
    x = xh + 0.5 * sx
    z = zh + 0.5 * sz
    x = np.maximum(x, 1e-10)
    z = np.maximum(z, 1e-10)

    b_norm = 1.0 + np.abs(b).max(initial=0.0)
    c_norm = 1.0 + np.abs(c).max(initial=0.0)
    status = "IterationLimit"
    iterations = 0

    for it in range(1, max_iter + 1):
        iterations = it
        # original-space residual check
        xo = dc * x
        yo = dr * y
        zo = z / dc
        rp = float(np.abs(A @ xo - b).max(initial=0.0))
        rd = float(np.abs(A.T @ yo + zo - c).max(initial=0.0))
        pobj = float(c @ xo)
        dobj = float(b @ yo)
        gap = abs(pobj - dobj)
        compl = float(np.abs(xo * zo).max(initial=0.0))
        if (rp <= tol_res * b_norm and rd <= tol_res * c_norm
                and gap <= tol_gap * (1.0 + abs(pobj))
                and compl <= tol_compl):
            status = "Optimal"
            break
        mu = float(x @ z) / n
        if not np.isfinite(mu) or mu > 1e14:
            break

        rb = As @ x - bs
        rc = AsT @ y + z - cs
        theta = x / z

        # affine predictor
        rmu = -x * z
        rhs = -rb - As @ (rmu / z + theta * rc)
        (dy_aff,) = normal_solve(theta, [rhs])
        dz_aff = -rc - AsT @ dy_aff
        dx_aff = rmu / z + theta * rc + theta * (AsT @ dy_aff)
        ap = _max_step(x, dx_aff)
        ad = _max_step(z, dz_aff)
        mu_aff = float((x + ap * dx_aff) @ (z + ad * dz_aff)) / n
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        rmu = -x * z - dx_aff * dz_aff + sigma * mu
        rhs = -rb - As @ (rmu / z + theta * rc)
        (dy,) = normal_solve(theta, [rhs])
        dz = -rc - AsT @ dy
        dx = rmu / z + theta * rc + theta * (AsT @ dy)
        ap = _max_step(x, dx)
        ad = _max_step(z, dz)
        x = x + ap * dx
        y = y + ad * dy
        z = z + ad * dz
        x = np.maximum(x, 1e-300)
        z = np.maximum(z, 1e-300)

    xo = dc * x
    yo = dr * y
    zo = z / dc
    return {"x": xo, "y": yo, "z": zo, "status": status,
            "iterations": iterations,
            "primal_residual": float(np.abs(A @ xo - b).max(initial=0.0)),
            "dual_residual": float(np.abs(A.T @ yo + zo - c).max(initial=0.0)),
            "complementarity": float(np.abs(xo * zo).max(initial=0.0)),
            "objective": float(c @ xo)}

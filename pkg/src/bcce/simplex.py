"""Dense two-phase primal simplex with Bland's rule.

Solves min c @ x subject to A x = b, x >= 0 exactly to working
precision on small instances, returning a basic optimal solution
(a vertex) and exact Infeasible / Unbounded statuses. Used as the
cross-check route against the interior point solver and wherever a
vertex (rather than an interior optimum) is required.

Bland's rule everywhere: the entering column is the smallest index
with reduced cost below -1e-9, leaving-row ties take the smallest
basic variable index. Finite termination, deterministic output.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = ["solve_simplex"]

RC_TOL = 1e-9
PIVOT_TOL = 1e-11
FEAS_TOL = 1e-8


def _pivot(T: np.ndarray, rhs: np.ndarray, basis: np.ndarray,
           row: int, col: int):
    piv = T[row, col]
    T[row] /= piv
    rhs[row] /= piv
    other = np.arange(T.shape[0]) != row
    factors = T[other, col].copy()
    T[other] -= factors[:, None] * T[row]
    rhs[other] -= factors * rhs[row]
    basis[row] = col


def _iterate(T, rhs, basis, cost, allowed, max_iter):
    """Run Bland pivots for the given cost vector. Returns
    (status, iterations): status 'optimal' or 'unbounded'."""
    m = T.shape[0]
    z = cost[basis] @ T - cost  # negated reduced costs
    it = 0
    while it < max_iter:
        it += 1
        cand = np.where(allowed & (z > RC_TOL))[0]
        if cand.size == 0:
            return "optimal", it
        j = int(cand[0])
        col = T[:, j]
        pos = col > PIVOT_TOL
        if not pos.any():
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[pos] = rhs[pos] / col[pos]
        best = ratios.min()
        tie = np.where(ratios <= best + 1e-12)[0]
        row = int(tie[np.argmin(basis[tie])])
        _pivot(T, rhs, basis, row, j)
        z = cost[basis] @ T - cost
    return "iteration_limit", it


def solve_simplex(A: sp.csr_matrix, b: np.ndarray, c: np.ndarray, *,
                  max_iter: int = 200_000) -> dict:
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    Ad = A.toarray()
    A_orig = Ad.copy()
    flip = b < 0
    Ad[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1: artificials for every row
    T = np.hstack([Ad, np.eye(m)])
    rhs = b.copy()
    basis = np.arange(n, n + m)
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    status, it1 = _iterate(T, rhs, basis, cost1, allowed, max_iter)
    if status == "iteration_limit":
        return {"status": "IterationLimit", "x": None, "y": None,
                "iterations": it1, "objective": np.nan}
    phase1_obj = float(cost1[basis] @ rhs)
    if phase1_obj > FEAS_TOL:
        return {"status": "Infeasible", "x": None, "y": None,
                "iterations": it1, "objective": np.nan}

    # drive artificials out of the basis; drop dependent rows
    keep_rows = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n:
            pivots = np.where(np.abs(T[i, :n]) > PIVOT_TOL)[0]
            if pivots.size:
                _pivot(T, rhs, basis, i, int(pivots[0]))
            else:
                keep_rows[i] = False
    if not keep_rows.all():
        T = T[keep_rows]
        rhs = rhs[keep_rows]
        basis = basis[keep_rows]

    # phase 2 on the original columns
    T = T[:, :n]
    cost2 = c
    allowed = np.ones(n, dtype=bool)
    status, it2 = _iterate(T, rhs, basis, cost2, allowed, max_iter)
    if status == "iteration_limit":
        return {"status": "IterationLimit", "x": None, "y": None,
                "iterations": it1 + it2, "objective": np.nan}
    if status == "unbounded":
        return {"status": "Unbounded", "x": None, "y": None,
                "iterations": it1 + it2, "objective": np.nan}

    x = np.zeros(n)
    x[basis] = rhs
    # duals from the original (unflipped, undropped) basis columns
    B = A_orig[:, basis][keep_rows]
    try:
        y_kept = np.linalg.solve(B.T, c[basis])
    except np.linalg.LinAlgError:
        y_kept = np.linalg.lstsq(B.T, c[basis], rcond=None)[0]
    y = np.zeros(m)
    kept_idx = np.where(keep_rows)[0]
    # rows were flipped before phase 1; the basis columns above came from
    # the original matrix restricted to kept rows, so y is already in
    # original row orientation
    y[kept_idx] = y_kept
    return {"status": "Optimal", "x": x, "y": y,
            "iterations": it1 + it2, "objective": float(c @ x)}

"""Solver facade and MPS interchange for LpProblem instances.

``solve`` converts row-form problems (mixed <, =, > rows, x >= 0) to
equality standard form with slacks and dispatches to the interior
point or simplex route. Duals are reported in the original row
orientation and objective sense: for a maximization problem the
internal minimization dual is negated, so a binding `<=` row of a
maximization carries a nonnegative dual.

The MPS writer emits a fixed section layout (NAME, OBJSENSE, ROWS,
COLUMNS, RHS, BOUNDS, ENDATA) with %.17g values, wide enough fields
for the generated row and column names, and no bound records (all
variables are nonnegative by convention). The parser accepts the same
dialect back, so export followed by parse reproduces the problem
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ipm import solve_ipm
from .lp_model import LpProblem
from .priors import DomainError
from .simplex import solve_simplex

__all__ = ["LpSolution", "solve", "standard_form", "export_mps",
           "mps_string", "parse_mps", "import_solution",
           "read_solution_file"]

METHODS = ("auto", "ipm", "simplex")


@dataclass(frozen=True)
class LpSolution:
    status: str
    objective: float
    primal: np.ndarray
    dual: np.ndarray
    max_primal_infeasibility: float
    max_dual_infeasibility: float
    complementarity: float
    iterations: int
    method: str


def standard_form(problem: LpProblem):
    """Equality form (A_std, b, c_min) with slack columns appended for
    every inequality row; returns also the original column count."""
    A = problem.A.tocsr()
    m, n = A.shape
    ineq = np.where(problem.rel != "=")[0]
    cols = []
    if ineq.size:
        sign = np.where(problem.rel[ineq] == "<", 1.0, -1.0)
        S = sp.coo_matrix((sign, (ineq, np.arange(ineq.size))),
                          shape=(m, ineq.size))
        A_std = sp.hstack([A, S], format="csr")
    else:
        A_std = A
    c = np.asarray(problem.c, dtype=float)
    if problem.sense == "max":
        c = -c
    elif problem.sense != "min":
        raise DomainError(f"unknown sense {problem.sense!r}")
    c_std = np.concatenate([c, np.zeros(ineq.size)])
    return A_std, np.asarray(problem.rhs, dtype=float), c_std, n


def _row_violations(problem: LpProblem, x: np.ndarray) -> float:
    Ax = problem.A @ x
    r = problem.rhs
    signed = np.where(problem.rel == "<", Ax - r, r - Ax)
    viol = np.where(problem.rel == "=", np.abs(Ax - r),
                    np.maximum(signed, 0.0))
    return float(viol.max(initial=0.0)) if viol.size else 0.0


def solve(problem: LpProblem, method: str = "auto", **kwargs) -> LpSolution:
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}")
    route = "ipm" if method == "auto" else method
    A_std, b, c_std, n = standard_form(problem)

    if route == "ipm":
        raw = solve_ipm(A_std, b, c_std, **kwargs)
    else:
        raw = solve_simplex(A_std, b, c_std, **kwargs)

    if raw["x"] is None:
        nan = float("nan")
        return LpSolution(status=raw["status"], objective=nan,
                          primal=np.full(n, nan), dual=np.full(len(b), nan),
                          max_primal_infeasibility=nan,
                          max_dual_infeasibility=nan, complementarity=nan,
                          iterations=raw["iterations"], method=route)

    x_full = np.asarray(raw["x"], dtype=float)
    x = x_full[:n]
    y_int = np.asarray(raw["y"], dtype=float)
    dual = -y_int if problem.sense == "max" else y_int.copy()
    z_int = c_std - A_std.T @ y_int
    dual_infeas = float(np.maximum(-z_int, 0.0).max(initial=0.0))
    compl = float(np.abs(x_full * z_int).max(initial=0.0))
    return LpSolution(status=raw["status"],
                      objective=problem.objective_value(x),
                      primal=x, dual=dual,
                      max_primal_infeasibility=_row_violations(problem, x),
                      max_dual_infeasibility=dual_infeas,
                      complementarity=compl,
                      iterations=raw["iterations"], method=route)


# -- MPS ----------------------------------------------------------------------

_REL_TO_MPS = {"<": "L", "=": "E", ">": "G"}
_MPS_TO_REL = {"L": "<", "E": "=", "G": ">"}


def mps_string(problem: LpProblem) -> str:
    width = max([len(s) for s in problem.row_labels + problem.col_labels]
                + [8]) + 2
    out = [f"NAME          {problem.name}"]
    out.append("OBJSENSE")
    out.append(f"    {problem.sense.upper()}")
    out.append("ROWS")
    out.append(" N  OBJ")
    for rel, label in zip(problem.rel, problem.row_labels):
        out.append(f" {_REL_TO_MPS[rel]}  {label}")
    out.append("COLUMNS")
    A = problem.A.tocsc()
    for j, col in enumerate(problem.col_labels):
        cj = problem.c[j]
        if cj != 0.0:
            out.append(f"    {col:<{width}}  OBJ  {cj:.17g}")
        for k in range(A.indptr[j], A.indptr[j + 1]):
            i = A.indices[k]
            out.append(f"    {col:<{width}}  {problem.row_labels[i]:<{width}}"
                       f"  {A.data[k]:.17g}")
    out.append("RHS")
    for i, label in enumerate(problem.row_labels):
        if problem.rhs[i] != 0.0:
            out.append(f"    RHS  {label:<{width}}  {problem.rhs[i]:.17g}")
    out.append("BOUNDS")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def export_mps(problem: LpProblem, path) -> None:
    with open(path, "w") as fh:
        fh.write(mps_string(problem))


def parse_mps(text: str) -> LpProblem:
    """Parse the dialect written by ``mps_string`` (free format,
    OBJSENSE section, no bound records)."""
    name = "parsed"
    sense = "min"
    section = None
    rows = []          # (rel, label)
    row_index = {}
    col_index = {}
    col_labels = []
    c_entries = {}
    coo = []           # (i, j, value)
    rhs_entries = {}
    expect_objsense = False

    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.rstrip()
        if not line or line.lstrip().startswith("*"):
            continue
        is_header = not rawline[:1].isspace()
        tokens = line.split()
        if is_header:
            head = tokens[0].upper()
            if head == "NAME":
                name = tokens[1] if len(tokens) > 1 else "parsed"
                section = None
            elif head == "OBJSENSE":
                expect_objsense = True
                section = "OBJSENSE"
                if len(tokens) > 1:
                    sense = tokens[1].lower()
                    expect_objsense = False
            elif head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES"):
                section = head
                expect_objsense = False
            elif head == "ENDATA":
                section = "DONE"
            else:
                raise DomainError(f"line {lineno}: unknown section {head!r}")
            continue

        if section == "OBJSENSE" and expect_objsense:
            sense = tokens[0].lower()
            expect_objsense = False
            continue
        if section == "ROWS":
            if len(tokens) != 2:
                raise DomainError(f"line {lineno}: malformed row record")
            kind, label = tokens[0].upper(), tokens[1]
            if kind == "N":
                continue
            if kind not in _MPS_TO_REL:
                raise DomainError(f"line {lineno}: unknown row type {kind!r}")
            if label in row_index:
                raise DomainError(f"line {lineno}: duplicate row {label!r}")
            row_index[label] = len(rows)
            rows.append((_MPS_TO_REL[kind], label))
            continue
        if section == "COLUMNS":
            if len(tokens) not in (3, 5):
                raise DomainError(f"line {lineno}: malformed column record")
            col = tokens[0]
            if col not in col_index:
                col_index[col] = len(col_labels)
                col_labels.append(col)
            j = col_index[col]
            for rname, sval in zip(tokens[1::2], tokens[2::2]):
                try:
                    val = float(sval)
                except ValueError:
                    raise DomainError(f"line {lineno}: bad value {sval!r}")
                if rname == "OBJ":
                    c_entries[j] = c_entries.get(j, 0.0) + val
                elif rname in row_index:
                    coo.append((row_index[rname], j, val))
                else:
                    raise DomainError(f"line {lineno}: unknown row {rname!r}")
            continue
        if section == "RHS":
            if len(tokens) not in (3, 5):
                raise DomainError(f"line {lineno}: malformed rhs record")
            for rname, sval in zip(tokens[1::2], tokens[2::2]):
                if rname not in row_index:
                    raise DomainError(f"line {lineno}: unknown row {rname!r}")
                rhs_entries[row_index[rname]] = float(sval)
            continue
        if section == "BOUNDS":
            raise DomainError(f"line {lineno}: bound records not supported")
        if section == "RANGES":
            raise DomainError(f"line {lineno}: ranges not supported")
        if section == "DONE":
            raise DomainError(f"line {lineno}: content after ENDATA")
        raise DomainError(f"line {lineno}: record outside any section")

    if sense not in ("min", "max"):
        raise DomainError(f"unknown objective sense {sense!r}")
    m, n = len(rows), len(col_labels)
    c = np.zeros(n)
    for j, v in c_entries.items():
        c[j] = v
    if coo:
        ii, jj, vv = zip(*coo)
        A = sp.coo_matrix((vv, (ii, jj)), shape=(m, n)).tocsr()
    else:
        A = sp.csr_matrix((m, n))
    rhs = np.zeros(m)
    for i, v in rhs_entries.items():
        rhs[i] = v
    return LpProblem(name=name, sense=sense, c=c, A=A,
                     rel=np.array([r for r, _ in rows]),
                     rhs=rhs, row_labels=[l for _, l in rows],
                     col_labels=col_labels, meta={"kind": "parsed"})


def import_solution(text: str, problem: LpProblem) -> np.ndarray:
    """Read `name value` pairs into a primal vector ordered like the
    problem's columns; unlisted columns are zero."""
    index = {label: j for j, label in enumerate(problem.col_labels)}
    x = np.zeros(problem.n_cols)
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DomainError(f"line {lineno}: expected `name value`")
        if parts[0] not in index:
            raise DomainError(f"line {lineno}: unknown column {parts[0]!r}")
        try:
            x[index[parts[0]]] = float(parts[1])
        except ValueError:
            raise DomainError(f"line {lineno}: bad value {parts[1]!r}")
    return x


def read_solution_file(path, problem: LpProblem) -> np.ndarray:
    with open(path) as fh:
        return import_solution(fh.read(), problem)

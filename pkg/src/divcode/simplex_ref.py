"""Dense two-phase tableau simplex with Bland's rule.

Deliberately naive and slow: it is the reference against which the
HiGHS-backed ``solve_lp`` is cross-checked, so it shares no code with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .lp import EQ, GE, LE, LinearProgram

EPS = 1e-10


@dataclass
class ReferenceResult:
    status: str
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None


def _pivot(T: np.ndarray, basis: List[int], r: int, c: int) -> None:
    T[r] /= T[r, c]
    for i in range(T.shape[0]):
        if i != r and T[i, c] != 0.0:
            T[i] -= T[i, c] * T[r]
    basis[r] = c


def _run(T: np.ndarray, basis: List[int], n_cols: int, max_iter: int) -> str:
    """Minimize the objective held in the last row of ``T``; Bland's rule."""
    for _ in range(max_iter):
        obj = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if obj[j] < -EPS), None)
        if entering is None:
            return "optimal"
        col = T[:-1, entering]
        best, leave = math.inf, None
        for i in range(len(basis)):
            if col[i] > EPS:
                ratio = T[i, -1] / col[i]
                if ratio < best - EPS or (abs(ratio - best) <= EPS and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            return "unbounded"
        _pivot(T, basis, leave, entering)
    return "limit"


def reference_simplex(p: LinearProgram, max_iter: int = 10_000) -> ReferenceResult:
    """Solve the continuous relaxation of ``p`` in dense standard form.

    Variables with finite lower bound are shifted to zero, finite upper
    bounds become extra rows, free variables are split.  Duals are reported
    per original constraint as d(objective)/d(rhs).
    """
    n = p.n_vars
    # x_j = shift_j + sum_k cols[j][k] * y_k, y >= 0
    shift = np.zeros(n)
    expand: List[List[tuple]] = []
    n_y = 0
    for j, v in enumerate(p.variables):
        if math.isfinite(v.lb):
            shift[j] = v.lb
            expand.append([(n_y, 1.0)])
            n_y += 1
        elif math.isfinite(v.ub):
            shift[j] = v.ub
            expand.append([(n_y, -1.0)])
            n_y += 1
        else:
            expand.append([(n_y, 1.0), (n_y + 1, -1.0)])
            n_y += 2

    rows, senses, rhs = [], [], []
    for con in p.constraints:
        a = np.zeros(n_y)
        b = con.rhs
        for j, coef in con.coeffs.items():
            b -= coef * shift[j]
            for k, s in expand[j]:
                a[k] += coef * s
        rows.append(a)
        senses.append(con.sense)
        rhs.append(b)
    n_orig_rows = len(rows)
    for j, v in enumerate(p.variables):
        if math.isfinite(v.lb) and math.isfinite(v.ub):
            a = np.zeros(n_y)
            a[expand[j][0][0]] = 1.0
            rows.append(a)
            senses.append(LE)
            rhs.append(v.ub - v.lb)

    c = np.zeros(n_y)
    const = p.obj_offset
    for j, coef in p.objective.items():
        const += coef * shift[j]
        for k, s in expand[j]:
            c[k] += coef * s

    m = len(rows)
    flip = np.ones(m)
    for i in range(m):
        if rhs[i] < 0:
            flip[i] = -1.0
            rows[i] = -rows[i]
            rhs[i] = -rhs[i]
            senses[i] = {LE: GE, GE: LE, EQ: EQ}[senses[i]]

    n_slack = sum(1 for s in senses if s != EQ)
    n_art = sum(1 for s in senses if s != LE)
    width = n_y + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    basis: List[int] = []
    slack_col = {}
    art_cols = []
    sc, ac = n_y, n_y + n_slack
    for i in range(m):
        T[i, :n_y] = rows[i]
        T[i, -1] = rhs[i]
        if senses[i] == LE:
            T[i, sc] = 1.0
            slack_col[i] = (sc, 1.0)
            basis.append(sc)
            sc += 1
        else:
            if senses[i] == GE:
                T[i, sc] = -1.0
                slack_col[i] = (sc, -1.0)
                sc += 1
            T[i, ac] = 1.0
            art_cols.append(ac)
            basis.append(ac)
            ac += 1

    # phase 1
    T[-1, :] = 0.0
    for col in art_cols:
        T[-1, col] = 1.0
    for i, b in enumerate(basis):
        if b in art_cols:
            T[-1] -= T[i]
    status = _run(T, basis, width, max_iter)
    if status != "optimal":
        return ReferenceResult(status)
    if -T[-1, -1] > 1e-7:
        return ReferenceResult("infeasible")
    art = set(art_cols)
    for i, b in enumerate(basis):
        if b in art:
            pivot_col = next(
                (j for j in range(n_y + n_slack) if abs(T[i, j]) > 1e-9), None
            )
            if pivot_col is not None:
                _pivot(T, basis, i, pivot_col)

    # phase 2: drop artificial columns
    keep = [j for j in range(width) if j not in art] + [width]
    T = T[:, keep]
    n_cols = n_y + n_slack
    T[-1, :] = 0.0
    T[-1, :n_y] = c
    for i, b in enumerate(basis):
        if b < n_cols and T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[i]
    # rows whose artificial could not be pivoted out are redundant; keep them
    # inert by leaving their (zero) basic artificial out of the column range
    status = _run(T, basis, n_cols, max_iter)
    if status != "optimal":
        return ReferenceResult(status)

    y = np.zeros(n_cols)
    for i, b in enumerate(basis):
        if b < n_cols:
            y[b] = T[i, -1]
    x = shift.copy()
    for j in range(n):
        for k, s in expand[j]:
            x[j] += s * y[k]
    objective = float(c @ y[:n_y] + const)

    # duals: solve B^T pi = c_B on the (sign-normalized) rows
    duals = np.full(n_orig_rows, math.nan)
    basic_rows = [i for i, b in enumerate(basis) if b < n_cols]
    A_full = np.zeros((m, n_cols))
    for i in range(m):
        A_full[i, :n_y] = rows[i]
        if i in slack_col:
            col, sgn = slack_col[i]
            A_full[i, col] = sgn
    cost_full = np.zeros(n_cols)
    cost_full[:n_y] = c
    basic_cols = [basis[i] for i in basic_rows]
    if len(basic_cols) == m:
        Bm = A_full[:, basic_cols]
        try:
            pi = np.linalg.solve(Bm.T, cost_full[basic_cols])
            duals = (pi * flip)[:n_orig_rows]
        except np.linalg.LinAlgError:
            pass
    else:
        sol, *_ = np.linalg.lstsq(A_full[:, basic_cols].T, cost_full[basic_cols], rcond=None)
        duals = (sol * flip)[:n_orig_rows]
    return ReferenceResult("optimal", objective, x, duals)

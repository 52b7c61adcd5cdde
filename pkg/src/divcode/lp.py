"""Linear and mixed-integer programming layer.

``LinearProgram`` is a small sparse model container (always minimization).
``solve_lp`` solves the continuous relaxation with HiGHS and reports dual
prices as d(objective)/d(rhs), so a binding ``>=`` row has a nonnegative
dual.  ``solve_mip`` runs a best-first branch and bound over those
relaxations, or hands the model to the HiGHS MIP solver when
``method="highs"``.
"""

from __future__ import annotations

import heapq
import math
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import optimize, sparse

LP_TOL = 1e-7
INT_TOL = 1e-6

CONTINUOUS, INTEGER, BINARY = "C", "I", "B"
LE, GE, EQ = "<=", ">=", "="


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    kind: str = CONTINUOUS


@dataclass
class Constraint:
    coeffs: Dict[int, float]
    sense: str
    rhs: float
    name: str


class LinearProgram:
    """Minimize ``sum(obj[j] * x[j])`` subject to sparse rows and bounds."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.variables: List[Variable] = []
        self.objective: Dict[int, float] = {}
        self.constraints: List[Constraint] = []
        self.obj_offset = 0.0

    def add_var(self, name=None, lb=0.0, ub=math.inf, kind=CONTINUOUS, cost=0.0) -> int:
        if kind == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"empty bounds for {name}")
        j = len(self.variables)
        self.variables.append(Variable(name or f"x{j}", float(lb), float(ub), kind))
        if cost:
            self.objective[j] = float(cost)
        return j

    def add_constraint(self, coeffs, sense, rhs, name=None) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        row: Dict[int, float] = {}
        for j, a in dict(coeffs).items():
            if not 0 <= j < len(self.variables):
                raise IndexError(f"unknown variable {j}")
            if a:
                row[j] = row.get(j, 0.0) + float(a)
        i = len(self.constraints)
        self.constraints.append(Constraint(row, sense, float(rhs), name or f"c{i}"))
        return i

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def integer_indices(self) -> List[int]:
        return [j for j, v in enumerate(self.variables) if v.kind != CONTINUOUS]

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def matrix(self):
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, a in con.coeffs.items():
                rows.append(i)
                cols.append(j)
                vals.append(a)
        shape = (len(self.constraints), self.n_vars)
        return sparse.csr_matrix((vals, (rows, cols)), shape=shape)

    def evaluate(self, x) -> float:
        return self.obj_offset + sum(a * x[j] for j, a in self.objective.items())

    def max_violation(self, x) -> float:
        worst = 0.0
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.coeffs.items())
            if con.sense == LE:
                worst = max(worst, lhs - con.rhs)
            elif con.sense == GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        for j, v in enumerate(self.variables):
            worst = max(worst, v.lb - x[j], x[j] - v.ub)
        return worst


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    bound: float = math.nan
    nodes: int = 0
    elapsed: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def gap(self) -> float:
        if self.x is None or math.isnan(self.bound):
            return math.inf
        return abs(self.objective - self.bound) / max(1.0, abs(self.objective))


@dataclass
class MipLimits:
    node_limit: int = 1_000_000
    time_limit: float = 600.0
    method: str = "bnb"

    @classmethod
    def from_env(cls, **overrides) -> "MipLimits":
        """Defaults, with ``DIVCODE_MIP_TIME_LIMIT`` honoured when set."""
        limits = cls(**overrides)
        env = os.environ.get("DIVCODE_MIP_TIME_LIMIT")
        if env and "time_limit" not in overrides:
            limits.time_limit = float(env)
        return limits


def _bounds(p: LinearProgram, lb=None, ub=None):
    lo = np.array([v.lb for v in p.variables]) if lb is None else lb
    hi = np.array([v.ub for v in p.variables]) if ub is None else ub
    return lo, hi


def _split_rows(p: LinearProgram):
    A = p.matrix()
    senses = [c.sense for c in p.constraints]
    rhs = np.array([c.rhs for c in p.constraints])
    ub_rows = [i for i, s in enumerate(senses) if s != EQ]
    eq_rows = [i for i, s in enumerate(senses) if s == EQ]
    sign = np.array([1.0 if senses[i] == LE else -1.0 for i in ub_rows])
    A_ub = sparse.diags(sign) @ A[ub_rows] if ub_rows else None
    b_ub = sign * rhs[ub_rows] if ub_rows else None
    A_eq = A[eq_rows] if eq_rows else None
    b_eq = rhs[eq_rows] if eq_rows else None
    return A_ub, b_ub, A_eq, b_eq, ub_rows, eq_rows, sign


def solve_lp(p: LinearProgram, lb=None, ub=None) -> SolveResult:
    """Continuous relaxation; integrality flags are ignored."""
    t0 = time.perf_counter()
    if p.n_vars == 0:
        bad = any(
            (c.sense == LE and c.rhs < -LP_TOL)
            or (c.sense == GE and c.rhs > LP_TOL)
            or (c.sense == EQ and abs(c.rhs) > LP_TOL)
            for c in p.constraints
        )
        if bad:
            return SolveResult("infeasible", elapsed=time.perf_counter() - t0)
        return SolveResult(
            "optimal", p.obj_offset, np.zeros(0), np.zeros(len(p.constraints)), p.obj_offset
        )
    lo, hi = _bounds(p, lb, ub)
    A_ub, b_ub, A_eq, b_eq, ub_rows, eq_rows, sign = _split_rows(p)
    res = optimize.linprog(
        p.cost_vector(),
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=list(zip(lo, hi)),
        method="highs",
        options={"primal_feasibility_tolerance": LP_TOL, "dual_feasibility_tolerance": LP_TOL},
    )
    elapsed = time.perf_counter() - t0
    if res.status == 2:
        return SolveResult("infeasible", elapsed=elapsed)
    if res.status == 3:
        return SolveResult("unbounded", elapsed=elapsed)
    if res.status != 0:
        return SolveResult("limit", elapsed=elapsed)
    duals = np.zeros(len(p.constraints))
    if ub_rows:
        # marginals are d(obj)/d(b_ub) of the sign-flipped rows
        duals[ub_rows] = sign * res.ineqlin.marginals
    if eq_rows:
        duals[eq_rows] = res.eqlin.marginals
    obj = float(res.fun) + p.obj_offset
    return SolveResult("optimal", obj, np.asarray(res.x), duals, obj, elapsed=elapsed)


def _most_fractional(x, int_idx) -> Optional[int]:
    best, best_score = None, None
    for j in int_idx:
        frac = x[j] - math.floor(x[j])
        if frac <= INT_TOL or frac >= 1 - INT_TOL:
            continue
        score = abs(frac - 0.5)
        if best_score is None or score < best_score - 1e-12:
            best, best_score = j, score
    return best


def _branch_and_bound(p: LinearProgram, limits: MipLimits) -> SolveResult:
    t0 = time.perf_counter()
    int_idx = p.integer_indices()
    lo0, hi0 = _bounds(p)
    lo0 = lo0.copy()
    hi0 = hi0.copy()
    for j in int_idx:
        lo0[j] = math.ceil(lo0[j] - INT_TOL) if math.isfinite(lo0[j]) else lo0[j]
        hi0[j] = math.floor(hi0[j] + INT_TOL) if math.isfinite(hi0[j]) else hi0[j]
    root = solve_lp(p, lo0, hi0)
    if root.status in ("infeasible", "unbounded"):
        return SolveResult(root.status, nodes=1, elapsed=time.perf_counter() - t0)
    if root.status != "optimal":
        return SolveResult("limit", nodes=1, elapsed=time.perf_counter() - t0)

    incumbent, inc_x = math.inf, None
    heap = [(root.objective, 0, lo0, hi0, root)]
    tick, nodes = 0, 0
    limited = False
    while heap:
        bound, _, lo, hi, relax = heapq.heappop(heap)
        if bound >= incumbent - LP_TOL * max(1.0, abs(incumbent)):
            continue
        if nodes >= limits.node_limit or time.perf_counter() - t0 > limits.time_limit:
            heapq.heappush(heap, (bound, -1, lo, hi, relax))
            limited = True
            break
        nodes += 1
        if relax is None:
            relax = solve_lp(p, lo, hi)
            if relax.status != "optimal":
                continue
            if relax.objective >= incumbent - LP_TOL * max(1.0, abs(incumbent)):
                continue
        j = _most_fractional(relax.x, int_idx)
        if j is None:
            x = relax.x.copy()
            for k in int_idx:
                x[k] = round(x[k])
            incumbent, inc_x = relax.objective, x
            continue
        v = relax.x[j]
        down_hi = hi.copy()
        down_hi[j] = math.floor(v)
        up_lo = lo.copy()
        up_lo[j] = math.ceil(v)
        for child_lo, child_hi in ((lo, down_hi), (up_lo, hi)):
            tick += 1
            heapq.heappush(heap, (relax.objective, tick, child_lo, child_hi, None))

    elapsed = time.perf_counter() - t0
    if limited:
        best_bound = min(h[0] for h in heap)
        if inc_x is None:
            return SolveResult("limit", bound=best_bound, nodes=nodes, elapsed=elapsed)
        return SolveResult(
            "limit", p.evaluate(inc_x), inc_x, None, best_bound, nodes, elapsed
        )
    if inc_x is None:
        return SolveResult("infeasible", nodes=nodes, elapsed=elapsed)
    obj = p.evaluate(inc_x)
    return SolveResult("optimal", obj, inc_x, None, obj, nodes, elapsed)


def _highs_mip(p: LinearProgram, limits: MipLimits) -> SolveResult:
    t0 = time.perf_counter()
    lo, hi = _bounds(p)
    integrality = np.array([0 if v.kind == CONTINUOUS else 1 for v in p.variables])
    cons = []
    if p.constraints:
        A = p.matrix()
        row_lo = np.array([c.rhs if c.sense != LE else -np.inf for c in p.constraints])
        row_hi = np.array([c.rhs if c.sense != GE else np.inf for c in p.constraints])
        cons.append(optimize.LinearConstraint(A, row_lo, row_hi))
    res = optimize.milp(
        p.cost_vector(),
        integrality=integrality,
        bounds=optimize.Bounds(lo, hi),
        constraints=cons,
        options={
            "time_limit": limits.time_limit,
            "node_limit": limits.node_limit,
            "mip_rel_gap": 0.0,
            "presolve": True,
        },
    )
    elapsed = time.perf_counter() - t0
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    bound = getattr(res, "mip_dual_bound", math.nan)
    bound = math.nan if bound is None else float(bound) + p.obj_offset
    if res.status == 2:
        return SolveResult("infeasible", nodes=nodes, elapsed=elapsed)
    if res.status == 3:
        return SolveResult("unbounded", nodes=nodes, elapsed=elapsed)
    if res.x is None:
        return SolveResult("limit", bound=bound, nodes=nodes, elapsed=elapsed)
    x = np.asarray(res.x).copy()
    for j in np.flatnonzero(integrality):
        x[j] = round(x[j])
    obj = p.evaluate(x)
    status = "optimal" if res.status == 0 else "limit"
    if status == "optimal":
        bound = obj
    return SolveResult(status, obj, x, None, bound, nodes, elapsed)


def solve_mip(p: LinearProgram, limits: Optional[MipLimits] = None) -> SolveResult:
    """Integer-restricted solve; status ``limit`` carries incumbent and bound."""
    limits = limits or MipLimits()
    if not p.integer_indices():
        raise ValueError("solve_mip needs at least one integer variable")
    if limits.method == "highs":
        return _highs_mip(p, limits)
    if limits.method != "bnb":
        raise ValueError(f"unknown MIP method {limits.method!r}")
    return _branch_and_bound(p, limits)


# --- LP file export -------------------------------------------------------


def _lp_name(name: str) -> str:
    out = "".join(ch if ch.isalnum() or ch in "_.[]" else "_" for ch in name)
    return out if out and not out[0].isdigit() and out[0] != "." else "x_" + out


def _lp_terms(coeffs: Dict[int, float], names: Sequence[str]) -> str:
    if not coeffs:
        return "0 " + names[0] if names else "0"
    parts = []
    for k, (j, a) in enumerate(sorted(coeffs.items())):
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        term = names[j] if mag == 1 else f"{mag:.17g} {names[j]}"
        parts.append((f"- {term}" if sign == "-" else term) if k == 0 else f"{sign} {term}")
    return " ".join(parts)


def to_lp_format(p: LinearProgram) -> str:
    """Render in CPLEX LP file syntax (see README for the exact grammar used)."""
    names = [_lp_name(v.name) for v in p.variables]
    seen: Dict[str, int] = {}
    for j, n in enumerate(names):
        if n in seen:
            names[j] = f"{n}_{j}"
        seen[names[j]] = j
    lines = [f"\\ {p.name}", "Minimize", f" obj: {_lp_terms(p.objective, names)}"]
    lines.append("Subject To")
    for i, c in enumerate(p.constraints):
        op = {LE: "<=", GE: ">=", EQ: "="}[c.sense]
        lines.append(f" {_lp_name(c.name)}_{i}: {_lp_terms(c.coeffs, names)} {op} {c.rhs:.17g}")
    lines.append("Bounds")
    for j, v in enumerate(p.variables):
        if v.kind == BINARY:
            continue
        if v.lb == -math.inf and v.ub == math.inf:
            lines.append(f" {names[j]} free")
        elif v.ub == math.inf:
            if v.lb != 0.0:
                lines.append(f" {names[j]} >= {v.lb:.17g}")
        else:
            lo = "-inf" if v.lb == -math.inf else f"{v.lb:.17g}"
            lines.append(f" {lo} <= {names[j]} <= {v.ub:.17g}")
    ints = [names[j] for j, v in enumerate(p.variables) if v.kind == INTEGER]
    bins = [names[j] for j, v in enumerate(p.variables) if v.kind == BINARY]
    if ints:
        lines.append("General")
        lines.append(" " + " ".join(ints))
    if bins:
        lines.append("Binary")
        lines.append(" " + " ".join(bins))
    lines.append("End")
    return "\n".join(lines) + "\n"

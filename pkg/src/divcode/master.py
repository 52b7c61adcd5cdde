"""Coding-group placement and the per-destination column-generation loop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional

from .coding import CodingGroup, group_to_json, singleton_structure, verify_group
from .lp import GE, LinearProgram, MipLimits, solve_lp, solve_mip
from .netgraph import Network, Node, disjoint_pair, nodal_degree, serialize_topology, shortest_path
from .pricing import PricingRequest, enumerate_below, price
from .traffic import TrafficMatrix, aggregate_to_destination

log = logging.getLogger(__name__)

MAX_ITER = 500
ENUM_BUDGET = 500
# per destination; past it the plan is kept but not certified optimal
ENUM_SECONDS = 10.0
GAP_TOL = 1e-9
PLAN_SCHEMA = "divcode.plan/1"


class ColumnPool:
    """Columns for one destination, deduplicated by canonical id."""

    def __init__(self, destination: Node, columns: Iterable[CodingGroup] = ()):
        self.destination = destination
        self.columns: List[CodingGroup] = []
        self._index: Dict[str, int] = {}
        for c in columns:
            self.add(c)

    def add(self, group: CodingGroup) -> bool:
        if group.destination != self.destination:
            raise ValueError(f"column for {group.destination} added to pool of {self.destination}")
        if group.id in self._index:
            return False
        self._index[group.id] = len(self.columns)
        self.columns.append(group)
        return True

    def __contains__(self, group_id: str) -> bool:
        return group_id in self._index

    def __len__(self) -> int:
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)


@dataclass
class MasterSolution:
    multiplicities: List[float]
    objective: float
    duals: Dict[Node, float]
    iteration: int = 0
    status: str = "optimal"


def seed_pool(net: Network, dv: Mapping[Node, int], d: Node) -> ColumnPool:
    pool = ColumnPool(d)
    for f in sorted((f for f, t in dv.items() if t > 0), key=net.nodes.index):
        pair = disjoint_pair(net, f, d)
        pool.add(CodingGroup.from_structure(singleton_structure(net, d, f, pair)))
    return pool


def _placement_model(pool: ColumnPool, dv: Mapping[Node, int], integer: bool):
    p = LinearProgram("placement")
    kind = "I" if integer else "C"
    xs = [p.add_var(f"n[{i}]", 0, math.inf, kind, cost=g.cost) for i, g in enumerate(pool)]
    rows = {}
    for f, t in dv.items():
        if t <= 0:
            continue
        row = {xs[i]: g.counts[f] for i, g in enumerate(pool) if g.counts.get(f, 0)}
        if not row:
            raise ValueError(f"no column covers source {f}")
        rows[f] = p.add_constraint(row, GE, t, f"cover[{f}]")
    return p, rows


def solve_master_lp(pool: ColumnPool, dv: Mapping[Node, int]) -> MasterSolution:
    p, rows = _placement_model(pool, dv, integer=False)
    if not rows:
        return MasterSolution([0.0] * len(pool), 0.0, {})
    res = solve_lp(p)
    if not res.optimal:
        raise RuntimeError(f"master LP {res.status}")
    # zero-demand sources carry no row and price at 0
    duals = {f: max(0.0, float(res.duals[r])) for f, r in rows.items()}
    return MasterSolution([float(v) for v in res.x], res.objective, duals)


def solve_master_ilp(pool: ColumnPool, dv: Mapping[Node, int], limits: Optional[MipLimits] = None) -> MasterSolution:
    p, rows = _placement_model(pool, dv, integer=True)
    if not rows:
        return MasterSolution([0.0] * len(pool), 0.0, {})
    res = solve_mip(p, limits or MipLimits(method="highs"))
    if res.x is None:
        raise RuntimeError(f"master ILP {res.status}")
    n = [float(round(v)) for v in res.x]
    obj = sum(g.cost * k for g, k in zip(pool, n))
    return MasterSolution(n, obj, {}, status=res.status)


@dataclass
class TraceRow:
    iteration: int
    lp_objective: float
    reduced_cost: float
    column_id: str
    column_cost: float
    pricing_status: str


@dataclass
class DesignResult:
    destination: Node
    mode: str
    demands: Dict[Node, int]
    pool: ColumnPool
    lp: MasterSolution
    ilp: MasterSolution
    trace: List[TraceRow]
    proven: bool = True
    warnings: List[str] = field(default_factory=list)
    generated: int = 0
    elapsed: float = 0.0
    enumerated: int = 0
    # the ILP optimum is certified over every column the pricing model can build
    integer_optimal: bool = False

    @property
    def gap(self) -> float:
        if self.lp.objective <= 0:
            return 0.0
        return (self.ilp.objective - self.lp.objective) / self.lp.objective

    def placed(self):
        return [(g, int(k)) for g, k in zip(self.pool, self.ilp.multiplicities) if k > 0]


def run_column_generation(
    net: Network,
    dv: Mapping[Node, int],
    d: Node,
    mode: str = "sdc",
    limits: Optional[MipLimits] = None,
    max_iter: int = MAX_ITER,
    initial: Iterable[CodingGroup] = (),
    rc_tol: float = 1e-6,
    close_gap: Optional[bool] = None,
    enum_budget: int = ENUM_BUDGET,
    enum_seconds: float = ENUM_SECONDS,
) -> DesignResult:
    """Alternate master LP and pricing until no column prices out, then solve the ILP.

    ``initial`` adds extra starting columns (e.g. the final pool of a weaker
    coding mode) on top of the singleton seeds.  With ``close_gap`` every
    column whose reduced cost at the final duals is below the ILP/LP gap is
    added before a last ILP solve; no other column can appear in a cheaper
    integer plan, so the result is the integer optimum.  The default closes
    the gap for ``sdc`` only: the nonsystematic models carry many equivalent
    encodings per column and the sweep is slow there.
    """
    t0 = time.perf_counter()
    limits = limits or MipLimits(method="highs")
    dv = {f: int(t) for f, t in dv.items() if t > 0}
    pool = seed_pool(net, dv, d)
    for g in initial:
        pool.add(g)
    trace: List[TraceRow] = []
    warnings: List[str] = []
    proven = True
    generated = 0
    lp = solve_master_lp(pool, dv)
    if dv:
        if nodal_degree(net, d) < 2:
            raise ValueError(f"destination {d} has nodal degree < 2")
        for it in range(1, max_iter + 1):
            lp.iteration = it
            res = price(PricingRequest(net, d, lp.duals, mode=mode, limits=limits, rc_tol=rc_tol))
            if res.column is None:
                trace.append(TraceRow(it, lp.objective, res.reduced_cost, "", math.nan, res.status))
                if res.status != "optimal":
                    proven = False
                    warnings.append(f"pricing {res.status} at iteration {it}; bound unproven")
                break
            col = res.column
            trace.append(TraceRow(it, lp.objective, res.reduced_cost, col.id, col.cost, res.status))
            if not pool.add(col):
                warnings.append(f"pricing returned pooled column {col.id}; stopping")
                break
            generated += 1
            lp = solve_master_lp(pool, dv)
        else:
            proven = False
            warnings.append(f"iteration limit {max_iter} reached")
    ilp = solve_master_ilp(pool, dv)
    enumerated = 0
    if close_gap is None:
        close_gap = mode == "sdc"
    slack = ilp.objective - lp.objective - GAP_TOL * max(1.0, abs(ilp.objective))
    certified = not dv or (proven and slack <= 0)
    if dv and proven and close_gap and slack > 0:
        req = PricingRequest(net, d, lp.duals, mode=mode, limits=limits, rc_tol=rc_tol, sources=list(dv))
        cols, status = enumerate_below(req, slack, enum_budget, enum_seconds)
        enumerated = sum(pool.add(c) for c in cols)
        if enumerated:
            ilp = solve_master_ilp(pool, dv)
        certified = status == "optimal"
        if not certified:
            warnings.append(f"gap enumeration ended with status {status}")
    for w in warnings:
        log.warning("%s: %s", d, w)
    return DesignResult(
        d, mode, dv, pool, lp, ilp, trace, proven, warnings, generated, time.perf_counter() - t0,
        enumerated, certified,
    )


def verify_placed(result: DesignResult) -> List[str]:
    """Descriptions of every placed column failing single-span verification."""
    bad = []
    for g, _ in result.placed():
        rep = verify_group(g.structure)
        if not rep.ok or rep.problems:
            bad.append(f"{g.id}: spans {rep.describe(g.structure.net)} {rep.problems}")
    return bad


# --- network-wide plans -----------------------------------------------------


def primary_capacity(net: Network, tm: TrafficMatrix) -> float:
    """Cost of routing every demand unit once on its shortest path."""
    total = 0.0
    for (s, d), units in tm.entries.items():
        path = shortest_path(net, s, d)
        if path is None:
            raise ValueError(f"{d} unreachable from {s}")
        total += units * net.path_length(path)
    return total


@dataclass
class Plan:
    net: Network
    mode: str
    results: Dict[Node, DesignResult]
    errors: Dict[Node, str]
    primary: float

    @property
    def total_cost(self) -> float:
        return sum(r.ilp.objective for r in self.results.values())

    @property
    def lp_total(self) -> float:
        return sum(r.lp.objective for r in self.results.values())

    @property
    def scap(self) -> float:
        """Spare capacity as a percentage of primary capacity."""
        if self.primary <= 0:
            return 0.0
        return 100.0 * (self.total_cost - self.primary) / self.primary

    @property
    def columns_generated(self) -> int:
        return sum(r.generated for r in self.results.values())

    def scap_by_degree(self, tm: TrafficMatrix) -> Dict[int, float]:
        """SCaP restricted to destinations of each nodal degree."""
        cost: Dict[int, float] = {}
        prim: Dict[int, float] = {}
        for d, r in self.results.items():
            k = nodal_degree(self.net, d)
            cost[k] = cost.get(k, 0.0) + r.ilp.objective
            sub = TrafficMatrix({key: u for key, u in tm.entries.items() if key[1] == d})
            prim[k] = prim.get(k, 0.0) + primary_capacity(self.net, sub)
        return {k: 100.0 * (cost[k] - prim[k]) / prim[k] for k in sorted(cost) if prim[k] > 0}


def design_all_destinations(
    net: Network,
    tm: TrafficMatrix,
    mode: str = "sdc",
    limits: Optional[MipLimits] = None,
    max_iter: int = MAX_ITER,
    destinations: Optional[Iterable[Node]] = None,
    initial: Optional[Mapping[Node, Iterable[CodingGroup]]] = None,
    rc_tol: float = 1e-6,
    close_gap: Optional[bool] = None,
) -> Plan:
    dests = list(destinations) if destinations is not None else tm.destinations()
    results: Dict[Node, DesignResult] = {}
    errors: Dict[Node, str] = {}
    for d in dests:
        dv = aggregate_to_destination(tm, d)
        if not dv:
            continue
        try:
            seed = initial.get(d, ()) if initial else ()
            results[d] = run_column_generation(
                net, dv, d, mode, limits, max_iter, seed, rc_tol, close_gap
            )
        except Exception as exc:  # collected per destination, run continues
            log.error("destination %s failed: %s", d, exc)
            errors[d] = f"{type(exc).__name__}: {exc}"
    sub = TrafficMatrix({k: u for k, u in tm.entries.items() if k[1] in results})
    return Plan(net, mode, results, errors, primary_capacity(net, sub))


def mode_sweep(net: Network, tm: TrafficMatrix, modes=("sdc", "nsdc", "cdc"), **kw) -> Dict[str, Plan]:
    """Design with each mode in turn, seeding each run with the previous pools.

    A systematic group is a valid nonsystematic one and every nonsystematic
    group is a valid coherent one, so chaining pools keeps the integer
    totals ordered even though the final ILP is restricted to generated
    columns.
    """
    plans: Dict[str, Plan] = {}
    carry: Dict[Node, List[CodingGroup]] = {}
    for mode in modes:
        plan = design_all_destinations(net, tm, mode, initial=carry, **kw)
        plans[mode] = plan
        carry = {d: list(r.pool) for d, r in plan.results.items()}
    return plans


def granularity_study(
    net: Network, dv: Mapping[Node, int], d: Node, factors=(1, 10, 100), mode: str = "sdc", **kw
) -> List[dict]:
    """Scale every demand by each factor; report LP/ILP per demand unit and the gap."""
    rows = []
    for k in factors:
        r = run_column_generation(net, {f: t * k for f, t in dv.items()}, d, mode, **kw)
        rows.append(
            {
                "factor": k,
                "lp_per_unit": r.lp.objective / k,
                "ilp_per_unit": r.ilp.objective / k,
                "gap": r.gap,
                "columns": len(r.pool),
            }
        )
    return rows


# --- serialization ----------------------------------------------------------


def result_to_json(r: DesignResult) -> dict:
    return {
        "destination": r.destination,
        "mode": r.mode,
        "demands": dict(sorted(r.demands.items())),
        "lp_objective": r.lp.objective,
        "ilp_objective": r.ilp.objective,
        "gap": r.gap,
        "proven": r.proven,
        "iterations": len(r.trace),
        "columns_generated": r.generated,
        "columns_enumerated": r.enumerated,
        "integer_optimal": r.integer_optimal,
        "duals": {f: r.lp.duals[f] for f in sorted(r.lp.duals)},
        "warnings": list(r.warnings),
        "columns": [
            {"multiplicity": k, "group": group_to_json(g)} for g, k in r.placed()
        ],
    }


def plan_to_json(plan: Plan) -> dict:
    return {
        "schema": PLAN_SCHEMA,
        "mode": plan.mode,
        "topology": serialize_topology(plan.net),
        "total_cost": plan.total_cost,
        "lp_total": plan.lp_total,
        "primary_capacity": plan.primary,
        "scap_percent": plan.scap,
        "columns_generated": plan.columns_generated,
        "destinations": [result_to_json(plan.results[d]) for d in sorted(plan.results)],
        "errors": dict(sorted(plan.errors.items())),
    }

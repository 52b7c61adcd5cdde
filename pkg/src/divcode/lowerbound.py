"""Cut-based capacity lower bound for single-destination coded protection.

For a span set C whose removal separates sources V(C) from the destination,
any single span of C may fail and the rest of C must still carry all of
V(C)'s demand: cut capacity minus the failed span's capacity >= T(C).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from .lp import GE, INTEGER, LinearProgram, MipLimits, solve_lp, solve_mip
from .netgraph import Network, Node, shortest_path
from .traffic import TrafficMatrix, aggregate_to_destination

log = logging.getLogger(__name__)

DEFAULT_K_MAX = 5
CUT_BUDGET = 250_000


@dataclass(frozen=True)
class Cut:
    spans: Tuple[int, ...]
    separated: FrozenSet[Node]
    demand: int


@dataclass
class CutFamily:
    destination: Node
    k_max: int
    cuts: List[Cut] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cuts)


def _reaching(net: Network, d: Node, removed: FrozenSet[int]) -> set:
    """Nodes still connected to ``d`` when the spans in ``removed`` are cut."""
    seen = {d}
    stack = [d]
    while stack:
        v = stack.pop()
        for e in net.out_links(v):
            if e // 2 in removed:
                continue
            w = net.links[e].head
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def enumerate_cuts(
    net: Network, d: Node, dv: Mapping[Node, int], k_max: int = DEFAULT_K_MAX, budget: int = CUT_BUDGET
) -> CutFamily:
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    n = net.n_spans
    total = sum(comb(n, k) for k in range(1, min(k_max, n) + 1))
    if total > budget:
        warnings.warn(f"cut enumeration scans {total} span subsets (budget {budget})")
    sources = {f for f, t in dv.items() if t > 0}
    fam = CutFamily(d, k_max)
    kept: Dict[FrozenSet[Node], List[FrozenSet[int]]] = {}
    for k in range(1, min(k_max, n) + 1):
        for subset in combinations(range(n), k):
            removed = frozenset(subset)
            sep = frozenset(sources - _reaching(net, d, removed))
            if not sep:
                continue
            # same separated set from a smaller span set: implied constraint
            if any(c <= removed for c in kept.get(sep, ())):
                continue
            kept.setdefault(sep, []).append(removed)
            fam.cuts.append(Cut(subset, sep, sum(dv[f] for f in sep)))
    return fam


@dataclass
class BoundResult:
    destination: Node
    value: float
    capacities: List[float]
    k_max: int
    n_cuts: int
    status: str = "optimal"
    approximate: bool = False

    def to_json(self, net: Network) -> dict:
        return {
            "destination": self.destination,
            "bound": self.value,
            "k_max": self.k_max,
            "cut_count": self.n_cuts,
            "status": self.status,
            "approximate": self.approximate,
            "capacities": [
                {"tail": net.links[e].tail, "head": net.links[e].head, "units": c}
                for e, c in enumerate(self.capacities)
                if c
            ],
        }


def build_bound_model(net: Network, cf: CutFamily) -> LinearProgram:
    p = LinearProgram("cut_bound")
    for e, link in enumerate(net.links):
        p.add_var(f"c[{e}]", 0, math.inf, INTEGER, cost=link.length)
    for ci, cut in enumerate(cf.cuts):
        for f in cut.spans:
            row: Dict[int, float] = {}
            for s in cut.spans:
                row[2 * s] = row.get(2 * s, 0) + 1
                row[2 * s + 1] = row.get(2 * s + 1, 0) + 1
            row[2 * f] -= 1
            row[2 * f + 1] -= 1
            p.add_constraint({k: v for k, v in row.items() if v}, GE, cut.demand, f"cut[{ci},{f}]")
    return p


def _shortest_routing(net: Network, dv: Mapping[Node, int], d: Node) -> Tuple[float, List[float]]:
    cap = [0.0] * len(net.links)
    for f, t in dv.items():
        if t <= 0:
            continue
        for e in shortest_path(net, f, d):
            cap[e] += t
    return sum(c * l.length for c, l in zip(cap, net.links)), cap


def solve_lower_bound(
    net: Network, cf: CutFamily, dv: Mapping[Node, int], limits: Optional[MipLimits] = None
) -> BoundResult:
    if not cf.cuts:
        value, cap = _shortest_routing(net, dv, cf.destination)
        return BoundResult(cf.destination, value, cap, cf.k_max, 0)
    # routing every unit once on its shortest path is itself a valid bound;
    # taking the larger keeps the bound monotone in k_max
    sp_value, sp_cap = _shortest_routing(net, dv, cf.destination)
    p = build_bound_model(net, cf)
    res = solve_mip(p, limits or MipLimits(method="highs"))
    if res.status == "optimal":
        value, cap, status, approx = float(res.objective), [float(round(v)) for v in res.x], "optimal", False
    else:
        relax = solve_lp(p)
        log.warning("cut bound ILP %s; reporting the LP relaxation", res.status)
        value, cap, status, approx = float(relax.objective), [float(v) for v in relax.x], res.status, True
    if sp_value > value:
        value, cap = sp_value, sp_cap
    return BoundResult(cf.destination, value, cap, cf.k_max, len(cf), status, approx)


def network_lower_bound(
    net: Network, tm: TrafficMatrix, k_max: int = DEFAULT_K_MAX, limits: Optional[MipLimits] = None
) -> Dict[Node, BoundResult]:
    out = {}
    for d in tm.destinations():
        dv = aggregate_to_destination(tm, d)
        out[d] = solve_lower_bound(net, enumerate_cuts(net, d, dv, k_max), dv, limits)
    return out

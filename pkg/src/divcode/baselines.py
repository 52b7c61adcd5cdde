"""1+1 APS baseline and the enumerate-then-place oracle."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement
from math import comb
from typing import Dict, Mapping, Optional, Sequence

from .coding import CodingGroup, singleton_structure
from .lp import MipLimits
from .master import ColumnPool, primary_capacity, solve_master_ilp
from .netgraph import Network, Node, UnprotectableDemand, disjoint_pair, nodal_degree
from .pricing import PricingRequest, solve_pricing
from .traffic import TrafficMatrix

log = logging.getLogger(__name__)

MAX_ORACLE_NODES = 8


class EnumerationBudgetExceeded(RuntimeError):
    pass


@dataclass
class ApsPlan:
    total: float
    per_destination: Dict[Node, float]
    pair_costs: Dict[tuple, float]
    primary: float

    @property
    def scap(self) -> float:
        return 100.0 * (self.total - self.primary) / self.primary if self.primary > 0 else 0.0

    def to_json(self) -> dict:
        return {
            "total_cost": self.total,
            "primary_capacity": self.primary,
            "scap_percent": self.scap,
            "per_destination": dict(sorted(self.per_destination.items())),
            "pairs": [
                {"source": s, "destination": d, "pair_cost": c}
                for (s, d), c in sorted(self.pair_costs.items())
            ],
        }


def aps_plan(net: Network, tm: TrafficMatrix) -> ApsPlan:
    pair_costs: Dict[tuple, float] = {}
    per_dest: Dict[Node, float] = {}
    for (s, d), units in sorted(tm.entries.items()):
        cost = disjoint_pair(net, s, d).cost
        pair_costs[s, d] = cost
        per_dest[d] = per_dest.get(d, 0.0) + cost * units
    return ApsPlan(sum(per_dest.values()), per_dest, pair_costs, primary_capacity(net, tm))


def j_bound(n_nodes: int, nd: int) -> int:
    """Number of source subsets a group toward a degree-``nd`` node may hold."""
    return sum(comb(n_nodes - 1, k) for k in range(1, nd))


def enumerate_all_groups(
    net: Network,
    d: Node,
    max_size: Optional[int] = None,
    sources: Optional[Sequence[Node]] = None,
    max_nodes: int = MAX_ORACLE_NODES,
    mode: str = "sdc",
    limits: Optional[MipLimits] = None,
    distinct: bool = False,
) -> ColumnPool:
    """Cheapest group for every source multiset; infeasible multisets are skipped.

    With ``distinct`` each source appears at most once per group, the setting
    in which the pool size is bounded by ``j_bound``.
    """
    if len(net.nodes) > max_nodes:
        raise EnumerationBudgetExceeded(
            f"{len(net.nodes)} nodes exceeds the enumeration limit of {max_nodes}"
        )
    bound = nodal_degree(net, d) - 1
    size = bound if max_size is None else min(max_size, bound)
    cands = [v for v in net.nodes if v != d] if sources is None else list(sources)
    limits = limits or MipLimits(method="highs")
    pool = ColumnPool(d)
    for k in range(1, size + 1):
        for combo in (combinations if distinct else combinations_with_replacement)(cands, k):
            counts: Dict[Node, int] = {}
            for v in combo:
                counts[v] = counts.get(v, 0) + 1
            if k == 1:
                # the cheapest single-demand group is exactly the disjoint pair
                try:
                    pair = disjoint_pair(net, combo[0], d)
                except UnprotectableDemand:
                    continue
                pool.add(CodingGroup.from_structure(singleton_structure(net, d, combo[0], pair)))
                continue
            req = PricingRequest(net, d, {}, mode=mode, limits=limits, fixed_counts=counts)
            cs, status, _ = solve_pricing(req)
            if cs is None:
                continue
            pool.add(CodingGroup.from_structure(cs))
    return pool


def oracle_optimum(
    net: Network,
    dv: Mapping[Node, int],
    d: Node,
    max_nodes: int = MAX_ORACLE_NODES,
    mode: str = "sdc",
) -> float:
    """Placement ILP over every group built from positive-demand sources."""
    srcs = [f for f in net.nodes if dv.get(f, 0) > 0]
    if not srcs:
        return 0.0
    pool = enumerate_all_groups(net, d, sources=srcs, max_nodes=max_nodes, mode=mode)
    return solve_master_ilp(pool, {f: dv[f] for f in srcs}).objective

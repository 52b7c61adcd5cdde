"""Coding-group generation subproblems.

Each builder returns a ``LinearProgram`` whose optimum is the coding group
with the most negative reduced cost ``cost - sum_f count_f * dual_f``:

* ``sdc``  systematic coding: span-disjoint primary paths plus one
  span-disjoint protection tree carrying the parity,
* ``nsdc`` nonsystematic coding: every demand owns two paths placed in two
  subgroups whose topologies are span-disjoint, with coding cycles excluded,
* ``cdc``  coherent coding: ``nsdc`` with the inter-subgroup disjointness
  replaced by "noncoherent paths may not share a span".
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .coding import CodingGroup, CodingStructure, sdc_structure, verify_group
from .lp import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, LinearProgram, MipLimits, solve_mip, to_lp_format
from .netgraph import Network, Node, nodal_degree, shortest_path

log = logging.getLogger(__name__)

MODES = ("sdc", "nsdc", "cdc")


class PricingError(RuntimeError):
    """A priced column failed verification: the model is wrong."""


@dataclass
class PricingRequest:
    net: Network
    destination: Node
    duals: Mapping[Node, float]
    mode: str = "sdc"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    limits: MipLimits = field(default_factory=lambda: MipLimits(method="highs"))
    fixed_counts: Optional[Mapping[Node, int]] = None
    rc_tol: float = 1e-6
    # overrides the positive-dual source filter (gap closing needs zero-dual sources)
    sources: Optional[Sequence[Node]] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown coding mode {self.mode!r}")
        n = len(self.net.nodes)
        if self.alpha is None:
            self.alpha = 1.0 / (2 * n)
        if self.beta is None:
            self.beta = 2.0 * max(n, self.net.max_nodal_degree())
        if not 0 < self.alpha <= 1.0 / n:
            raise ValueError("alpha must lie in (0, 1/|V|]")
        if self.beta < 2 * max(n, self.net.max_nodal_degree()):
            raise ValueError("beta must be >= 2 max(|V|, max nodal degree)")
        if any(v < 0 for v in self.duals.values()):
            raise ValueError("dual prices must be nonnegative")

    @property
    def group_bound(self) -> int:
        return nodal_degree(self.net, self.destination) - 1

    def candidate_sources(self) -> List[Node]:
        if self.fixed_counts is not None:
            return [f for f in self.net.nodes if self.fixed_counts.get(f, 0) > 0]
        if self.sources is not None:
            wanted = set(self.sources) - {self.destination}
            return [f for f in self.net.nodes if f in wanted]
        return [f for f in self.net.nodes if f != self.destination and self.duals.get(f, 0.0) > 0]


@dataclass
class PricingResult:
    column: Optional[CodingGroup]
    reduced_cost: float
    status: str
    bound: float = math.nan


def rc_threshold(objective: float, tol: float = 1e-6) -> float:
    return tol * max(1.0, abs(objective))


# --- systematic ------------------------------------------------------------


def build_sdc_model(req: PricingRequest):
    net, d = req.net, req.destination
    nd1 = req.group_bound
    p = LinearProgram("sdc_pricing")
    srcs = req.candidate_sources()
    cg: Dict[Node, int] = {}
    for f in srcs:
        if req.fixed_counts is not None:
            k = req.fixed_counts[f]
            cg[f] = p.add_var(f"CG[{f}]", k, k, INTEGER, cost=-req.duals.get(f, 0.0))
        else:
            cg[f] = p.add_var(f"CG[{f}]", 0, nd1, INTEGER, cost=-req.duals.get(f, 0.0))
    L = len(net.links)
    dv = [p.add_var(f"d[{e}]", kind=BINARY, cost=net.links[e].length) for e in range(L)]
    cv = [p.add_var(f"c[{e}]", kind=BINARY, cost=net.links[e].length) for e in range(L)]
    g = {v: p.add_var(f"g[{v}]", 0, 1, CONTINUOUS) for v in net.nodes}
    pv = {v: p.add_var(f"p[{v}]", 0, 1, CONTINUOUS) for v in net.nodes}

    p.add_constraint({cg[f]: 1 for f in srcs}, LE, nd1, "group_size")
    beta = req.beta
    for v in net.nodes:
        if v == d:
            continue
        row = {}
        for e in net.out_links(v):
            row[dv[e]] = row.get(dv[e], 0) + 1
        for e in net.in_links(v):
            row[dv[e]] = row.get(dv[e], 0) - 1
        if v in cg:
            row[cg[v]] = -1
        p.add_constraint(row, EQ, 0, f"primary_flow[{v}]")
        row = {}
        for e in net.out_links(v):
            row[cv[e]] = beta
        for e in net.in_links(v):
            row[cv[e]] = row.get(cv[e], 0) - 1
        if v in cg:
            row[cg[v]] = -1
        p.add_constraint(row, GE, 0, f"protection_flow[{v}]")
    row = {dv[e]: 1 for e in net.in_links(d)}
    for f in srcs:
        row[cg[f]] = -1
    p.add_constraint(row, EQ, 0, "primary_sink")
    row = {dv[e]: 1 for e in net.out_links(d)}
    row.update({cv[e]: 1 for e in net.out_links(d)})
    p.add_constraint(row, EQ, 0, "no_exit_from_destination")
    row = {cv[e]: beta for e in net.in_links(d)}
    for f in srcs:
        row[cg[f]] = -1
    p.add_constraint(row, GE, 0, "protection_sink")
    for k in range(net.n_spans):
        a, b = 2 * k, 2 * k + 1
        p.add_constraint({dv[a]: 1, dv[b]: 1, cv[a]: 1, cv[b]: 1}, LE, 1, f"span_disjoint[{k}]")
    alpha = req.alpha
    for e, link in enumerate(net.links):
        # voltage rises by alpha along every used link: no cycles
        p.add_constraint(
            {g[link.head]: 1, g[link.tail]: -1, dv[e]: -(alpha + 1)}, GE, -1, f"volt_d[{e}]"
        )
        p.add_constraint(
            {pv[link.head]: 1, pv[link.tail]: -1, cv[e]: -(alpha + 1)}, GE, -1, f"volt_c[{e}]"
        )
    return p, {"cg": cg, "d": dv, "c": cv}


def _follow(net: Network, start: Node, dest: Node, pool: Dict[Node, List[int]], consume: bool):
    path, v = [], start
    seen = {start}
    while v != dest:
        outs = pool.get(v)
        if not outs:
            raise PricingError(f"flow from {start} stops at {v}")
        e = outs.pop(0) if consume else outs[0]
        path.append(e)
        v = net.links[e].head
        if v in seen:
            raise PricingError(f"cyclic flow through {v}")
        seen.add(v)
    return path


def decode_sdc(req: PricingRequest, x, idx) -> Optional[CodingStructure]:
    net, d = req.net, req.destination
    counts = {f: int(round(x[j])) for f, j in idx["cg"].items()}
    sources = [f for f in sorted(counts, key=net.nodes.index) for _ in range(counts[f])]
    if not sources:
        return None
    prim_pool: Dict[Node, List[int]] = {}
    prot_pool: Dict[Node, List[int]] = {}
    for e, j in enumerate(idx["d"]):
        if x[j] > 0.5:
            prim_pool.setdefault(net.links[e].tail, []).append(e)
    for e, j in enumerate(idx["c"]):
        if x[j] > 0.5:
            prot_pool.setdefault(net.links[e].tail, []).append(e)
    primaries = [_follow(net, f, d, prim_pool, True) for f in sources]
    protections = [_follow(net, f, d, prot_pool, False) for f in sources]
    return sdc_structure(net, d, sources, primaries, protections)


# --- nonsystematic / coherent ---------------------------------------------


def add_coding_relations(p: LinearProgram, n_dem: int, n_sub: int):
    """Subgroup membership, coded-together and indirect-relation variables.

    The rows admit exactly the codes whose signal-subgroup graph (subgroups
    as vertices, each demand an edge between its two subgroups) is a forest.
    Returns ``(n, m, r, mm)`` where ``mm(i, j)`` is the symmetric m variable
    (None for i == j).
    """
    n_path = 2 * n_dem
    n = {(j, s): p.add_var(f"n[{j},{s}]", kind=BINARY) for j in range(n_path) for s in range(n_sub)}
    m = {
        (i, j): p.add_var(f"m[{i},{j}]", kind=BINARY)
        for i, j in combinations(range(n_path), 2)
    }
    r = {
        (i, k): p.add_var(f"r[{i},{k}]", kind=BINARY)
        for i in range(n_path)
        for k in range(n_dem)
        if k != i // 2
    }

    def mm(i, j):
        if i == j:
            return None
        return m[min(i, j), max(i, j)]

    def paths_of(k):
        return (2 * k, 2 * k + 1)

    for j in range(n_path):
        p.add_constraint({n[j, s]: 1 for s in range(n_sub)}, EQ, 1, f"in_subgroup[{j}]")
    for k in range(n_dem):
        a, b = paths_of(k)
        for s in range(n_sub):
            p.add_constraint({n[a, s]: 1, n[b, s]: 1}, LE, 1, f"split[{k},{s}]")
    for i, j in combinations(range(n_path), 2):
        for s in range(n_sub):
            p.add_constraint({m[i, j]: 1, n[i, s]: -1, n[j, s]: -1}, GE, -1)

    # indirect relations and coding-cycle exclusion
    for i in range(n_path):
        for k in range(n_dem):
            if (i, k) not in r:
                continue
            fa, fb = paths_of(k)
            for j in range(n_path):
                if j == i or j // 2 == k:
                    continue
                js = j ^ 1
                row = {r[i, k]: 1.0}
                _acc(row, mm(i, j), -1)
                _acc(row, mm(js, fa), -1)
                _acc(row, mm(js, fb), -1)
                _acc(row, mm(i, fa), 1)
                _acc(row, mm(i, fb), 1)
                p.add_constraint(row, GE, -1)
            for g_ in range(n_dem):
                if g_ == k or g_ == i // 2:
                    continue
                ga, gb = paths_of(g_)
                row = {r[i, k]: 1.0}
                _acc(row, r[i, g_], -1)
                for u in (ga, gb):
                    for w in (fa, fb):
                        _acc(row, mm(u, w), -1)
                # i must not be coded directly with demand k
                _acc(row, mm(i, fa), 1)
                _acc(row, mm(i, fb), 1)
                p.add_constraint(row, GE, -1)
    for f_ in range(n_dem):
        for g_ in range(n_dem):
            if f_ == g_:
                continue
            fa, fb = paths_of(f_)
            ga, gb = paths_of(g_)
            row: Dict[int, float] = {}
            _acc(row, r[fa, g_], 1)
            _acc(row, r[fb, g_], 1)
            for u in (fa, fb):
                for w in (ga, gb):
                    _acc(row, mm(u, w), 1)
            p.add_constraint(row, LE, 1, f"no_cycle[{f_},{g_}]")

    return n, m, r, mm


def build_nsdc_model(req: PricingRequest, coherent: bool = False):
    """Demand slot ``k`` owns paths ``2k`` and ``2k+1``; ``j ^ 1`` is the complement."""
    net, d = req.net, req.destination
    n_dem = req.group_bound
    n_path = 2 * n_dem
    n_sub = 2 * n_dem
    p = LinearProgram("cdc_pricing" if coherent else "nsdc_pricing")
    srcs = req.candidate_sources()
    L = len(net.links)

    sigma: Dict[Tuple[Node, int], int] = {}
    for f in srcs:
        for k in range(n_dem):
            sigma[f, k] = p.add_var(f"sigma[{f},{k}]", kind=BINARY, cost=-req.duals.get(f, 0.0))
    x = {(e, j): p.add_var(f"x[{e},{j}]", kind=BINARY) for j in range(n_path) for e in range(L)}
    n, m, r, mm = add_coding_relations(p, n_dem, n_sub)
    t = {
        (e, s): p.add_var(f"t[{e},{s}]", kind=BINARY, cost=net.links[e].length)
        for s in range(n_sub)
        for e in range(L)
    }

    for k in range(n_dem):
        p.add_constraint({sigma[f, k]: 1 for f in srcs}, LE, 1, f"one_source[{k}]")
    if req.fixed_counts is not None:
        for f in srcs:
            p.add_constraint(
                {sigma[f, k]: 1 for k in range(n_dem)}, EQ, req.fixed_counts[f], f"count[{f}]"
            )
    p.add_constraint({sigma[key]: 1 for key in sigma}, LE, n_dem, "group_size")

    for j in range(n_path):
        k = j // 2
        for v in net.nodes:
            row: Dict[int, float] = {}
            for e in net.in_links(v):
                row[x[e, j]] = row.get(x[e, j], 0) + 1
            for e in net.out_links(v):
                row[x[e, j]] = row.get(x[e, j], 0) - 1
            if v == d:
                for f in srcs:
                    row[sigma[f, k]] = -1
            elif (v, k) in sigma:
                row[sigma[v, k]] = 1
            p.add_constraint(row, EQ, 0, f"flow[{j},{v}]")
    for j in range(n_path):
        for s in range(n_sub):
            for e in range(L):
                p.add_constraint({t[e, s]: 1, x[e, j]: -1, n[j, s]: -1}, GE, -1)
    if not coherent:
        for g_ in range(net.n_spans):
            e1, e2 = 2 * g_, 2 * g_ + 1
            for s1, s2 in combinations(range(n_sub), 2):
                p.add_constraint(
                    {t[e1, s1]: 1, t[e1, s2]: 1, t[e2, s1]: 1, t[e2, s2]: 1},
                    LE,
                    1,
                    f"sub_disjoint[{g_},{s1},{s2}]",
                )
    theta = {}
    if coherent:
        # theta[i, j] = 1 marks i and j noncoherent: they may not share a span
        theta = {
            (i, j): p.add_var(f"theta[{i},{j}]", kind=BINARY)
            for i in range(n_path)
            for j in range(n_path)
            if i != j
        }
        for i in range(n_path):
            p.add_constraint({theta[i, i ^ 1]: 1}, EQ, 1, f"complement[{i}]")
        for i, j in theta:
            mv = mm(i ^ 1, j ^ 1)
            if mv is not None:
                p.add_constraint({theta[i, j]: 1, mv: -1}, GE, 0)
        for i in range(n_path):
            for j in range(n_path):
                for k in range(n_path):
                    if len({i, j, k}) < 3:
                        continue
                    mv = mm(j, k ^ 1)
                    if mv is None:
                        continue
                    p.add_constraint({theta[i, k]: 1, theta[i, j]: -1, mv: -1}, GE, -1)
        for i, j in theta:
            for g_ in range(net.n_spans):
                e1, e2 = 2 * g_, 2 * g_ + 1
                p.add_constraint(
                    {x[e1, i]: 1, x[e1, j]: 1, x[e2, i]: 1, x[e2, j]: 1, theta[i, j]: 1},
                    LE,
                    2,
                )
    return p, {"sigma": sigma, "x": x, "n": n, "n_dem": n_dem, "theta": theta}


def _acc(row: Dict[int, float], var: Optional[int], coef: float) -> None:
    if var is None:
        return
    row[var] = row.get(var, 0.0) + coef


def decode_nsdc(req: PricingRequest, xs, idx) -> Optional[CodingStructure]:
    net, d = req.net, req.destination
    n_dem = idx["n_dem"]
    n_sub = 2 * n_dem
    slots = []
    for k in range(n_dem):
        src = [f for (f, kk), j in idx["sigma"].items() if kk == k and xs[j] > 0.5]
        if src:
            slots.append((k, src[0]))
    if not slots:
        return None
    sub_of = {}
    for j in range(2 * n_dem):
        subs = [s for s in range(n_sub) if xs[idx["n"][j, s]] > 0.5]
        sub_of[j] = subs[0]
    used_subs = sorted({sub_of[j] for k, _ in slots for j in (2 * k, 2 * k + 1)})
    renumber = {s: i for i, s in enumerate(used_subs)}
    subgroups = [0] * len(used_subs)
    paths = {}
    sources = []
    for sig, (k, f) in enumerate(slots):
        sources.append(f)
        for j in (2 * k, 2 * k + 1):
            s = renumber[sub_of[j]]
            subgroups[s] |= 1 << sig
            allowed = [e for e in range(len(net.links)) if xs[idx["x"][e, j]] > 0.5]
            path = shortest_path(net, f, d, allowed)
            if path is None:
                raise PricingError(f"path {j} does not reach the destination")
            paths[(sig, s)] = tuple(path)
    return CodingStructure(net, d, tuple(sources), tuple(subgroups), paths)


# --- driver ----------------------------------------------------------------


def build_model(req: PricingRequest):
    if req.mode == "sdc":
        return build_sdc_model(req)
    return build_nsdc_model(req, coherent=req.mode == "cdc")


def solve_pricing(req: PricingRequest) -> Tuple[Optional[CodingStructure], str, float]:
    """Optimal structure for the request (no reduced-cost filtering)."""
    if req.group_bound < 1:
        raise ValueError(f"destination {req.destination} has nodal degree < 2")
    if not req.candidate_sources():
        return None, "optimal", 0.0
    model, idx = build_model(req)
    res = solve_mip(model, req.limits)
    if res.x is None:
        return None, res.status, res.bound
    decode = decode_sdc if req.mode == "sdc" else decode_nsdc
    return decode(req, res.x, idx), res.status, res.bound


def price(req: PricingRequest) -> PricingResult:
    """Most negative reduced-cost column, or no column when none beats -eps."""
    cs, status, bound = solve_pricing(req)
    if cs is None:
        if status == "optimal" or status == "infeasible":
            return PricingResult(None, 0.0, "optimal", bound)
        return PricingResult(None, math.nan, "inconclusive", bound)
    group = CodingGroup.from_structure(cs)
    rc = group.cost - sum(req.duals.get(f, 0.0) * c for f, c in group.counts.items())
    eps = rc_threshold(rc, req.rc_tol)
    if rc >= -eps:
        if status == "optimal":
            return PricingResult(None, rc, "optimal", bound)
        if not math.isnan(bound) and bound >= -eps:
            return PricingResult(None, rc, "optimal", bound)
        return PricingResult(None, rc, "inconclusive", bound)
    report = verify_group(cs)
    if not report.ok or report.problems:
        raise PricingError(
            f"{req.mode} column failed verification: spans {report.failing_spans}, "
            f"{report.problems}"
        )
    return PricingResult(group, rc, status, bound)


def price_sdc(req: PricingRequest) -> PricingResult:
    req.mode = "sdc"
    return price(req)


def price_nsdc(req: PricingRequest) -> PricingResult:
    req.mode = "nsdc"
    return price(req)


def price_cdc(req: PricingRequest) -> PricingResult:
    req.mode = "cdc"
    return price(req)


def _structure_vars(req: PricingRequest, idx) -> List[int]:
    # binaries that fix the decoded column; everything else follows from them
    if req.mode == "sdc":
        return list(idx["d"]) + list(idx["c"])
    return list(idx["sigma"].values()) + list(idx["x"].values()) + list(idx["n"].values())


def enumerate_below(
    req: PricingRequest, threshold: float, max_solves: int = 500, time_limit: float = math.inf
) -> Tuple[List[CodingGroup], str]:
    """Every column whose reduced cost is below ``threshold``.

    Each solution is cut off by a no-good row over the structure binaries,
    so the sweep is exhaustive when the status comes back "optimal".
    Equivalent encodings of one column are each cut once; the column is
    reported once.
    """
    if req.group_bound < 1:
        raise ValueError(f"destination {req.destination} has nodal degree < 2")
    if not req.candidate_sources():
        return [], "optimal"
    model, idx = build_model(req)
    keys = _structure_vars(req, idx)
    decode = decode_sdc if req.mode == "sdc" else decode_nsdc
    found: Dict[str, CodingGroup] = {}
    t0 = time.perf_counter()
    for solves in range(max_solves):
        if solves and time.perf_counter() - t0 > time_limit:
            return list(found.values()), "time_limit"
        res = solve_mip(model, req.limits)
        if res.x is None:
            return list(found.values()), "optimal" if res.status == "infeasible" else res.status
        if res.objective >= threshold:
            if res.status == "optimal" or (not math.isnan(res.bound) and res.bound >= threshold):
                return list(found.values()), "optimal"
            return list(found.values()), res.status
        cs = decode(req, res.x, idx)
        if cs is not None:
            group = CodingGroup.from_structure(cs)
            rc = group.cost - sum(req.duals.get(f, 0.0) * c for f, c in group.counts.items())
            if rc < threshold and group.id not in found:
                report = verify_group(cs)
                if not report.ok or report.problems:
                    raise PricingError(f"{req.mode} column failed verification: {report.problems}")
                found[group.id] = group
        on = [j for j in keys if res.x[j] > 0.5]
        row = {j: 1.0 for j in keys}
        for j in on:
            row[j] = -1.0
        model.add_constraint(row, GE, 1 - len(on), f"nogood[{len(model.constraints)}]")
    return list(found.values()), "limit"


def dump_model(req: PricingRequest) -> str:
    """The pricing model in LP file syntax, for external cross-checking."""
    return to_lp_format(build_model(req)[0])

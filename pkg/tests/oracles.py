"""Independent brute-force references used by the tests.

Nothing here calls the package's algorithms; only the ``Network`` container
is read (its node and link lists), plus the ``LinearProgram`` container for
random model construction.
"""

from __future__ import annotations

import itertools
import math
from itertools import combinations, combinations_with_replacement, product

import networkx as nx
import numpy as np

from divcode.lp import EQ, GE, LE, LinearProgram


def simple_paths(net, s, d):
    """Every simple s->d path as a tuple of link indices (DFS)."""
    out = []

    def dfs(v, seen, acc):
        if v == d:
            out.append(tuple(acc))
            return
        for e, link in enumerate(net.links):
            if link.tail == v and link.head not in seen:
                seen.add(link.head)
                acc.append(e)
                dfs(link.head, seen, acc)
                acc.pop()
                seen.discard(link.head)

    dfs(s, {s}, [])
    return out


def length(net, path):
    return sum(net.links[e].length for e in path)


def spans(path):
    return {e // 2 for e in path}


def brute_disjoint_pair_cost(net, s, d):
    paths = simple_paths(net, s, d)
    best = None
    for p, q in combinations(paths, 2):
        if spans(p) & spans(q):
            continue
        c = length(net, p) + length(net, q)
        if best is None or c < best:
            best = c
    return best


def gf2_rank_dense(rows, n):
    """Rank over GF(2) by elimination on a dense 0/1 matrix."""
    if not rows or n == 0:
        return 0
    a = np.array([[(r >> j) & 1 for j in range(n)] for r in rows], dtype=np.uint8)
    rank = 0
    for col in range(n):
        piv = next((i for i in range(rank, a.shape[0]) if a[i, col]), None)
        if piv is None:
            continue
        a[[rank, piv]] = a[[piv, rank]]
        for i in range(a.shape[0]):
            if i != rank and a[i, col]:
                a[i] ^= a[rank]
        rank += 1
    return rank


def brute_cuts(net, d, dv, k_max):
    """Minimal disconnecting span sets per separated source set (networkx)."""
    sources = {f for f, t in dv.items() if t > 0}
    found = {}
    for k in range(1, k_max + 1):
        for subset in combinations(range(net.n_spans), k):
            g = nx.MultiGraph()
            g.add_nodes_from(net.nodes)
            for sp in range(net.n_spans):
                if sp not in subset:
                    link = net.links[2 * sp]
                    g.add_edge(link.tail, link.head)
            comp = nx.node_connected_component(g, d)
            sep = frozenset(sources - comp)
            if sep:
                found.setdefault(sep, []).append(frozenset(subset))
    cuts = set()
    for sep, sets in found.items():
        for c in sets:
            if not any(o < c for o in sets):
                cuts.add((c, sep))
    return cuts


# --- coding structures ------------------------------------------------------


def decodable_under_all_failures(net, subgroups, paths, n):
    """paths: {(signal, subgroup): links}.  Dense-rank check for every span."""
    if gf2_rank_dense(list(subgroups), n) < n:
        return False
    for sp in range(net.n_spans):
        rows = []
        for s, mask in enumerate(subgroups):
            row = 0
            for sig in range(n):
                if mask >> sig & 1 and sp not in spans(paths[(sig, s)]):
                    row |= 1 << sig
            rows.append(row)
        if gf2_rank_dense(rows, n) < n:
            return False
    return True


def structure_cost(net, subgroups, paths):
    total = 0.0
    for s in range(len(subgroups)):
        links = set()
        for (sig, sub), p in paths.items():
            if sub == s:
                links.update(p)
        total += length(net, links)
    return total


def _codes(n):
    """Distinct codes for n signals: each signal in 2 of <= 2n subgroups."""
    seen = set()
    pairs = list(combinations(range(2 * n), 2))
    for choice in product(pairs, repeat=n):
        used = sorted({s for pr in choice for s in pr})
        ren = {s: i for i, s in enumerate(used)}
        subs = [0] * len(used)
        for sig, (a, b) in enumerate(choice):
            subs[ren[a]] |= 1 << sig
            subs[ren[b]] |= 1 << sig
        key = tuple(sorted(subs))
        if key in seen:
            continue
        seen.add(key)
        yield tuple(subs)


def best_structure(net, sources, d, disjoint_subgroups=False, systematic=False):
    """Cheapest structure single-failure decodable at ``d`` for the given signals.

    ``disjoint_subgroups`` additionally requires every pair of subgroups to
    be span-disjoint; ``systematic`` restricts to [p1, .., pn, p1+..+pn].
    """
    n = len(sources)
    cand = {f: simple_paths(net, f, d) for f in set(sources)}
    best = None
    for subs in _codes(n):
        if systematic:
            full = (1 << n) - 1
            singles = sorted(1 << i for i in range(n))
            if n > 1 and sorted(subs) != sorted(singles + [full]):
                continue
        incid = [(sig, s) for s, m in enumerate(subs) for sig in range(n) if m >> sig & 1]
        for choice in product(*(cand[sources[sig]] for sig, _ in incid)):
            paths = dict(zip(incid, choice))
            if disjoint_subgroups:
                sub_spans = [set() for _ in subs]
                for (sig, s), p in paths.items():
                    sub_spans[s] |= spans(p)
                if any(sub_spans[a] & sub_spans[b] for a, b in combinations(range(len(subs)), 2)):
                    continue
            c = structure_cost(net, subs, paths)
            if best is not None and c >= best[0]:
                continue
            if decodable_under_all_failures(net, subs, paths, n):
                best = (c, subs, paths)
    return best


# --- systematic groups --------------------------------------------------------


def _acyclic(net, links):
    g = nx.DiGraph()
    for e in links:
        g.add_edge(net.links[e].tail, net.links[e].head)
    return nx.is_directed_acyclic_graph(g)


def brute_sdc_best(net, d, duals, max_size):
    """Most negative ``cost - sum(duals)`` over systematic groups (0 if none)."""
    srcs = [f for f in net.nodes if f != d and duals.get(f, 0) > 0]
    cand = {f: simple_paths(net, f, d) for f in srcs}
    best = 0.0
    for k in range(1, max_size + 1):
        for combo in combinations_with_replacement(srcs, k):
            value = sum(duals[f] for f in combo)
            for prim in product(*(cand[f] for f in combo)):
                used = [spans(p) for p in prim]
                if any(used[a] & used[b] for a, b in combinations(range(k), 2)):
                    continue
                prim_spans = set().union(*used)
                prim_cost = sum(length(net, p) for p in prim)
                if prim_cost - value >= best:
                    continue
                if not _acyclic(net, [e for p in prim for e in p]):
                    continue
                options = [[q for q in cand[f] if not spans(q) & prim_spans] for f in combo]
                for prot in product(*options):
                    union = set().union(*prot)
                    if any(e ^ 1 in union for e in union):
                        continue
                    c = prim_cost + length(net, union)
                    if c - value < best and _acyclic(net, union):
                        best = c - value
    return best


def random_network(rng, n_nodes, extra_edges, max_len=5):
    """Connected random graph: a ring plus ``extra_edges`` chords (integer lengths)."""
    nodes = [f"n{i}" for i in range(n_nodes)]
    edges = {}
    for i in range(n_nodes):
        a, b = nodes[i], nodes[(i + 1) % n_nodes]
        edges[tuple(sorted((a, b)))] = int(rng.integers(1, max_len + 1))
    pairs = [(a, b) for a, b in combinations(nodes, 2) if (a, b) not in edges]
    rng.shuffle(pairs)
    for a, b in pairs[:extra_edges]:
        edges[(a, b)] = int(rng.integers(1, max_len + 1))
    return nodes, [(a, b, w) for (a, b), w in sorted(edges.items())]


# --- linear programs -----------------------------------------------------------


def random_lp(rng, n, m):
    """Bounded-feasible dense LP: x in [0, 10], rows built around a feasible point."""
    p = LinearProgram("rand")
    for j in range(n):
        p.add_var(f"x{j}", 0, 10, cost=float(rng.integers(-5, 6)))
    x0 = rng.uniform(0, 10, n)
    for i in range(m):
        a = rng.integers(-4, 5, n).astype(float)
        sense = [LE, GE, EQ][int(rng.integers(0, 3))] if i else LE
        lhs = float(a @ x0)
        rhs = {LE: lhs + rng.uniform(0, 3), GE: lhs - rng.uniform(0, 3), EQ: lhs}[sense]
        p.add_constraint({j: a[j] for j in range(n) if a[j]}, sense, round(rhs, 6))
    return p


def exhaustive_binary(p):
    best = math.inf
    n = p.n_vars
    c = p.cost_vector()
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=float)
        if p.max_violation(x) <= 1e-9 and c @ x < best:
            best = float(c @ x)
    return best

"""Directed network model with span pairing.

Every undirected edge (a *span*) is materialized as two directed links.
Link ``2*k`` runs tail->head as written in the topology file and link
``2*k + 1`` is its reverse, so ``link // 2`` is always the span index.
Spans are the failure unit throughout the package.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

Node = str


class TopologyError(ValueError):
    """Malformed topology text; carries the offending line number."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UnprotectableDemand(Exception):
    """No pair of span-disjoint paths exists between two nodes."""

    def __init__(self, source: Node, dest: Node):
        self.source = source
        self.dest = dest
        super().__init__(f"unprotectable demand {source}->{dest}: one-span cut")


@dataclass(frozen=True)
class Link:
    tail: Node
    head: Node
    length: float


@dataclass(frozen=True)
class PathPair:
    primary: Tuple[int, ...]
    protection: Tuple[int, ...]
    cost: float


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable directed network; build it with :meth:`from_edges`."""

    nodes: Tuple[Node, ...]
    links: Tuple[Link, ...]
    span_labels: Tuple[Optional[str], ...] = ()
    _out: Dict[Node, Tuple[int, ...]] = field(default_factory=dict, repr=False)
    _in: Dict[Node, Tuple[int, ...]] = field(default_factory=dict, repr=False)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Sequence],
        nodes: Optional[Iterable[Node]] = None,
    ) -> "Network":
        """Build from undirected ``(a, b, length[, label])`` tuples."""
        order: List[Node] = list(nodes) if nodes is not None else []
        seen = set(order)
        if len(seen) != len(order):
            raise TopologyError("duplicate node identifier")
        links: List[Link] = []
        labels: List[Optional[str]] = []
        for edge in edges:
            a, b, length = str(edge[0]), str(edge[1]), float(edge[2])
            label = str(edge[3]) if len(edge) > 3 and edge[3] is not None else None
            if a == b:
                raise TopologyError(f"self-loop at {a}")
            if not length > 0:
                raise TopologyError(f"nonpositive length {length} on {a}-{b}")
            for v in (a, b):
                if v not in seen:
                    seen.add(v)
                    order.append(v)
            links.append(Link(a, b, length))
            links.append(Link(b, a, length))
            labels.append(label)
        out: Dict[Node, List[int]] = {v: [] for v in order}
        inc: Dict[Node, List[int]] = {v: [] for v in order}
        for idx, link in enumerate(links):
            out[link.tail].append(idx)
            inc[link.head].append(idx)
        return cls(
            nodes=tuple(order),
            links=tuple(links),
            span_labels=tuple(labels),
            _out={v: tuple(ls) for v, ls in out.items()},
            _in={v: tuple(ls) for v, ls in inc.items()},
        )

    @property
    def n_spans(self) -> int:
        return len(self.links) // 2

    def out_links(self, v: Node) -> Tuple[int, ...]:
        return self._out[v]

    def in_links(self, v: Node) -> Tuple[int, ...]:
        return self._in[v]

    @staticmethod
    def span_of(link: int) -> int:
        return link // 2

    @staticmethod
    def reverse(link: int) -> int:
        return link ^ 1

    def span_links(self, span: int) -> Tuple[int, int]:
        if not 0 <= span < self.n_spans:
            raise KeyError(f"unknown span {span}")
        return 2 * span, 2 * span + 1

    def span_name(self, span: int) -> str:
        link = self.links[2 * span]
        name = f"{link.tail}-{link.head}"
        label = self.span_labels[span] if span < len(self.span_labels) else None
        return f"{name}[{label}]" if label else name

    def find_link(self, tail: Node, head: Node) -> int:
        """Index of the first link tail->head (raises KeyError)."""
        for idx in self._out.get(tail, ()):
            if self.links[idx].head == head:
                return idx
        raise KeyError(f"no link {tail}->{head}")

    def path_length(self, path: Iterable[int]) -> float:
        return sum(self.links[e].length for e in path)

    def path_nodes(self, path: Sequence[int]) -> List[Node]:
        if not path:
            return []
        return [self.links[path[0]].tail] + [self.links[e].head for e in path]

    def max_nodal_degree(self) -> int:
        return max((nodal_degree(self, v) for v in self.nodes), default=0)


def nodal_degree(net: Network, v: Node) -> int:
    """Number of spans incident to ``v``."""
    if v not in net._out:
        raise KeyError(f"unknown node {v}")
    return len(net.out_links(v))


# --- topology text format -------------------------------------------------


def parse_topology(text: str) -> Network:
    """Parse the line-oriented topology format.

    ::

        nodes 4
        node iso          # optional explicit declaration (keeps order)
        s u 1
        u t 2.5 east      # optional 4th token labels a parallel span

    A ``directed`` line switches to directed mode: each subsequent line is a
    single link and every link must have an equal-length reverse twin.
    """
    declared_count: Optional[int] = None
    declared_nodes: List[Node] = []
    directed = False
    undirected: List[Tuple[Node, Node, float, Optional[str], int]] = []
    arcs: List[Tuple[Node, Node, float, Optional[str], int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "nodes":
            if declared_count is not None or len(tok) != 2:
                raise TopologyError("bad 'nodes' header", lineno)
            try:
                declared_count = int(tok[1])
            except ValueError:
                raise TopologyError(f"bad node count {tok[1]!r}", lineno) from None
            continue
        if declared_count is None:
            raise TopologyError("missing 'nodes <n>' header", lineno)
        if tok[0] == "node":
            if len(tok) != 2:
                raise TopologyError("bad node declaration", lineno)
            if tok[1] in declared_nodes:
                raise TopologyError(f"duplicate node {tok[1]}", lineno)
            declared_nodes.append(tok[1])
            continue
        if tok[0] == "directed" and len(tok) == 1:
            directed = True
            continue
        if len(tok) not in (3, 4):
            raise TopologyError(f"malformed line {raw.strip()!r}", lineno)
        a, b = tok[0], tok[1]
        try:
            length = float(tok[2])
        except ValueError:
            raise TopologyError(f"bad length {tok[2]!r}", lineno) from None
        if a == b:
            raise TopologyError(f"self-loop at {a}", lineno)
        if not length > 0:
            raise TopologyError(f"nonpositive length {tok[2]}", lineno)
        label = tok[3] if len(tok) == 4 else None
        (arcs if directed else undirected).append((a, b, length, label, lineno))

    if declared_count is None:
        raise TopologyError("missing 'nodes <n>' header")

    edges: List[Tuple[Node, Node, float, Optional[str]]] = []
    seen = set()
    for a, b, length, label, lineno in undirected:
        key = (min(a, b), max(a, b), label)
        if key in seen:
            raise TopologyError(f"duplicate link {a}-{b}", lineno)
        seen.add(key)
        edges.append((a, b, length, label))

    pending: Dict[Tuple[Node, Node, Optional[str]], Tuple[float, int]] = {}
    for a, b, length, label, lineno in arcs:
        if (a, b, label) in pending or (min(a, b), max(a, b), label) in seen:
            raise TopologyError(f"duplicate link {a}->{b}", lineno)
        twin = pending.pop((b, a, label), None)
        if twin is None:
            pending[(a, b, label)] = (length, lineno)
            continue
        if twin[0] != length:
            raise TopologyError(f"span {b}-{a} has unequal lengths", lineno)
        seen.add((min(a, b), max(a, b), label))
        edges.append((b, a, length, label))
    if pending:
        (a, b, _), (_, lineno) = min(pending.items(), key=lambda kv: kv[1][1])
        raise TopologyError(f"unpaired link {a}->{b}", lineno)

    net = Network.from_edges(edges, nodes=declared_nodes)
    if len(net.nodes) != declared_count:
        raise TopologyError(
            f"header declares {declared_count} nodes, found {len(net.nodes)}"
        )
    return net


def serialize_topology(net: Network) -> str:
    """Canonical text form: one undirected line per span, sorted."""
    rows = []
    for k in range(net.n_spans):
        link = net.links[2 * k]
        a, b = sorted((link.tail, link.head))
        label = net.span_labels[k] if k < len(net.span_labels) else None
        rows.append((a, b, label or "", link.length))
    rows.sort()
    used = {v for a, b, _, _ in rows for v in (a, b)}
    lines = [f"nodes {len(net.nodes)}"]
    lines += [f"node {v}" for v in sorted(set(net.nodes) - used)]
    for a, b, label, length in rows:
        text = f"{a} {b} {length:g}"
        lines.append(f"{text} {label}" if label else text)
    return "\n".join(lines) + "\n"


# --- shortest paths -------------------------------------------------------


def dijkstra(
    net: Network,
    source: Node,
    allowed: Optional[Iterable[int]] = None,
) -> Tuple[Dict[Node, float], Dict[Node, int]]:
    """Distances and predecessor links from ``source`` over ``allowed`` links."""
    allow = None if allowed is None else set(allowed)
    dist = {source: 0.0}
    pred: Dict[Node, int] = {}
    heap = [(0.0, 0, source)]
    tick = 0
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for e in net.out_links(u):
            if allow is not None and e not in allow:
                continue
            v = net.links[e].head
            nd = d + net.links[e].length
            if nd < dist.get(v, float("inf")):
                dist[v] = nd
                pred[v] = e
                tick += 1
                heapq.heappush(heap, (nd, tick, v))
    return dist, pred


def _walk_back(net: Network, pred: Dict[Node, int], source: Node, dest: Node) -> List[int]:
    path = []
    v = dest
    while v != source:
        e = pred[v]
        path.append(e)
        v = net.links[e].tail
    path.reverse()
    return path


def shortest_path(
    net: Network, source: Node, dest: Node, allowed: Optional[Iterable[int]] = None
) -> Optional[List[int]]:
    """Cheapest link sequence ``source -> dest`` or None if unreachable."""
    dist, pred = dijkstra(net, source, allowed)
    if dest not in dist:
        return None
    return _walk_back(net, pred, source, dest)


def disjoint_pair(net: Network, s: Node, d: Node) -> PathPair:
    """Minimum-total-cost pair of span-disjoint paths ``s -> d``.

    Bhandari's link-reversal variant of successive shortest paths: after the
    first shortest path, its spans are replaced by negative-length reverse
    arcs, a second Bellman-Ford path is found, and spans traversed in both
    directions cancel out.
    """
    if s == d:
        raise ValueError("source equals destination")
    for v in (s, d):
        nodal_degree(net, v)
    first = shortest_path(net, s, d)
    if first is None:
        raise UnprotectableDemand(s, d)
    on_first = {Network.span_of(e) for e in first}

    # residual arcs: (link id, tail, head, weight)
    arcs = []
    for e, link in enumerate(net.links):
        if Network.span_of(e) in on_first:
            continue
        arcs.append((e, link.tail, link.head, link.length))
    for e in first:
        link = net.links[e]
        arcs.append((e, link.head, link.tail, -link.length))

    dist = {v: float("inf") for v in net.nodes}
    dist[s] = 0.0
    pred: Dict[Node, Tuple[int, Node]] = {}
    for _ in range(len(net.nodes) - 1):
        changed = False
        for e, u, v, w in arcs:
            if dist[u] + w < dist[v] - 1e-12:
                dist[v] = dist[u] + w
                pred[v] = (e, u)
                changed = True
        if not changed:
            break
    if dist[d] == float("inf"):
        raise UnprotectableDemand(s, d)
    second = []
    v = d
    while v != s:
        e, u = pred[v]
        second.append(e)
        v = u

    cancelled = on_first & {Network.span_of(e) for e in second}
    used = [e for e in first if Network.span_of(e) not in cancelled]
    used += [e for e in second if Network.span_of(e) not in cancelled]
    paths = _split_two_paths(net, used, s, d)
    paths.sort(key=lambda p: (net.path_length(p), p))
    cost = sum(net.path_length(p) for p in paths)
    return PathPair(tuple(paths[0]), tuple(paths[1]), cost)


def _split_two_paths(net: Network, links: List[int], s: Node, d: Node) -> List[List[int]]:
    remaining: Dict[Node, List[int]] = {}
    for e in links:
        remaining.setdefault(net.links[e].tail, []).append(e)
    for outs in remaining.values():
        outs.sort()
    paths = []
    for _ in range(2):
        path, v = [], s
        while v != d:
            e = remaining[v].pop(0)
            path.append(e)
            v = net.links[e].head
        paths.append(path)
    return paths


def spans_of(path: Iterable[int]) -> set:
    return {Network.span_of(e) for e in path}


__all__ = [
    "Link",
    "Network",
    "Node",
    "PathPair",
    "TopologyError",
    "UnprotectableDemand",
    "dijkstra",
    "disjoint_pair",
    "nodal_degree",
    "parse_topology",
    "serialize_topology",
    "shortest_path",
    "spans_of",
]

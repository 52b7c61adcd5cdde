"""Coding structures, single-span failure simulation and decodability.

A coding structure protecting ``N`` signals towards one destination is a
list of subgroups; each subgroup is the XOR of some signals and is stored
as an int bitmask over signal indices.  Every signal sits in exactly two
subgroups and each (signal, subgroup) incidence owns one path, identified
as ``(signal, subgroup)``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import string
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .netgraph import Network, Node, PathPair

PathId = Tuple[int, int]
SCHEMA = "divcode.coding_group/1"
HALL_LIMIT = 20


def signal_label(i: int) -> str:
    letters = string.ascii_lowercase
    return letters[i] if i < len(letters) else f"s{i}"


def path_label(pid: PathId) -> str:
    return f"{signal_label(pid[0])}@{pid[1] + 1}"


def code_from_strings(rows: Sequence[str], signals: Optional[Sequence[str]] = None):
    """``["a+c", "b"]`` -> (bitmask rows, signal names)."""
    names = list(signals) if signals else sorted(
        {t.strip() for r in rows for t in r.split("+") if t.strip() not in ("", "0")}
    )
    index = {n: i for i, n in enumerate(names)}
    masks = []
    for r in rows:
        m = 0
        for t in r.split("+"):
            t = t.strip()
            if t and t != "0":
                m |= 1 << index[t]
        masks.append(m)
    return masks, names


def bits(mask: int) -> List[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


@dataclass(frozen=True, eq=False)
class CodingStructure:
    net: Network
    destination: Node
    sources: Tuple[Node, ...]
    subgroups: Tuple[int, ...]
    paths: Mapping[PathId, Tuple[int, ...]]
    _coherent: Optional[FrozenSet[FrozenSet[PathId]]] = field(default=None, repr=False)

    @property
    def n_signals(self) -> int:
        return len(self.sources)

    def path_ids(self) -> List[PathId]:
        return sorted(self.paths)

    def complement(self, pid: PathId) -> PathId:
        sig, sub = pid
        others = [s for s in range(len(self.subgroups)) if s != sub and self.subgroups[s] >> sig & 1]
        if len(others) != 1:
            raise ValueError(f"signal {signal_label(sig)} is not in exactly two subgroups")
        return (sig, others[0])

    def subgroup_links(self, sub: int) -> Set[int]:
        links: Set[int] = set()
        for (sig, s), path in self.paths.items():
            if s == sub:
                links.update(path)
        return links

    def cost(self) -> float:
        """Per-subgroup union of link lengths, summed over subgroups."""
        return sum(
            self.net.links[e].length
            for s in range(len(self.subgroups))
            for e in self.subgroup_links(s)
        )

    def counts(self) -> Dict[Node, int]:
        out: Dict[Node, int] = {}
        for src in self.sources:
            out[src] = out.get(src, 0) + 1
        return dict(sorted(out.items()))

    @property
    def coherence(self) -> FrozenSet[FrozenSet[PathId]]:
        """Unordered path pairs that are coherent from both sides."""
        if self._coherent is not None:
            return self._coherent
        coh: Dict[PathId, Set[PathId]] = {
            p: coherence_propagate(self, p)[0] for p in self.paths
        }
        pairs = frozenset(
            frozenset((p, q)) for p in coh for q in coh[p] if p in coh.get(q, ())
        )
        object.__setattr__(self, "_coherent", pairs)
        return pairs

    def is_coherent(self, p: PathId, q: PathId) -> bool:
        return frozenset((p, q)) in self.coherence

    def code_strings(self) -> List[str]:
        return ["+".join(signal_label(i) for i in bits(m)) or "0" for m in self.subgroups]

    def validate(self) -> List[str]:
        """Structural invariant violations (empty list when sound)."""
        problems = []
        net, d = self.net, self.destination
        for sig in range(self.n_signals):
            subs = [s for s, m in enumerate(self.subgroups) if m >> sig & 1]
            if len(subs) != 2:
                problems.append(f"signal {signal_label(sig)} in {len(subs)} subgroups")
        for s, m in enumerate(self.subgroups):
            for sig in bits(m):
                if (sig, s) not in self.paths:
                    problems.append(f"missing path {path_label((sig, s))}")
        for pid, path in self.paths.items():
            sig, s = pid
            if not self.subgroups[s] >> sig & 1:
                problems.append(f"path {path_label(pid)} outside its subgroup")
                continue
            if not path:
                problems.append(f"empty path {path_label(pid)}")
                continue
            nodes = net.path_nodes(path)
            if nodes[0] != self.sources[sig] or nodes[-1] != d:
                problems.append(f"path {path_label(pid)} does not join source to destination")
            if any(net.links[a].head != net.links[b].tail for a, b in zip(path, path[1:])):
                problems.append(f"path {path_label(pid)} is not contiguous")
            if len(set(nodes)) != len(nodes):
                problems.append(f"path {path_label(pid)} repeats a node")
        if problems:
            return problems
        for pid in self.paths:
            comp = self.complement(pid)
            if pid < comp and _share_span(self.paths[pid], self.paths[comp]):
                problems.append(f"complementary paths {path_label(pid)} share a span")
        for p, q in itertools.combinations(self.path_ids(), 2):
            if _share_span(self.paths[p], self.paths[q]) and not self.is_coherent(p, q):
                problems.append(
                    f"noncoherent paths {path_label(p)} and {path_label(q)} share a span"
                )
        return problems


def _share_span(a: Iterable[int], b: Iterable[int]) -> bool:
    return bool({e // 2 for e in a} & {e // 2 for e in b})


# --- failure simulation and decodability ---------------------------------


def received_after(cs: CodingStructure, dead: Iterable[PathId]) -> Tuple[int, ...]:
    """Subgroup rows once the given incidences are lost."""
    rows = list(cs.subgroups)
    for sig, sub in dead:
        rows[sub] &= ~(1 << sig)
    return tuple(rows)


def simulate_span_failure(cs: CodingStructure, span: int) -> Tuple[int, ...]:
    """Received vector (bitmask per subgroup) after ``span`` fails."""
    if not 0 <= span < cs.net.n_spans:
        raise KeyError(f"unknown span {span}")
    dead = [pid for pid, path in cs.paths.items() if any(e // 2 == span for e in path)]
    return received_after(cs, dead)


def gf2_rank(rows: Iterable[int]) -> int:
    basis: Dict[int, int] = {}
    rank = 0
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top not in basis:
                basis[top] = r
                rank += 1
                break
            r ^= basis[top]
    return rank


def is_decodable(rows: Sequence[int], n_signals: int) -> bool:
    """True iff the surviving rows span all ``n_signals`` signals over GF(2)."""
    return gf2_rank(rows) == n_signals


def hall_check(rows: Sequence[int], n_signals: int) -> bool:
    """Each signal alive somewhere and every k signals touch >= k nonzero rows."""
    if n_signals > HALL_LIMIT:
        raise ValueError(f"hall_check limited to {HALL_LIMIT} signals")
    live = [r for r in rows if r]
    alive = 0
    for r in live:
        alive |= r
    if alive != (1 << n_signals) - 1:
        return False
    for subset in range(1, 1 << n_signals):
        k = bin(subset).count("1")
        touched = sum(1 for r in live if r & subset)
        if touched < k:
            return False
    return True


@dataclass
class VerificationReport:
    checked_spans: int = 0
    failing_spans: List[int] = field(default_factory=list)
    disagreements: List[int] = field(default_factory=list)
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failing_spans

    def describe(self, net: Network) -> List[str]:
        return [net.span_name(s) for s in self.failing_spans]


def verify_group(cs: CodingStructure, check_hall: bool = True) -> VerificationReport:
    """Fail every span in turn and check GF(2) decodability at the destination."""
    report = VerificationReport()
    if cs.n_signals == 0:
        return report
    report.problems = cs.validate()
    if not is_decodable(cs.subgroups, cs.n_signals):
        report.problems.append("intact code is not decodable")
    hall = check_hall and cs.n_signals <= HALL_LIMIT
    for span in range(cs.net.n_spans):
        rows = simulate_span_failure(cs, span)
        ok = is_decodable(rows, cs.n_signals)
        report.checked_spans += 1
        if not ok:
            report.failing_spans.append(span)
        if hall and hall_check(rows, cs.n_signals) != ok:
            report.disagreements.append(span)
    return report


# --- coherence ------------------------------------------------------------


def coherence_propagate(cs_or_code, pid: PathId) -> Tuple[Set[PathId], Set[PathId]]:
    """Coherent and noncoherent paths relative to ``pid`` by the four rules.

    Rule 1 makes the complement noncoherent; paths coded with a noncoherent
    path become coherent (rules 2 and 4); complements of coherent paths
    become noncoherent (rule 3).  Rules run to a fixed point and every path
    left unvisited is coherent.  Noncoherence wins if both are derived.
    """
    subgroups = cs_or_code.subgroups if isinstance(cs_or_code, CodingStructure) else tuple(cs_or_code)
    incid = [(sig, s) for s, m in enumerate(subgroups) for sig in bits(m)]
    if pid not in incid:
        raise KeyError(f"unknown path {pid}")

    def comp(p: PathId) -> PathId:
        sig, s = p
        return next(q for q in incid if q[0] == sig and q[1] != s)

    def coded_with(p: PathId) -> List[PathId]:
        return [q for q in incid if q[1] == p[1] and q != p]

    noncoh: Set[PathId] = {comp(pid)}
    coh: Set[PathId] = set()
    frontier = [comp(pid)]
    while frontier:
        nxt = []
        for p in frontier:
            for q in coded_with(p):
                if q == pid or q in coh or q in noncoh:
                    continue
                coh.add(q)
                c = comp(q)
                if c != pid and c not in noncoh:
                    noncoh.add(c)
                    nxt.append(c)
        frontier = nxt
    coh -= noncoh
    rest = set(incid) - coh - noncoh - {pid}
    return coh | rest, noncoh


# --- coding groups --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CodingGroup:
    structure: CodingStructure
    cost: float
    id: str

    @property
    def destination(self) -> Node:
        return self.structure.destination

    @property
    def counts(self) -> Dict[Node, int]:
        return self.structure.counts()

    @property
    def size(self) -> int:
        return self.structure.n_signals

    @classmethod
    def from_structure(cls, cs: CodingStructure) -> "CodingGroup":
        return cls(cs, cs.cost(), canonical_id(cs))

    def to_json(self) -> dict:
        return group_to_json(self)


def _link_ref(net: Network, e: int) -> list:
    link = net.links[e]
    label = net.span_labels[e // 2] if e // 2 < len(net.span_labels) else None
    return [link.tail, link.head] + ([label] if label else [])


def canonical_form(cs: CodingStructure) -> list:
    """Order-free description: subgroups as sorted (source, links) members."""
    subs = []
    for s, m in enumerate(cs.subgroups):
        members = sorted(
            (cs.sources[sig], [_link_ref(cs.net, e) for e in cs.paths[(sig, s)]])
            for sig in bits(m)
        )
        subs.append(members)
    subs.sort(key=lambda x: json.dumps(x))
    return [cs.destination, subs]


def canonical_id(cs: CodingStructure) -> str:
    blob = json.dumps(canonical_form(cs), separators=(",", ":"))
    return hashlib.sha1(blob.encode()).hexdigest()[:16]


def group_to_json(group: CodingGroup) -> dict:
    cs = group.structure
    return {
        "schema": SCHEMA,
        "id": group.id,
        "destination": cs.destination,
        "counts": cs.counts(),
        "cost": group.cost,
        "signals": list(cs.sources),
        "subgroups": [bits(m) for m in cs.subgroups],
        "paths": [
            {"signal": sig, "subgroup": s, "links": [_link_ref(cs.net, e) for e in cs.paths[(sig, s)]]}
            for sig, s in cs.path_ids()
        ],
        "coherent_pairs": sorted(
            sorted([list(p) for p in pair]) for pair in cs.coherence if len(pair) == 2
        ),
    }


def _resolve_link(net: Network, ref: Sequence) -> int:
    tail, head = ref[0], ref[1]
    label = ref[2] if len(ref) > 2 else None
    for e in net.out_links(tail):
        link = net.links[e]
        lab = net.span_labels[e // 2] if e // 2 < len(net.span_labels) else None
        if link.head == head and (label is None or lab == label):
            return e
    raise KeyError(f"no link {tail}->{head}")


def group_from_json(data: dict, net: Network) -> CodingGroup:
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported coding group schema {data.get('schema')!r}")
    subgroups = tuple(sum(1 << i for i in sub) for sub in data["subgroups"])
    paths = {
        (p["signal"], p["subgroup"]): tuple(_resolve_link(net, ref) for ref in p["links"])
        for p in data["paths"]
    }
    cs = CodingStructure(net, data["destination"], tuple(data["signals"]), subgroups, paths)
    return CodingGroup(cs, cs.cost(), canonical_id(cs))


def singleton_structure(net: Network, dest: Node, source: Node, pair: PathPair) -> CodingStructure:
    """1+1 pair seen as the one-signal code ``[p, p]``."""
    paths = {(0, 0): tuple(pair.primary), (0, 1): tuple(pair.protection)}
    return CodingStructure(net, dest, (source,), (1, 1), paths)


def sdc_structure(
    net: Network,
    dest: Node,
    sources: Sequence[Node],
    primaries: Sequence[Sequence[int]],
    protections: Sequence[Sequence[int]],
) -> CodingStructure:
    """Systematic code: one subgroup per primary plus a parity subgroup."""
    n = len(sources)
    subgroups = tuple(1 << i for i in range(n)) + ((1 << n) - 1,)
    paths = {(i, i): tuple(primaries[i]) for i in range(n)}
    paths.update({(i, n): tuple(protections[i]) for i in range(n)})
    return CodingStructure(net, dest, tuple(sources), subgroups, paths)

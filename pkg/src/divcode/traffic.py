"""Gravity-model demand generation and per-destination aggregation."""

from __future__ import annotations

import csv
import io
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from .netgraph import Node


class TrafficMatrix:
    """Integer unit demands keyed by ordered ``(source, destination)``."""

    def __init__(self, entries: Mapping[Tuple[Node, Node], int] = ()):
        clean: Dict[Tuple[Node, Node], int] = {}
        for (s, d), units in dict(entries).items():
            if s == d:
                raise ValueError(f"self-demand at {s}")
            if int(units) != units or units < 0:
                raise ValueError(f"demand {s}->{d} must be a nonnegative integer")
            if units:
                clean[(str(s), str(d))] = int(units)
        self.entries = clean

    def __getitem__(self, key: Tuple[Node, Node]) -> int:
        return self.entries.get(key, 0)

    def __eq__(self, other) -> bool:
        return isinstance(other, TrafficMatrix) and self.entries == other.entries

    def __repr__(self) -> str:
        return f"TrafficMatrix({self.entries!r})"

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def destinations(self):
        return sorted({d for _, d in self.entries})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source", "destination", "units"])
        for (s, d), units in sorted(self.entries.items()):
            w.writerow([s, d, units])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrafficMatrix":
        rows = csv.DictReader(io.StringIO(text))
        entries: Dict[Tuple[Node, Node], int] = {}
        for row in rows:
            key = (row["source"].strip(), row["destination"].strip())
            entries[key] = entries.get(key, 0) + int(row["units"])
        return cls(entries)


def read_weights_csv(text: str) -> Dict[Node, float]:
    weights = {}
    for row in csv.DictReader(io.StringIO(text)):
        w = float(row["weight"])
        if not w > 0:
            raise ValueError(f"weight of {row['node']} must be positive")
        weights[row["node"].strip()] = w
    return weights


def generate_gravity(weights: Mapping[Node, float], total_demands: int, seed) -> TrafficMatrix:
    """Draw ``total_demands`` unit demands; pair (s, d) chosen with prob ~ w(s)*w(d)."""
    nodes = [v for v in weights if weights[v] > 0]
    if len(nodes) < 2:
        raise ValueError("need at least two nodes with positive weight")
    if total_demands < 1:
        raise ValueError("total_demands must be >= 1")
    pairs = [(s, d) for s in nodes for d in nodes if s != d]
    p = np.array([weights[s] * weights[d] for s, d in pairs], dtype=float)
    p /= p.sum()
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pairs), size=total_demands, p=p)
    counts = np.bincount(picks, minlength=len(pairs))
    return TrafficMatrix({pairs[i]: int(c) for i, c in enumerate(counts) if c})


def aggregate_to_destination(tm: TrafficMatrix, d: Node) -> Dict[Node, int]:
    """Demand vector ``t_f`` of every source f with traffic to ``d``."""
    return {s: u for (s, dest), u in sorted(tm.entries.items()) if dest == d}


def split_granularity(tm: TrafficMatrix, factor: int) -> TrafficMatrix:
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be a positive integer")
    return TrafficMatrix({k: u * int(factor) for k, u in tm.entries.items()})


def from_pairs(pairs: Iterable[Tuple[Node, Node]]) -> TrafficMatrix:
    entries: Dict[Tuple[Node, Node], int] = {}
    for s, d in pairs:
        entries[(s, d)] = entries.get((s, d), 0) + 1
    return TrafficMatrix(entries)

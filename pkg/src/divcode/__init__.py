"""Diversity-coding protection design by column generation."""

from .coding import CodingGroup, CodingStructure, verify_group
from .master import design_all_destinations, run_column_generation
from .netgraph import Network, disjoint_pair, parse_topology
from .traffic import TrafficMatrix

__all__ = [
    "CodingGroup",
    "CodingStructure",
    "Network",
    "TrafficMatrix",
    "design_all_destinations",
    "disjoint_pair",
    "parse_topology",
    "run_column_generation",
    "verify_group",
]

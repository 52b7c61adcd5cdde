"""Bundled example networks and traffic."""

from __future__ import annotations

from importlib import resources

from .netgraph import Network, parse_topology
from .traffic import TrafficMatrix, read_weights_csv

NAMES = ("example1", "chord", "oracle6", "nsfnet")


def _text(filename: str) -> str:
    return resources.files("divcode.data").joinpath(filename).read_text()


def fixture_path(filename: str):
    return resources.files("divcode.data").joinpath(filename)


def load_network(name: str) -> Network:
    if name not in NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(NAMES)}")
    return parse_topology(_text(f"{name}.topo"))


def load_traffic(name: str) -> TrafficMatrix:
    return TrafficMatrix.from_csv(_text(f"{name}.traffic.csv"))


def load_weights(name: str = "nsfnet"):
    return read_weights_csv(_text(f"{name}.weights.csv"))

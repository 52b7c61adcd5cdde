import itertools

import numpy as np
import pytest

from divcode.coding import verify_group
from divcode.fixtures import load_network
from divcode.lp import LinearProgram, MipLimits, solve_mip
from divcode.netgraph import Network, disjoint_pair, nodal_degree
from divcode.pricing import (
    MODES,
    PricingRequest,
    add_coding_relations,
    build_model,
    dump_model,
    price,
    solve_pricing,
)
from oracles import brute_sdc_best, random_network


def best_rc(req):
    """Optimal pricing objective, 0 when the empty group wins."""
    cs, status, _ = solve_pricing(req)
    assert status == "optimal"
    if cs is None:
        return 0.0
    return min(0.0, cs.cost() - sum(req.duals.get(f, 0.0) for f in cs.sources))


def random_instance(seed, n_nodes=5, extra=3, want_degree=3):
    rng = np.random.default_rng(seed)
    nodes, edges = random_network(rng, n_nodes, extra)
    net = Network.from_edges(edges, nodes=nodes)
    cands = [v for v in nodes if nodal_degree(net, v) == want_degree]
    d = cands[0] if cands else max(nodes, key=lambda v: nodal_degree(net, v))
    duals = {}
    for v in nodes:
        if v != d and rng.random() < 0.8:
            # duals around the 1+1 price keep both signs of reduced cost in play
            duals[v] = float(disjoint_pair(net, v, d).cost * rng.uniform(0.5, 1.0))
    return net, d, duals


def test_example_one_merged_column():
    net = load_network("example1")
    res = price(PricingRequest(net, "D", {"S1": 10, "S2": 7}, mode="sdc"))
    assert res.column is not None and res.column.cost == 15
    assert res.reduced_cost == pytest.approx(-2)
    assert res.column.counts == {"S1": 1, "S2": 1}


@pytest.mark.parametrize("mode", MODES)
def test_zero_duals_give_no_column(mode):
    net = load_network("oracle6")
    res = price(PricingRequest(net, "F", {"A": 0.0, "B": 0.0}, mode=mode))
    assert res.column is None and res.status == "optimal"


def test_parameter_validation():
    net = load_network("example1")
    with pytest.raises(ValueError):
        PricingRequest(net, "D", {"S1": 1}, alpha=0.5)
    with pytest.raises(ValueError):
        PricingRequest(net, "D", {"S1": 1}, beta=1.0)
    with pytest.raises(ValueError):
        PricingRequest(net, "D", {"S1": -1})
    with pytest.raises(ValueError):
        PricingRequest(net, "D", {"S1": 1}, mode="xyz")


def test_degree_one_destination_rejected():
    net = Network.from_edges([("a", "b", 1), ("b", "c", 1), ("c", "a", 1), ("c", "z", 1)])
    with pytest.raises(ValueError, match="nodal degree"):
        price(PricingRequest(net, "z", {"a": 1.0}))


@pytest.mark.parametrize("seed", range(12))
def test_sdc_pricing_matches_exhaustive_groups(seed):
    net, d, duals = random_instance(seed)
    size = nodal_degree(net, d) - 1
    expected = brute_sdc_best(net, d, duals, size)
    assert best_rc(PricingRequest(net, d, duals, mode="sdc")) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_mode_ordering_of_pricing_optima(seed):
    net, d, duals = random_instance(100 + seed, extra=4)
    sdc = best_rc(PricingRequest(net, d, duals, mode="sdc"))
    nsdc = best_rc(PricingRequest(net, d, duals, mode="nsdc"))
    cdc = best_rc(PricingRequest(net, d, duals, mode="cdc"))
    assert cdc <= nsdc + 1e-9 <= sdc + 2e-9


@pytest.mark.parametrize("seed", range(8))
def test_degree_two_destination_prices_as_pairs(seed):
    net, d, duals = random_instance(200 + seed, extra=2, want_degree=2)
    if nodal_degree(net, d) != 2:
        pytest.skip("no degree-2 node drawn")
    pairs = min([0.0] + [disjoint_pair(net, f, d).cost - p for f, p in duals.items()])
    assert best_rc(PricingRequest(net, d, duals, mode="cdc")) == pytest.approx(pairs)


def test_low_degree_source_coherent_gain():
    net = load_network("chord")
    costs = {}
    for mode in MODES:
        res = price(PricingRequest(net, "t", {"s": 6.5}, mode=mode))
        costs[mode] = (res.column.cost, res.column.size)
    assert costs["sdc"] == (6, 1) and costs["nsdc"] == (6, 1)
    assert costs["cdc"] == (11, 2)


@pytest.mark.parametrize("seed", range(6))
def test_returned_columns_satisfy_contract(seed):
    net, d, duals = random_instance(300 + seed, extra=4)
    for mode in MODES:
        res = price(PricingRequest(net, d, duals, mode=mode))
        if res.column is None:
            continue
        g = res.column
        assert verify_group(g.structure).ok and not g.structure.validate()
        assert g.cost == pytest.approx(g.structure.cost())
        assert res.reduced_cost < -1e-6
        assert res.reduced_cost == pytest.approx(g.cost - sum(duals[f] * c for f, c in g.counts.items()))
        assert sum(g.counts.values()) <= nodal_degree(net, d) - 1


# --- coding-cycle rows --------------------------------------------------------


def is_forest(n_sub, demand_subs):
    parent = list(range(n_sub))

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for a, b in demand_subs:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def relations_feasible(n_dem, demand_subs):
    p = LinearProgram()
    n, m, r, mm = add_coding_relations(p, n_dem, 2 * n_dem)
    for k, (a, b) in enumerate(demand_subs):
        for j, s_fix in ((2 * k, a), (2 * k + 1, b)):
            for s in range(2 * n_dem):
                v = p.variables[n[j, s]]
                v.lb = v.ub = 1.0 if s == s_fix else 0.0
    return solve_mip(p, MipLimits(method="highs")).status == "optimal"


def test_cycle_rows_admit_exactly_forests_two_demands():
    pairs = list(itertools.permutations(range(4), 2))
    for code in itertools.product(pairs, repeat=2):
        assert relations_feasible(2, code) == is_forest(4, code), code


def test_cycle_rows_admit_exactly_forests_three_demands():
    rng = np.random.default_rng(0)
    pairs = list(itertools.permutations(range(6), 2))
    seen_cycle = seen_forest = 0
    for _ in range(150):
        code = [pairs[i] for i in rng.integers(0, len(pairs), 3)]
        forest = is_forest(6, code)
        seen_forest += forest
        seen_cycle += not forest
        assert relations_feasible(3, code) == forest, code
    # the path code a, a+b, b+c, c must stay feasible
    assert relations_feasible(3, [(0, 1), (1, 2), (2, 3)])
    assert not relations_feasible(3, [(0, 1), (1, 2), (2, 0)])
    assert seen_cycle and seen_forest


def test_model_dump_is_lp_text():
    net = load_network("example1")
    text = dump_model(PricingRequest(net, "D", {"S1": 10, "S2": 7}, mode="nsdc"))
    assert text.startswith("\\ nsdc_pricing\nMinimize\n") and text.rstrip().endswith("End")
    assert "Binary" in text
    p, _ = build_model(PricingRequest(net, "D", {"S1": 10, "S2": 7}, mode="sdc"))
    assert any(v.name.startswith("CG[") for v in p.variables)


def test_enumerate_below_lists_every_cheap_column():
    from divcode.fixtures import load_network
    from divcode.pricing import enumerate_below

    net = load_network("example1")
    duals = {"S1": 10.0, "S2": 7.0}
    req = PricingRequest(net, "D", duals)
    cols, status = enumerate_below(req, 3.0)
    assert status == "optimal"
    rcs = sorted(g.cost - sum(duals[f] * c for f, c in g.counts.items()) for g in cols)
    assert rcs[0] == pytest.approx(-2)
    assert all(rc < 3.0 for rc in rcs)
    assert len({g.id for g in cols}) == len(cols)
    # the two 1+1 pairs price at exactly zero and must be listed
    assert sum(abs(rc) < 1e-9 for rc in rcs) >= 2
    tight, _ = enumerate_below(req, -1.0)
    assert [g.cost for g in tight] == [15]


def test_enumerate_below_respects_solve_budget():
    from divcode.fixtures import load_network
    from divcode.pricing import enumerate_below

    req = PricingRequest(load_network("oracle6"), "F", {"A": 9.0, "B": 9.0, "C": 9.0})
    cols, status = enumerate_below(req, 100.0, max_solves=3)
    assert status == "limit" and len(cols) <= 3

import math

import pytest

from divcode.coding import CodingGroup, sdc_structure, singleton_structure, verify_group
from divcode.fixtures import load_network, load_traffic
from divcode.master import (
    design_all_destinations,
    granularity_study,
    mode_sweep,
    plan_to_json,
    run_column_generation,
    seed_pool,
    solve_master_ilp,
    solve_master_lp,
)
from divcode.netgraph import Network, disjoint_pair
from divcode.traffic import TrafficMatrix, aggregate_to_destination


@pytest.fixture
def ex1():
    return load_network("example1")


def merged_column(net):
    s1, s2, m, d = "S1", "S2", "M", "D"
    f = net.find_link
    return CodingGroup.from_structure(
        sdc_structure(net, d, [s1, s2], [[f(s1, d)], [f(s2, d)]],
                      [[f(s1, m), f(m, d)], [f(s2, m), f(m, d)]])
    )


def test_seed_pool_example_one(ex1):
    pool = seed_pool(ex1, {"S1": 1, "S2": 1}, "D")
    assert [g.cost for g in pool] == [10, 7]
    assert len(seed_pool(ex1, {}, "D")) == 0


def test_seed_pool_three_sources():
    net = load_network("oracle6")
    dv = {"A": 2, "B": 1, "C": 1}
    pool = seed_pool(net, dv, "F")
    assert len(pool) == 3
    assert [g.cost for g in pool] == [disjoint_pair(net, f, "F").cost for f in "ABC"]


def test_master_lp_example_one(ex1):
    pool = seed_pool(ex1, {"S1": 1, "S2": 1}, "D")
    sol = solve_master_lp(pool, {"S1": 1, "S2": 1})
    assert sol.objective == pytest.approx(17)
    assert sol.multiplicities == pytest.approx([1, 1])
    assert sol.duals == pytest.approx({"S1": 10, "S2": 7})
    merged = merged_column(ex1)
    assert merged.cost == 15 and verify_group(merged.structure).ok
    pool.add(merged)
    sol = solve_master_lp(pool, {"S1": 1, "S2": 1})
    assert sol.objective == pytest.approx(15)
    assert sol.multiplicities[2] == pytest.approx(1)
    assert solve_master_lp(pool, {"S1": 0, "S2": 0}).objective == 0


def test_uncovered_source_rejected(ex1):
    pool = seed_pool(ex1, {"S1": 1}, "D")
    with pytest.raises(ValueError):
        solve_master_lp(pool, {"S1": 1, "S2": 1})


def test_pool_dedupes_and_checks_destination(ex1):
    pool = seed_pool(ex1, {"S1": 1}, "D")
    again = CodingGroup.from_structure(
        singleton_structure(ex1, "D", "S1", disjoint_pair(ex1, "S1", "D"))
    )
    assert not pool.add(again) and len(pool) == 1
    other = CodingGroup.from_structure(
        singleton_structure(ex1, "M", "S1", disjoint_pair(ex1, "S1", "M"))
    )
    with pytest.raises(ValueError):
        pool.add(other)


def test_example_one_column_generation(ex1):
    r = run_column_generation(ex1, {"S1": 1, "S2": 1}, "D", "sdc")
    assert r.trace[0].lp_objective == 17
    assert r.generated == 1
    assert r.ilp.objective == 15 and r.gap == 0 and r.proven
    assert r.trace[0].reduced_cost == pytest.approx(-2)


@pytest.mark.parametrize("mode", ["sdc", "nsdc", "cdc"])
def test_loop_invariants(mode):
    net = load_network("oracle6")
    tm = load_traffic("oracle6")
    for d in tm.destinations():
        dv = aggregate_to_destination(tm, d)
        r = run_column_generation(net, dv, d, mode)
        objs = [t.lp_objective for t in r.trace]
        assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))
        for t in r.trace:
            if t.column_id:
                assert t.reduced_cost < -1e-6 * max(1, abs(t.reduced_cost)) + 1e-12
        assert r.lp.objective <= r.ilp.objective + 1e-9 and r.gap >= 0
        for f, need in dv.items():
            got = sum(g.counts.get(f, 0) * k for g, k in zip(r.pool, r.ilp.multiplicities))
            assert got >= need
        for g, k in r.placed():
            assert verify_group(g.structure).ok


def test_single_destination_plan_matches_single_run():
    net = load_network("example1")
    tm = load_traffic("example1")
    plan = design_all_destinations(net, tm, "sdc")
    single = run_column_generation(net, aggregate_to_destination(tm, "D"), "D", "sdc")
    assert plan.total_cost == single.ilp.objective


def test_independent_destinations_add_up():
    net = load_network("oracle6")
    a = TrafficMatrix({("A", "F"): 2, ("B", "F"): 1})
    b = TrafficMatrix({("F", "A"): 1, ("C", "A"): 2})
    both = TrafficMatrix({**a.entries, **b.entries})
    pa, pb, pab = (design_all_destinations(net, tm, "sdc") for tm in (a, b, both))
    assert pab.total_cost == pytest.approx(pa.total_cost + pb.total_cost)


def test_mode_sweep_ordering():
    net = load_network("oracle6")
    plans = mode_sweep(net, load_traffic("oracle6"))
    s, n, c = (plans[m].total_cost for m in ("sdc", "nsdc", "cdc"))
    assert s >= n >= c
    ls, ln, lc = (plans[m].lp_total for m in ("sdc", "nsdc", "cdc"))
    assert ls >= ln - 1e-9 and ln >= lc - 1e-9


def test_errors_are_collected_per_destination():
    # P hangs off the ring by one span: its demand cannot be protected
    net = Network.from_edges([("A", "B", 1), ("B", "C", 1), ("C", "A", 1), ("P", "A", 1), ("C", "D", 1), ("D", "B", 1)])
    tm = TrafficMatrix({("P", "B"): 1, ("A", "C"): 1})
    plan = design_all_destinations(net, tm, "sdc")
    assert "B" in plan.errors and "C" in plan.results


def test_granularity_lp_bound_scales_exactly():
    net = load_network("oracle6")
    rows = granularity_study(net, {"A": 1, "B": 1, "C": 1}, "F", factors=(1, 10))
    assert math.isclose(rows[0]["lp_per_unit"], rows[1]["lp_per_unit"], rel_tol=1e-9)
    assert rows[1]["gap"] <= rows[0]["gap"] + 1e-12


def test_plan_json_shape():
    net = load_network("example1")
    plan = design_all_destinations(net, load_traffic("example1"), "sdc")
    doc = plan_to_json(plan)
    assert doc["schema"] == "divcode.plan/1"
    assert doc["total_cost"] == 15
    dest = doc["destinations"][0]
    assert dest["columns"][0]["multiplicity"] == 1
    assert dest["duals"] and "topology" in doc


def test_ilp_over_seed_pool_equals_aps():
    net = load_network("oracle6")
    dv = {"A": 2, "B": 1, "C": 1}
    pool = seed_pool(net, dv, "F")
    assert solve_master_ilp(pool, dv).objective == sum(
        disjoint_pair(net, f, "F").cost * t for f, t in dv.items()
    )


def test_gap_closing_reaches_the_integer_optimum():
    # price-and-branch alone stops at 99 here; the exhaustive optimum is 96
    import numpy as np

    from oracles import random_network

    rng = np.random.default_rng(1020)
    n = int(rng.integers(5, 7))
    nodes, edges = random_network(rng, n, int(rng.integers(2, 5)))
    net = Network.from_edges(edges, nodes)
    dv = {v: int(rng.integers(0, 4)) for v in nodes[1:]}
    plain = run_column_generation(net, dv, nodes[0], "sdc", close_gap=False)
    closed = run_column_generation(net, dv, nodes[0], "sdc")
    assert plain.ilp.objective == 99 and not plain.integer_optimal
    assert closed.ilp.objective == 96 and closed.integer_optimal
    assert closed.enumerated > 0 and closed.lp.objective == plain.lp.objective


def test_zero_gap_is_certified_without_enumeration(ex1):
    r = run_column_generation(ex1, {"S1": 1, "S2": 1}, "D", "sdc")
    assert r.integer_optimal and r.enumerated == 0


def test_gap_closing_off_by_default_for_nonsystematic():
    net = load_network("oracle6")
    r = run_column_generation(net, {"F": 1}, "A", "nsdc")
    assert r.gap > 0 and r.enumerated == 0 and not r.integer_optimal

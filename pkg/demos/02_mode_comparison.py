"""Capacity of 1+1 APS, the three coding families and the cut bound on the small fixtures."""

from divcode import fixtures
from divcode.baselines import aps_plan, oracle_optimum
from divcode.lowerbound import network_lower_bound
from divcode.master import mode_sweep
from divcode.traffic import aggregate_to_destination

print(f"{'network':10s} {'aps':>6s} {'sdc':>6s} {'nsdc':>6s} {'cdc':>6s} {'bound':>6s} {'oracle':>6s}")
for name in ("example1", "chord", "oracle6"):
    net, tm = fixtures.load_network(name), fixtures.load_traffic(name)
    aps = aps_plan(net, tm).total
    plans = mode_sweep(net, tm)  # each mode starts from the previous pools
    lb = sum(r.value for r in network_lower_bound(net, tm).values())
    # exhaustive systematic optimum, feasible only because these nets are tiny
    oracle = sum(oracle_optimum(net, aggregate_to_destination(tm, d), d) for d in tm.destinations())
    row = [aps] + [plans[m].total_cost for m in ("sdc", "nsdc", "cdc")] + [lb, oracle]
    print(f"{name:10s} " + " ".join(f"{v:6g}" for v in row))

# the chord net: a degree-2 source cannot keep three subgroups span-disjoint,
# but coherent coding lets both signals share the spans next to it
net = fixtures.load_network("chord")
cdc = mode_sweep(net, fixtures.load_traffic("chord"))["cdc"]
for g, k in cdc.results["t"].placed():
    cs = g.structure
    print(f"cdc group x{k}, cost {g.cost:g}, subgroups {[bin(m) for m in cs.subgroups]}")
    for (sig, sub), path in sorted(cs.paths.items()):
        print(f"  signal {sig} subgroup {sub}:", " -> ".join(net.path_nodes(path)))

"""Splitting demands into finer units: the LP bound per unit stays put, the integer gap shrinks."""

from divcode import fixtures
from divcode.master import granularity_study
from divcode.traffic import aggregate_to_destination

net, tm = fixtures.load_network("oracle6"), fixtures.load_traffic("oracle6")
totals = {}
for d in tm.destinations():
    rows = granularity_study(net, aggregate_to_destination(tm, d), d, factors=(1, 10, 100))
    for r in rows:
        lp, ilp = totals.get(r["factor"], (0.0, 0.0))
        totals[r["factor"]] = (lp + r["lp_per_unit"], ilp + r["ilp_per_unit"])
        print(f"dest {d} x{r['factor']:<4d} LP/unit {r['lp_per_unit']:8.3f}  ILP/unit {r['ilp_per_unit']:8.3f}"
              f"  gap {100 * r['gap']:6.2f}%  pool {r['columns']}")

print()
for k, (lp, ilp) in sorted(totals.items()):
    print(f"x{k:<4d} LP/unit {lp:.6f}  ILP/unit {ilp:.4f}  gap {100 * (ilp - lp) / lp:.2f}%")

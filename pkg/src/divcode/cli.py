"""Command-line front end: ``divcode <command> ...``.

Exit codes: 0 success, 1 runtime or verification failure, 2 usage error.
Every artifact is a deterministic function of the inputs and flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .baselines import MAX_ORACLE_NODES, aps_plan, enumerate_all_groups
from .coding import group_from_json, verify_group
from .fixtures import NAMES, load_network, load_traffic
from .lowerbound import DEFAULT_K_MAX, enumerate_cuts, solve_lower_bound
from .lp import MipLimits
from .master import (
    MAX_ITER,
    design_all_destinations,
    plan_to_json,
    solve_master_ilp,
)
from .netgraph import nodal_degree, parse_topology
from .traffic import TrafficMatrix, aggregate_to_destination, generate_gravity, read_weights_csv

log = logging.getLogger("divcode")

BUILTIN = "builtin:"


class UsageError(Exception):
    pass


# --- input helpers ----------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_topology_arg(arg: str):
    if arg.startswith(BUILTIN):
        name = arg[len(BUILTIN):]
        if name not in NAMES:
            raise UsageError(f"unknown built-in network {name!r}; choose from {', '.join(NAMES)}")
        return load_network(name)
    return parse_topology(_read(arg))


def load_traffic_arg(arg: str) -> TrafficMatrix:
    if arg.startswith(BUILTIN):
        return load_traffic(arg[len(BUILTIN):])
    return TrafficMatrix.from_csv(_read(arg))


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header: List[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return repr(round(x, 9))
    return x


def _emit(args, files: dict, payload: dict) -> None:
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    if args.json:
        sys.stdout.write(_dump_json(payload))


def _limits() -> MipLimits:
    return MipLimits.from_env(method="highs")


def _check_dest(net, tm, dest):
    if dest is None:
        return None
    if dest not in net.nodes:
        raise UsageError(f"unknown destination {dest!r}")
    return [dest]


# --- commands ---------------------------------------------------------------


def cmd_design(args) -> int:
    net = load_topology_arg(args.topology)
    tm = load_traffic_arg(args.traffic)
    dests = _check_dest(net, tm, args.dest)
    if dests and not aggregate_to_destination(tm, args.dest):
        log.warning("no demand toward %s; plan is empty", args.dest)
    plan = design_all_destinations(
        net, tm, args.coding, _limits(), args.max_iter, destinations=dests, rc_tol=args.tolerance,
        close_gap={"auto": None, "on": True, "off": False}[args.close_gap],
    )
    doc = plan_to_json(plan)
    doc["seed"] = args.seed
    summary = []
    for d in sorted(plan.results):
        r = plan.results[d]
        summary.append(
            [d, nodal_degree(net, d), sum(r.demands.values()), r.lp.objective, r.ilp.objective,
             100 * r.gap, r.generated, len(r.trace), len(r.pool), int(r.proven), int(r.integer_optimal)]
        )
    summary.append(["ALL", "", tm.total if dests is None else sum(x[2] for x in summary),
                    plan.lp_total, plan.total_cost,
                    100 * (plan.total_cost - plan.lp_total) / plan.lp_total if plan.lp_total else 0.0,
                    plan.columns_generated, sum(len(r.trace) for r in plan.results.values()),
                    sum(len(r.pool) for r in plan.results.values()),
                    int(all(r.proven for r in plan.results.values())),
                    int(all(r.integer_optimal for r in plan.results.values()))])
    trace = [
        [d, t.iteration, t.lp_objective, t.reduced_cost, t.column_id, t.column_cost, t.pricing_status]
        for d in sorted(plan.results)
        for t in plan.results[d].trace
    ]
    files = {
        "plan.json": _dump_json(doc),
        "summary.csv": _csv(
            ["destination", "nodal_degree", "demands", "lp_objective", "ilp_objective", "gap_percent",
             "columns_generated", "iterations", "pool_size", "proven", "integer_optimal"],
            summary,
        ),
        "trace.csv": _csv(
            ["destination", "iteration", "lp_objective", "reduced_cost", "column_id", "column_cost",
             "pricing_status"],
            trace,
        ),
    }
    _emit(args, files, doc)
    if not args.json:
        print(f"{args.coding} total {plan.total_cost:g} (LP {plan.lp_total:g}), SCaP {plan.scap:.2f}%")
        for d in sorted(plan.results):
            objs = " -> ".join(f"{t.lp_objective:g}" for t in plan.results[d].trace)
            print(f"  {d}: {objs} | ILP {plan.results[d].ilp.objective:g}")
    if plan.errors:
        for d, msg in plan.errors.items():
            print(f"error at destination {d}: {msg}", file=sys.stderr)
        return 1
    return 0


def cmd_lowerbound(args) -> int:
    net = load_topology_arg(args.topology)
    tm = load_traffic_arg(args.traffic)
    dests = _check_dest(net, tm, args.dest) or tm.destinations()
    results = []
    for d in dests:
        dv = aggregate_to_destination(tm, d)
        results.append(solve_lower_bound(net, enumerate_cuts(net, d, dv, args.max_cut_size), dv, _limits()))
    doc = {
        "k_max": args.max_cut_size,
        "total_bound": sum(r.value for r in results),
        "destinations": [r.to_json(net) for r in results],
    }
    files = {
        "bound.json": _dump_json(doc),
        "bound.csv": _csv(
            ["destination", "bound", "k_max", "cut_count", "approximate"],
            [[r.destination, r.value, r.k_max, r.n_cuts, int(r.approximate)] for r in results],
        ),
    }
    _emit(args, files, doc)
    if not args.json:
        print(f"lower bound {doc['total_bound']:g} (k_max {args.max_cut_size})")
    return 0


def cmd_verify(args) -> int:
    try:
        plan = json.loads(_read(args.plan))
    except json.JSONDecodeError as exc:
        raise UsageError(f"plan is not JSON: {exc}") from None
    net = load_topology_arg(args.topology) if args.topology else parse_topology(plan["topology"])
    failures = []
    checked = 0
    for dest in plan["destinations"]:
        for col in dest["columns"]:
            group = group_from_json(col["group"], net)
            rep = verify_group(group.structure)
            checked += 1
            stored = col["group"].get("cost")
            cost_ok = stored is None or abs(stored - group.cost) <= 1e-9 * max(1.0, abs(stored))
            if rep.ok and not rep.problems and cost_ok:
                continue
            failures.append(
                {
                    "destination": dest["destination"],
                    "column": col["group"].get("id"),
                    "failing_spans": rep.describe(net),
                    "problems": rep.problems + ([] if cost_ok else [f"cost {stored} != {group.cost}"]),
                }
            )
    doc = {"ok": not failures, "columns_checked": checked, "failures": failures}
    _emit(args, {"verify.json": _dump_json(doc)}, doc)
    if not args.json:
        print(f"{checked} columns checked, {len(failures)} failing")
        for f in failures:
            print(f"  {f['destination']} {f['column']}: spans {', '.join(f['failing_spans'])} {'; '.join(f['problems'])}")
    return 0 if not failures else 1


def cmd_gen_traffic(args) -> int:
    weights = read_weights_csv(_read(args.weights))
    tm = generate_gravity(weights, args.demands, args.seed)
    text = tm.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    if args.json:
        sys.stdout.write(_dump_json({"seed": args.seed, "total": tm.total,
                                     "entries": [[s, d, u] for (s, d), u in sorted(tm.entries.items())]}))
    elif not args.out:
        sys.stdout.write(text)
    return 0


def cmd_oracle(args) -> int:
    net = load_topology_arg(args.topology)
    tm = load_traffic_arg(args.traffic)
    dests = _check_dest(net, tm, args.dest) or tm.destinations()
    rows = []
    for d in dests:
        dv = aggregate_to_destination(tm, d)
        srcs = [f for f in net.nodes if dv.get(f, 0) > 0]
        pool = enumerate_all_groups(net, d, sources=srcs, max_nodes=args.max_nodes, limits=_limits())
        sol = solve_master_ilp(pool, dv)
        rows.append({"destination": d, "groups": len(pool), "optimum": sol.objective})
    doc = {"total": sum(r["optimum"] for r in rows), "destinations": rows}
    files = {
        "oracle.json": _dump_json(doc),
        "oracle.csv": _csv(["destination", "groups", "optimum"],
                           [[r["destination"], r["groups"], r["optimum"]] for r in rows]),
    }
    _emit(args, files, doc)
    if not args.json:
        print(f"oracle optimum {doc['total']:g}")
    return 0


def cmd_aps(args) -> int:
    net = load_topology_arg(args.topology)
    tm = load_traffic_arg(args.traffic)
    plan = aps_plan(net, tm)
    doc = plan.to_json()
    files = {
        "aps.json": _dump_json(doc),
        "aps.csv": _csv(["source", "destination", "units", "pair_cost"],
                        [[s, d, tm[(s, d)], c] for (s, d), c in sorted(plan.pair_costs.items())]),
    }
    _emit(args, files, doc)
    if not args.json:
        print(f"1+1 APS total {plan.total:g}, SCaP {plan.scap:.2f}%")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divcode", description="Diversity-coding protection design.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, traffic=True, out=True):
        p.add_argument("--topology", required=True, help=f"topology file or {BUILTIN}<name>")
        if traffic:
            p.add_argument("--traffic", required=True, help=f"traffic CSV or {BUILTIN}<name>")
        if out:
            p.add_argument("--out", help="directory for JSON/CSV artifacts")
        p.add_argument("--json", action="store_true", help="machine-readable output on stdout")

    p = sub.add_parser("design", help="column-generation design")
    common(p)
    p.add_argument("--dest")
    p.add_argument("--coding", choices=("sdc", "nsdc", "cdc"), required=True)
    p.add_argument("--max-iter", type=int, default=MAX_ITER)
    p.add_argument("--tolerance", type=float, default=1e-6, help="relative reduced-cost threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--close-gap", choices=("auto", "on", "off"), default="auto",
                   help="enumerate columns priced below the ILP/LP gap (auto: sdc only)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("lowerbound", help="cut-based capacity bound")
    common(p)
    p.add_argument("--dest")
    p.add_argument("--max-cut-size", type=int, default=DEFAULT_K_MAX)
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("verify", help="re-verify every placed column of a plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--topology", help="override the topology embedded in the plan")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-traffic", help="gravity-model traffic")
    p.add_argument("--weights", required=True)
    p.add_argument("--demands", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="CSV file (stdout when omitted)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gen_traffic)

    p = sub.add_parser("oracle", help="enumerate-then-place optimum (small networks)")
    common(p)
    p.add_argument("--dest")
    p.add_argument("--max-nodes", type=int, default=MAX_ORACLE_NODES)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("aps", help="1+1 APS baseline")
    common(p)
    p.set_defaults(func=cmd_aps)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    json_mode = getattr(args, "json", False)
    try:
        if getattr(args, "max_iter", 1) < 1 or getattr(args, "max_cut_size", 1) < 1:
            raise UsageError("iteration and cut-size limits must be >= 1")
        return args.func(args)
    except UsageError as exc:
        _error(exc, "usage", json_mode)
        return 2
    except Exception as exc:
        _error(exc, type(exc).__name__, json_mode)
        return 1


def _error(exc: Exception, kind: str, json_mode: bool) -> None:
    doc = {"error": kind, "message": str(exc)}
    lineno = getattr(exc, "lineno", None)
    if lineno is not None:
        doc["line"] = lineno
    if json_mode:
        sys.stdout.write(_dump_json(doc))
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

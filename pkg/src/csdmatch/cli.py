"""Command-line front end.

Subcommands:
  net info <tntp>   network summary (nodes, links, zones, time stats)
  gen               generate an instance and write it to --out
  solve-hier        hierarchical mechanism on an instance
  solve-base        exact baseline on an instance
  verify            equilibrium condition report for the baseline solution
  bench sweep       parameter sweep with CSV/JSON report

Exit codes: 0 success, 1 solver failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import bench, master, network, scenario
from .baseline import extract_equilibrium, solve_global_relaxation, verify_equilibrium
from .errors import ConfigurationError, MatchingError


def _load_network(path):
    if path is None:
        return network.load_benchmark_network()
    return network.parse_tntp(path)


def _scenario_args(p, drivers_required=True):
    p.add_argument("--network", metavar="PATH",
                   help="TNTP network file (default: bundled benchmark-scale network)")
    p.add_argument("--num-od", type=int, default=100, help="driver OD pairs |W|")
    p.add_argument("--num-tasks", type=int, default=100, help="task pickup-delivery pairs |T|")
    p.add_argument("--num-drivers", type=int, default=50_000 if drivers_required else None,
                   help="driver count |A|")
    p.add_argument("--theta", type=float, default=1.0, help="logit scale of the cost noise")
    p.add_argument("--gamma", type=float, default=3.0, help="dedicated-cost factor")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed")


def _params_from(args):
    return scenario.ScenarioParams(
        num_od=args.num_od, num_task_pairs=args.num_tasks,
        num_drivers=args.num_drivers, theta=args.theta,
        gamma=args.gamma, seed=args.seed)


def _cmd_net_info(args):
    net = _load_network(args.path if args.path != "-" else None)
    ttm = network.all_zone_times(net)
    off = ttm.t[ttm.t > 0]
    print(f"nodes: {net.num_nodes}")
    print(f"links: {net.num_links}")
    print(f"zones: {net.num_zones}")
    print(f"zone-pair travel time (min): min {off.min():.2f}  "
          f"median {np.median(off):.2f}  max {off.max():.2f}")
    return 0


def _cmd_gen(args):
    net = _load_network(args.network)
    ttm = network.all_zone_times(net)
    inst = scenario.generate_instance(_params_from(args), ttm)
    out = args.out or "instance.json"
    json_path, costs_path = scenario.save_instance(inst, out)
    print(f"wrote {json_path} and {costs_path}")
    return 0


def _cmd_solve_hier(args):
    inst = scenario.load_instance(args.instance)
    t0 = time.perf_counter()
    metrics_args = dict(tol=args.tol, max_iter=args.max_iter, parallel=args.parallel)
    kernel = master.build_kernel(inst.C, inst.cbar, inst.params.theta)
    part = master.sinkhorn_solve(kernel, inst.q.astype(float), inst.n.astype(float),
                                 tol=args.tol, max_iter=args.max_iter)
    del metrics_args
    duals = master.extract_duals(part.u, part.v, inst.params.theta, inst.cbar)
    f_int = master.round_partition(part.f, inst.q, inst.n, inst.C, inst.cbar,
                                   inst.params.theta)
    if args.trace:
        master.write_trace_csv(part, args.trace)
    from .auction import run_group_auction
    outcomes = []
    for g in range(inst.num_od):
        outcomes.append(run_group_auction(inst.group_costs(g), f_int[g], inst.cbar))
    elapsed = time.perf_counter() - t0
    z_hier = sum(o.true_surplus for o in outcomes)
    doc = {
        "iterations": part.iterations,
        "residual": part.residual,
        "rewards_master": duals.w.tolist(),
        "capacity_prices": duals.lam.tolist(),
        "partition_int": f_int.tolist(),
        "surplus": z_hier,
        "elapsed_s": elapsed,
    }
    out = args.out or "hier_solution.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    print(f"surplus {z_hier:.4f} after {part.iterations} iterations -> {out}")
    if args.dump_auctions:
        start = np.concatenate([[0], np.cumsum(inst.q)])
        for g, o in enumerate(outcomes):
            ids = np.arange(start[g], start[g + 1])
            path = f"{out}.group{g:04d}.json"
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(o.to_json_dict(driver_ids=ids, task_pairs=inst.task_pairs),
                          fh, indent=1)
        print(f"dumped {inst.num_od} auction files next to {out}")
    return 0


def _cmd_solve_base(args):
    inst = scenario.load_instance(args.instance)
    t0 = time.perf_counter()
    gm = solve_global_relaxation(inst)
    elapsed = time.perf_counter() - t0
    doc = gm.to_json_dict(inst)
    doc["elapsed_s"] = elapsed
    out = args.out or "base_solution.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    print(f"surplus {gm.surplus:.4f} -> {out}")
    return 0


def _cmd_verify(args):
    inst = scenario.load_instance(args.instance)
    gm = solve_global_relaxation(inst)
    w, rho = extract_equilibrium(gm, inst)
    report = verify_equilibrium(gm.y, w, rho, inst, tol=args.tol)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def _cmd_bench_sweep(args):
    net = _load_network(args.network)
    ttm = network.all_zone_times(net)
    values = tuple(float(v) if args.axis == "theta" else int(v) for v in args.values)
    cfg = bench.RunConfig(
        base=_params_from(args), axis=args.axis, values=values,
        repetitions=args.reps, tol=args.tol, max_iter=args.max_iter,
        parallel=args.parallel)
    progress = print if args.verbose else None
    table = bench.run_sweep(cfg, ttm, progress=progress)
    out = args.out or f"sweep_{args.axis}.{args.format}"
    written = bench.emit_report(table, args.format, out)
    print("wrote " + ", ".join(written))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="csdmatch",
                                     description="Hierarchical crowdsourced-delivery matching")
    sub = parser.add_subparsers(dest="command", required=True)

    p_net = sub.add_parser("net", help="network utilities")
    net_sub = p_net.add_subparsers(dest="net_command", required=True)
    p_info = net_sub.add_parser("info", help="summarize a TNTP network")
    p_info.add_argument("path", help="TNTP file ('-' for the bundled network)")
    p_info.set_defaults(func=_cmd_net_info)

    p_gen = sub.add_parser("gen", help="generate a matching instance")
    _scenario_args(p_gen)
    p_gen.add_argument("--out", metavar="PATH", help="instance JSON path")
    p_gen.set_defaults(func=_cmd_gen)

    p_hier = sub.add_parser("solve-hier", help="hierarchical mechanism")
    p_hier.add_argument("--instance", required=True, metavar="PATH")
    p_hier.add_argument("--tol", type=float, default=1e-5)
    p_hier.add_argument("--max-iter", type=int, default=10_000)
    p_hier.add_argument("--parallel", type=int, default=1, metavar="N")
    p_hier.add_argument("--out", metavar="PATH")
    p_hier.add_argument("--trace", metavar="PATH", help="iteration trace CSV")
    p_hier.add_argument("--dump-auctions", action="store_true",
                        help="write one JSON file per group auction")
    p_hier.set_defaults(func=_cmd_solve_hier)

    p_base = sub.add_parser("solve-base", help="exact global baseline")
    p_base.add_argument("--instance", required=True, metavar="PATH")
    p_base.add_argument("--out", metavar="PATH")
    p_base.set_defaults(func=_cmd_solve_base)

    p_ver = sub.add_parser("verify", help="equilibrium condition report")
    p_ver.add_argument("--instance", required=True, metavar="PATH")
    p_ver.add_argument("--tol", type=float, default=1e-7)
    p_ver.set_defaults(func=_cmd_verify)

    p_bench = sub.add_parser("bench", help="benchmark harness")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)
    p_sweep = bench_sub.add_parser("sweep", help="parameter sweep")
    _scenario_args(p_sweep)
    p_sweep.add_argument("--axis", choices=bench.SWEEP_AXES, required=True)
    p_sweep.add_argument("--values", nargs="+", required=True)
    p_sweep.add_argument("--reps", type=int, default=30)
    p_sweep.add_argument("--tol", type=float, default=1e-5)
    p_sweep.add_argument("--max-iter", type=int, default=10_000)
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="N")
    p_sweep.add_argument("--out", metavar="PATH")
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.add_argument("--verbose", action="store_true")
    p_sweep.set_defaults(func=_cmd_bench_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except MatchingError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

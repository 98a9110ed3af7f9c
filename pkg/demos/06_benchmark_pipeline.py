"""End-to-end benchmark: hierarchical mechanism vs exact baseline.

One pipeline run partitions tasks fluidly, rounds to integers, auctions
each group with truthful bids, then solves the global problem exactly and
reports accuracy (surplus gap, per-group gaps, KL divergence of partition
ratios) and speed (master + mean per-group auction time vs baseline time).
A small theta sweep writes the plot-ready CSV report.

Takes a couple of minutes at these sizes; shrink num_drivers to go faster.
"""
import numpy as np

from csdmatch import bench, network, scenario

net = network.load_benchmark_network()
ttm = network.all_zone_times(net)
bench.warm_up()  # load the compiled kernels outside the timed sections

# ---------------------------------------------------------------------------
# one run at a mid scale
# ---------------------------------------------------------------------------
params = scenario.ScenarioParams(num_od=50, num_task_pairs=50,
                                 num_drivers=20_000, theta=1.0, seed=0)
inst = scenario.generate_instance(params, ttm)
metrics, art = bench.run_pipeline(inst)

print(f"hierarchical surplus: {metrics.z_hier:,.0f}")
print(f"exact optimum:        {metrics.z_base:,.0f}")
print(f"relative error:       {metrics.surplus_rel_err:.4%}")
print(f"per-group error:      mean {metrics.od_err_mean:.4%}, "
      f"max {metrics.od_err_max:.4%}")
print(f"partition KL:         mean {metrics.kl_mean:.4f}, "
      f"max {metrics.kl_max:.4f}")
print(f"times: master {metrics.time_master*1e3:.0f} ms, "
      f"mean auction {metrics.time_sub_avg*1e3:.1f} ms, "
      f"baseline {metrics.time_baseline:.2f} s")
speedup = metrics.time_baseline / (metrics.time_master + metrics.time_sub_avg)
print(f"speedup (master + mean auction vs baseline): {speedup:.0f}x")
print(f"tasks left to dedicated vehicles: {int(art.dedicated.sum())} "
      f"of {int(inst.n.sum())}")

# ---------------------------------------------------------------------------
# a small sweep over the noise scale, with a CSV/JSON report
# ---------------------------------------------------------------------------
base = scenario.ScenarioParams(num_od=20, num_task_pairs=20,
                               num_drivers=5_000, theta=1.0, seed=100)
cfg = bench.RunConfig(base=base, axis="theta", values=(0.1, 1.0, 2.0),
                      repetitions=3)
table = bench.run_sweep(cfg, ttm)
for row in table:
    print(f"theta={row['value']}: err {row['surplus_rel_err_mean']:.4%} "
          f"(+/- {row['surplus_rel_err_std']:.4%}), "
          f"KL {row['kl_mean_mean']:.4f}")
files = bench.emit_report(table, "csv", "/tmp/demo_theta_sweep.csv")
print("report written:", ", ".join(files))

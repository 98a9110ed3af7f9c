"""Pipeline orchestration, accuracy/speed indicators, and parameter sweeps.

One pipeline run takes an instance through the hierarchical mechanism
(fluid partition -> integer rounding -> one VCG auction per driver group
with truthful bids) and through the exact global baseline, then reports:

  - wall time of the partition solve, the mean per-group auction time
    (groups are independent, so in production they run in parallel and the
    mean is the honest per-group cost), and the baseline solve time;
  - the relative gap between the hierarchical surplus (true costs of the
    auction allocations, summed over groups) and the baseline optimum,
    globally and per OD group;
  - the KL divergence between each group's fluid allocation ratios and the
    ratios the baseline induces.

Sweeps rerun the pipeline over a grid of driver counts, OD counts, or
noise scales with derived seeds (base + 10007 * point_index + repetition)
and aggregate mean/stdev per metric into a CSV report plus a JSON mirror.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import master
from ._transport import SCALE, scale_costs
from .auction import run_group_auction, truthful
from .baseline import aggregate_matching, solve_global_relaxation
from .errors import ConfigurationError, MatchingError, ValidationError
from .scenario import ScenarioParams, generate_instance

SWEEP_AXES = ("drivers", "od", "theta")
SEED_STRIDE = 10007


@dataclass
class Metrics:
    """Per-run indicators; timings are wall-clock seconds."""

    time_master: float
    time_sub_avg: float
    time_baseline: float
    surplus_rel_err: float
    od_err_mean: float
    od_err_max: float
    kl_mean: float
    kl_max: float
    iterations: int
    z_hier: float
    z_base: float
    z_fluid: float

    TIMING_FIELDS = ("time_master", "time_sub_avg", "time_baseline")

    def key_fields(self):
        """Everything that must reproduce exactly for a fixed seed."""
        return tuple(getattr(self, f.name) for f in fields(self)
                     if f.name not in self.TIMING_FIELDS)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class PipelineArtifacts:
    """Intermediate products of one pipeline run, for inspection and dumps."""

    partition: master.PartitionResult
    duals: master.DualPrices
    f_int: np.ndarray
    outcomes: list
    gm: object
    f_bar: np.ndarray
    dedicated: np.ndarray
    sub_times: np.ndarray


@dataclass
class RunConfig:
    """Sweep configuration."""

    base: ScenarioParams
    axis: str
    values: tuple
    repetitions: int = 30
    tol: float = 1e-5
    max_iter: int = 10_000
    parallel: int = 1

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigurationError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.values:
            raise ConfigurationError("sweep values must be nonempty")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be at least 1")

    def params_for(self, value, rep_index, point_index):
        seed = self.base.seed + SEED_STRIDE * point_index + rep_index
        kw = {
            "num_od": self.base.num_od,
            "num_task_pairs": self.base.num_task_pairs,
            "num_drivers": self.base.num_drivers,
            "theta": self.base.theta,
            "gamma": self.base.gamma,
            "task_multiplier": self.base.task_multiplier,
            "seed": seed,
        }
        if self.axis == "drivers":
            kw["num_drivers"] = int(value)
        elif self.axis == "od":
            kw["num_od"] = int(value)
        else:
            kw["theta"] = float(value)
        return ScenarioParams(**kw)


def warm_up():
    """Run a toy pipeline once so compiled kernels load outside timed code.

    The solver kernels are JIT-compiled and disk-cached; their first call
    in a process pays a load cost that would otherwise pollute the first
    run's timing fields.
    """
    params = ScenarioParams(num_od=1, num_task_pairs=2, num_drivers=2, seed=0)
    inst = _toy_instance(params)
    run_pipeline(inst)


def _toy_instance(params):
    from .scenario import Instance
    return Instance(
        params=params,
        od_pairs=np.array([[1, 2]]),
        task_pairs=np.array([[1, 2], [2, 3]]),
        q=np.array([2]),
        n=np.array([2, 2]),
        C=np.array([[0.5, 1.5]]),
        cbar=np.array([3.0, 4.0]),
        private_costs=np.array([[0.4, 1.8], [0.9, 1.1]]),
        driver_od=np.zeros(2, dtype=np.int64),
    )


def kl_divergence(p_bar, p):
    """Kullback-Leibler divergence sum(p_bar * log(p_bar / p)).

    Both arguments must sum to one (1e-9 slack).  Zero entries of p_bar
    contribute nothing; a zero in p under positive p_bar yields inf, which
    the caller reports rather than raising.
    """
    p_bar = np.asarray(p_bar, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    for name, vec in (("p_bar", p_bar), ("p", p)):
        if abs(vec.sum() - 1.0) > 1e-9:
            raise ValidationError(f"{name} must sum to 1, got {vec.sum()!r}")
    mask = p_bar > 0.0
    if np.any(p[mask] <= 0.0):
        return float("inf")
    return float(np.sum(p_bar[mask] * np.log(p_bar[mask] / p[mask])))


def run_pipeline(inst, tol=1e-5, max_iter=10_000, parallel=1):
    """Hierarchical mechanism and exact baseline on one instance.

    Returns (Metrics, PipelineArtifacts).  Instance generation and any
    serialization stay outside all timed sections.
    """
    t0 = time.perf_counter()
    kernel = master.build_kernel(inst.C, inst.cbar, inst.params.theta)
    part = master.sinkhorn_solve(kernel, inst.q.astype(np.float64),
                                 inst.n.astype(np.float64),
                                 tol=tol, max_iter=max_iter)
    duals = master.extract_duals(part.u, part.v, inst.params.theta, inst.cbar)
    f_int = master.round_partition(part.f, inst.q, inst.n, inst.C, inst.cbar,
                                   inst.params.theta)
    time_master = time.perf_counter() - t0

    def one_group(g):
        start = time.perf_counter()
        out = run_group_auction(inst.group_costs(g), f_int[g], inst.cbar,
                                bidding_rule=truthful)
        return out, time.perf_counter() - start

    groups = range(inst.num_od)
    try:
        if parallel > 1:
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                results = list(pool.map(one_group, groups))
        else:
            results = [one_group(g) for g in groups]
    except MatchingError as exc:
        raise MatchingError(f"group auction failed: {exc}") from exc
    outcomes = [r[0] for r in results]
    sub_times = np.array([r[1] for r in results])

    t0 = time.perf_counter()
    gm = solve_global_relaxation(inst)
    time_baseline = time.perf_counter() - t0

    f_bar = aggregate_matching(gm.y, inst)
    metrics = compute_metrics(inst, part, f_int, outcomes, gm, f_bar,
                              time_master, float(sub_times.mean()), time_baseline)
    dedicated = inst.n - f_int.sum(axis=0)
    artifacts = PipelineArtifacts(partition=part, duals=duals, f_int=f_int,
                                  outcomes=outcomes, gm=gm, f_bar=f_bar,
                                  dedicated=dedicated, sub_times=sub_times)
    return metrics, artifacts


def compute_metrics(inst, part, f_int, outcomes, gm, f_bar,
                    time_master, time_sub_avg, time_baseline):
    theta = inst.params.theta
    z_hier = sum(out.true_surplus for out in outcomes)
    z_base = gm.surplus
    surplus_rel_err = abs(z_base - z_hier) / abs(z_base) if z_base != 0 else abs(z_hier)

    # Per-OD surpluses of the baseline, grouped over its assignment.
    savings_scaled = scale_costs(inst.cbar[None, :] - inst.private_costs)
    per_driver = savings_scaled[np.arange(inst.num_drivers), gm.y]
    z_base_od = np.bincount(inst.driver_od, weights=per_driver.astype(np.float64),
                            minlength=inst.num_od) / SCALE
    z_hier_od = np.array([out.true_surplus for out in outcomes])
    nonzero = z_base_od != 0.0
    od_err = np.abs(z_base_od - z_hier_od)
    od_rel = np.where(nonzero, od_err / np.where(nonzero, np.abs(z_base_od), 1.0), od_err)
    od_err_mean = float(od_rel.mean())
    od_err_max = float(od_rel[nonzero].max()) if np.any(nonzero) else 0.0

    q = inst.q.astype(np.float64)
    kls = np.array([
        kl_divergence(f_bar[g] / q[g], part.f[g] / q[g])
        for g in range(inst.num_od)
    ])
    z_fluid = sum(
        master.logit_value_function(part.f[g], inst.C[g], inst.cbar, theta, q[g])
        for g in range(inst.num_od)
    )
    return Metrics(
        time_master=time_master,
        time_sub_avg=time_sub_avg,
        time_baseline=time_baseline,
        surplus_rel_err=float(surplus_rel_err),
        od_err_mean=od_err_mean,
        od_err_max=od_err_max,
        kl_mean=float(kls.mean()),
        kl_max=float(kls.max()),
        iterations=part.iterations,
        z_hier=float(z_hier),
        z_base=float(z_base),
        z_fluid=float(z_fluid),
    )


METRIC_COLUMNS = [f.name for f in fields(Metrics)]


def run_sweep(cfg, ttm, progress=None):
    """Repeat the pipeline over the sweep grid and aggregate per point.

    Returns a list of row dicts (one per sweep value) with mean and std
    columns per metric; failed repetitions are counted per point and the
    sweep keeps going.
    """
    table = []
    for j, value in enumerate(cfg.values):
        runs = []
        failures = 0
        for k in range(cfg.repetitions):
            try:
                params = cfg.params_for(value, k, j)
                inst = generate_instance(params, ttm)
                metrics, _ = run_pipeline(inst, tol=cfg.tol,
                                          max_iter=cfg.max_iter,
                                          parallel=cfg.parallel)
                runs.append(metrics)
            except MatchingError as exc:
                failures += 1
                if progress:
                    progress(f"  repetition {k} at {cfg.axis}={value} failed: {exc}")
            if progress:
                progress(f"{cfg.axis}={value} rep {k + 1}/{cfg.repetitions} done")
        row = {"axis": cfg.axis, "value": value,
               "repetitions": len(runs), "failures": failures}
        for name in METRIC_COLUMNS:
            series = np.array([getattr(m, name) for m in runs], dtype=np.float64)
            row[f"{name}_mean"] = float(series.mean()) if series.size else float("nan")
            row[f"{name}_std"] = float(series.std(ddof=0)) if series.size else float("nan")
        table.append(row)
    return table


def report_columns():
    cols = ["axis", "value", "repetitions", "failures"]
    for name in METRIC_COLUMNS:
        cols.append(f"{name}_mean")
        cols.append(f"{name}_std")
    return cols


def emit_report(table, fmt, path):
    """Write the sweep table; CSV always gets a JSON mirror alongside.

    Returns the list of files written.
    """
    if not table:
        raise ValidationError("refusing to write an empty report")
    path = str(path)
    written = []
    if fmt == "csv":
        cols = report_columns()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for row in table:
                fh.write(",".join(_cell(row[c]) for c in cols) + "\n")
        written.append(path)
        mirror = path[:-4] + ".json" if path.endswith(".csv") else path + ".json"
        _write_json(table, mirror)
        written.append(mirror)
    elif fmt == "json":
        _write_json(table, path)
        written.append(path)
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}")
    return written


def load_report_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(table, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=1)


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)

"""Synthetic matching instances: driver groups, tasks, and private costs.

An instance fixes |W| driver OD pairs, |T| pickup-delivery pairs, integer
driver counts q per OD and task counts n per pair (the task total is twice
the driver total by default), the detour-cost matrix C, dedicated-vehicle
costs cbar = gamma * t_rs, and each driver's private cost
c[a, rs] = C[od(a), rs] - eps[a, rs] with eps drawn i.i.d. from a type I
extreme value distribution of scale theta (mode 0, so the CDF is
exp(-exp(-theta * x))).

Generation is deterministic per seed: one PCG64 stream is split per entity
(pair sampling, driver ODs, task pairs, epsilon draws) via SeedSequence
spawning, so adding consumers to one stream never shifts another.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError
from .network import TravelTimeMatrix, detour_cost_matrix

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class ScenarioParams:
    """Knobs of the instance generator."""

    num_od: int
    num_task_pairs: int
    num_drivers: int
    theta: float = 1.0
    gamma: float = 3.0
    seed: int = 0
    task_multiplier: int = 2

    def __post_init__(self):
        if self.theta <= 0:
            raise ConfigurationError("theta must be positive")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if min(self.num_od, self.num_task_pairs, self.num_drivers) < 1:
            raise ConfigurationError("counts must be at least 1")
        if self.num_drivers < self.num_od:
            raise ConfigurationError("need at least one driver per OD pair")
        if self.task_multiplier * self.num_drivers < self.num_task_pairs:
            raise ConfigurationError("need at least one task per task pair")

    @property
    def num_tasks(self):
        return self.task_multiplier * self.num_drivers


@dataclass
class Instance:
    """One matching instance.

    od_pairs, task_pairs : (.,2) arrays of zone ids
    q : drivers per OD pair (sums to |A|); drivers are numbered so that
        group g occupies the contiguous id range starting at group_start[g]
    n : tasks per pickup-delivery pair (sums to task_multiplier * |A|)
    C : (|W|, |T|) detour costs in minutes
    cbar : dedicated-vehicle cost per task pair
    private_costs : (|A|, |T|) detour disutilities c = C[od(a)] - eps
    driver_od : OD-group index of each driver
    """

    params: ScenarioParams
    od_pairs: np.ndarray
    task_pairs: np.ndarray
    q: np.ndarray
    n: np.ndarray
    C: np.ndarray
    cbar: np.ndarray
    private_costs: np.ndarray
    driver_od: np.ndarray
    group_start: np.ndarray = field(init=False)

    def __post_init__(self):
        if int(self.q.sum()) != self.params.num_drivers:
            raise ValidationError("driver counts do not sum to |A|")
        if int(self.n.sum()) != self.params.num_tasks:
            raise ValidationError("task counts do not sum to N")
        if np.any(self.q < 1) or np.any(self.n < 1):
            raise ValidationError("every OD needs a driver and every pair a task")
        starts = np.zeros(self.q.shape[0] + 1, dtype=np.int64)
        np.cumsum(self.q, out=starts[1:])
        self.group_start = starts

    @property
    def num_od(self):
        return int(self.q.shape[0])

    @property
    def num_task_pairs(self):
        return int(self.n.shape[0])

    @property
    def num_drivers(self):
        return int(self.q.sum())

    def group_slice(self, g):
        """Driver id range of OD group g."""
        return slice(int(self.group_start[g]), int(self.group_start[g + 1]))

    def group_costs(self, g):
        """Private cost matrix of the drivers in group g."""
        return self.private_costs[self.group_slice(g)]

    def epsilon(self):
        """Random utility draws reconstructed from the stored costs."""
        return self.C[self.driver_od] - self.private_costs


def sample_gumbel(theta, count, rng):
    """Draws with CDF exp(-exp(-theta * x)): mode 0, mean EULER_GAMMA/theta."""
    if theta <= 0:
        raise ConfigurationError("theta must be positive")
    return rng.gumbel(loc=0.0, scale=1.0 / theta, size=count)


def dedicated_cost(t_rs, gamma):
    """Cost gamma * t_rs of serving a pair with a dedicated vehicle."""
    if gamma <= 0:
        raise ConfigurationError("gamma must be positive")
    return gamma * np.asarray(t_rs, dtype=np.float64)


def _counts_with_coverage(total, bins, rng):
    """Uniform assignment of `total` items to `bins`, each bin nonempty."""
    counts = np.ones(bins, dtype=np.int64)
    extra = rng.integers(0, bins, size=total - bins)
    counts += np.bincount(extra, minlength=bins)
    return counts


def generate_instance(params, ttm):
    """Build an Instance on the given travel-time matrix.

    OD pairs and task pairs are sampled without replacement from the
    ordered zone pairs with strictly positive travel time; every OD keeps
    at least one driver and every pair at least one task, with the
    remainders assigned uniformly.  Output is byte-identical per seed.
    """
    if not isinstance(ttm, TravelTimeMatrix):
        raise ConfigurationError("generate_instance needs a TravelTimeMatrix")
    z = ttm.t.shape[0]
    iu, ju = np.nonzero(ttm.t > 0.0)
    candidates = np.stack([iu, ju], axis=1)
    if candidates.shape[0] < max(params.num_od, params.num_task_pairs):
        raise ConfigurationError(
            f"{candidates.shape[0]} usable zone pairs cannot host "
            f"{params.num_od} OD pairs / {params.num_task_pairs} task pairs")
    seeds = np.random.SeedSequence(params.seed).spawn(4)
    rng_pairs = np.random.default_rng(seeds[0])
    rng_drivers = np.random.default_rng(seeds[1])
    rng_tasks = np.random.default_rng(seeds[2])
    rng_eps = np.random.default_rng(seeds[3])

    od_sel = rng_pairs.choice(candidates.shape[0], size=params.num_od, replace=False)
    rs_sel = rng_pairs.choice(candidates.shape[0], size=params.num_task_pairs, replace=False)
    od_idx = candidates[od_sel]
    rs_idx = candidates[rs_sel]

    q = _counts_with_coverage(params.num_drivers, params.num_od, rng_drivers)
    n = _counts_with_coverage(params.num_tasks, params.num_task_pairs, rng_tasks)

    C = detour_cost_matrix(ttm, od_idx, rs_idx)
    t_rs = ttm.t[rs_idx[:, 0], rs_idx[:, 1]]
    cbar = dedicated_cost(t_rs, params.gamma)

    driver_od = np.repeat(np.arange(params.num_od, dtype=np.int64), q)
    eps = sample_gumbel(params.theta, (params.num_drivers, params.num_task_pairs), rng_eps)
    private_costs = C[driver_od] - eps

    return Instance(
        params=params,
        od_pairs=ttm.zones[od_idx],
        task_pairs=ttm.zones[rs_idx],
        q=q,
        n=n,
        C=C,
        cbar=cbar,
        private_costs=private_costs,
        driver_od=driver_od,
    )


def save_instance(inst, json_path, costs_path=None):
    """Write the self-describing JSON document plus a binary cost cache.

    The JSON carries everything except private_costs, which go to a
    sidecar .npz because of their (|A| x |T|) size.  Default sidecar name:
    <json_path stem>.costs.npz.
    """
    json_path = str(json_path)
    if costs_path is None:
        costs_path = json_path[:-5] + ".costs.npz" if json_path.endswith(".json") \
            else json_path + ".costs.npz"
    doc = {
        "format": "csdmatch-instance-v1",
        "params": {
            "num_od": inst.params.num_od,
            "num_task_pairs": inst.params.num_task_pairs,
            "num_drivers": inst.params.num_drivers,
            "theta": inst.params.theta,
            "gamma": inst.params.gamma,
            "seed": inst.params.seed,
            "task_multiplier": inst.params.task_multiplier,
        },
        "od_pairs": inst.od_pairs.tolist(),
        "task_pairs": inst.task_pairs.tolist(),
        "q": inst.q.tolist(),
        "n": inst.n.tolist(),
        "C": inst.C.tolist(),
        "cbar": inst.cbar.tolist(),
        "private_costs_file": str(costs_path),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    np.savez_compressed(costs_path, private_costs=inst.private_costs,
                        driver_od=inst.driver_od)
    return json_path, str(costs_path)


def load_instance(json_path):
    """Inverse of save_instance."""
    with open(json_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "csdmatch-instance-v1":
        raise ValidationError(f"{json_path}: not a csdmatch instance document")
    params = ScenarioParams(**doc["params"])
    with np.load(doc["private_costs_file"]) as payload:
        private_costs = payload["private_costs"]
        driver_od = payload["driver_od"]
    return Instance(
        params=params,
        od_pairs=np.array(doc["od_pairs"], dtype=np.int64),
        task_pairs=np.array(doc["task_pairs"], dtype=np.int64),
        q=np.array(doc["q"], dtype=np.int64),
        n=np.array(doc["n"], dtype=np.int64),
        C=np.array(doc["C"], dtype=np.float64),
        cbar=np.array(doc["cbar"], dtype=np.float64),
        private_costs=private_costs,
        driver_od=driver_od,
    )

"""Within-group task-driver matching and VCG rewards.

Each driver group runs a sealed-bid auction: drivers submit one bid per
pickup-delivery pair, the manager assigns drivers to the group's allocated
task counts so that declared social surplus (dedicated cost minus bid,
summed over assignments) is maximal, and each winner is rewarded with the
loss the group would suffer without them.  The assignment is an exact
integer transportation solve; rewards reuse its optimal flow, repairing a
single unit per removed driver instead of re-solving.

When a driver is removed, the group must still cover its allocated counts
minus one unit; that unit falls back to a dedicated vehicle, which
contributes zero savings wherever it ends up.  With that convention the
reward simplifies to

    w_a = cbar[task(a)] - (objective recovery when a vanishes),

which is never above the dedicated cost of the assigned task.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._transport import SCALE, scale_costs, solve_transport
from .errors import InfeasibleError, ValidationError


@dataclass
class Allocation:
    """Integer assignment of one group's drivers to task pairs."""

    y: np.ndarray
    counts: np.ndarray
    objective_scaled: int

    @property
    def objective(self):
        return self.objective_scaled / SCALE


@dataclass
class AuctionOutcome:
    """Everything one group auction produces."""

    allocation: Allocation
    rewards: np.ndarray
    declared_surplus: float
    true_surplus: float
    slack_tasks: np.ndarray
    payoffs: np.ndarray

    def to_json_dict(self, driver_ids=None, task_pairs=None):
        y = self.allocation.y
        if driver_ids is None:
            driver_ids = np.arange(y.shape[0])
        entries = []
        for i in range(y.shape[0]):
            rs = int(y[i])
            pair = [int(p) for p in task_pairs[rs]] if task_pairs is not None else rs
            entries.append({
                "driver": int(driver_ids[i]),
                "task_pair": pair,
                "reward": float(self.rewards[i]),
                "payoff": float(self.payoffs[i]),
            })
        return {
            "declared_surplus": float(self.declared_surplus),
            "true_surplus": float(self.true_surplus),
            "drivers": entries,
        }


def truthful(private_costs):
    """Default bidding rule: report the private costs unchanged."""
    return private_costs


def _check_counts(f_row, group_size):
    f_row = np.asarray(f_row, dtype=np.int64)
    if np.any(f_row < 0):
        raise ValidationError("negative task allocation")
    if int(f_row.sum()) != group_size:
        raise InfeasibleError(
            f"group of {group_size} drivers cannot cover {int(f_row.sum())} tasks")
    return f_row


def _solve_scaled(savings_scaled, f_row):
    sol = solve_transport(-savings_scaled, f_row)
    counts = sol.counts
    return sol, Allocation(y=sol.assign.copy(), counts=counts,
                           objective_scaled=-sol.objective_scaled)


def solve_group_assignment(savings, f_row):
    """Exact maximizer of total savings under the group's task counts.

    savings : (group, |T|) float matrix, dedicated cost minus declared bid
    f_row : integer allocation; must sum to the group size

    The constraint matrix is totally unimodular, so the relaxed
    transportation problem solved here has an integral optimum.
    """
    savings = np.asarray(savings, dtype=np.float64)
    f_row = _check_counts(f_row, savings.shape[0])
    _, alloc = _solve_scaled(scale_costs(savings), f_row)
    return alloc


def vcg_rewards(bids, f_row, cbar):
    """Per-driver rewards: the societal loss each driver's absence causes.

    bids : (group, |T|) declared costs
    f_row : integer allocation summing to the group size
    cbar : dedicated costs per task pair

    Returns (rewards, allocation) for the declared-cost optimum.
    """
    bids = np.asarray(bids, dtype=np.float64)
    cbar = np.asarray(cbar, dtype=np.float64)
    f_row = _check_counts(f_row, bids.shape[0])
    savings_scaled = scale_costs(cbar[None, :] - bids)
    sol, alloc = _solve_scaled(savings_scaled, f_row)
    improvements = sol.removal_improvements()
    cbar_scaled = scale_costs(cbar)
    rewards_scaled = cbar_scaled[alloc.y] - improvements
    return rewards_scaled / SCALE, alloc


def run_group_auction(private_costs, f_row, cbar, bidding_rule=truthful):
    """Steps 1-3 for one group: bid, assign, reward.

    private_costs : (group, |T|) true detour disutilities
    bidding_rule : maps private costs to bids (truthful by default;
        misreporting rules are test fixtures)
    """
    private_costs = np.asarray(private_costs, dtype=np.float64)
    cbar = np.asarray(cbar, dtype=np.float64)
    bids = np.asarray(bidding_rule(private_costs), dtype=np.float64)
    if bids.shape != private_costs.shape:
        raise ValidationError("bidding rule changed the bid matrix shape")
    rewards, alloc = vcg_rewards(bids, f_row, cbar)
    idx = np.arange(private_costs.shape[0])
    true_savings_scaled = scale_costs(cbar[None, :] - private_costs)
    true_surplus = int(true_savings_scaled[idx, alloc.y].sum()) / SCALE
    payoffs = rewards - (scale_costs(private_costs)[idx, alloc.y] / SCALE)
    # Allocated counts are covered exactly within the group; dedicated
    # vehicles only appear at the bench level (tasks never allocated) and
    # inside removal problems.
    slack = np.zeros_like(np.asarray(f_row, dtype=np.int64))
    return AuctionOutcome(
        allocation=alloc,
        rewards=rewards,
        declared_surplus=alloc.objective,
        true_surplus=true_surplus,
        slack_tasks=slack,
        payoffs=payoffs,
    )

"""Exact global matching, equilibrium extraction, and verification.

The relaxed global problem assigns every driver to exactly one task pair,
holding each pair's assignment count at or below its task total, and
maximizes total cost savings (dedicated cost minus private cost).  The
constraint matrix is totally unimodular, so solving it as a min-cost flow
on the driver -> task-pair bipartite graph returns a binary optimum; the
node potentials at optimality are the LP duals.  The capacity price
lambda[rs] >= 0 turns into the market reward w[rs] = cbar[rs] - lambda[rs]
and the per-driver surplus rho[a] = max_rs (w[rs] - c[a, rs]), which
together with the assignment must satisfy the competitive-equilibrium
conditions (utility maximization, supply-demand consistency, conservation).
`verify_equilibrium` checks those conditions and reports worst violations
instead of raising.

Degenerate duals are canonicalized by pinning the sink potential at zero,
so slack columns always price at exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._transport import SCALE, scale_costs, solve_transport
from .errors import ConfigurationError


@dataclass
class GlobalMatching:
    """Optimal global assignment with its equilibrium variables."""

    y: np.ndarray
    lam: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    surplus: float
    surplus_scaled: int
    counts: np.ndarray

    def to_json_dict(self, inst=None):
        doc = {
            "surplus": self.surplus,
            "assignment": self.y.tolist(),
            "lambda": self.lam.tolist(),
            "reward": self.w.tolist(),
            "task_counts": self.counts.tolist(),
        }
        if inst is not None:
            doc["task_pairs"] = inst.task_pairs.tolist()
        return doc


@dataclass
class EquilibriumReport:
    """Worst violation of each equilibrium condition."""

    tol: float
    utility_max_assigned: float
    utility_max_envy: float
    capacity_excess: float
    reward_above_dedicated: float
    complementarity: float
    conservation: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(v <= self.tol for v in self.violations().values())

    def violations(self):
        return {
            "utility_max_assigned": self.utility_max_assigned,
            "utility_max_envy": self.utility_max_envy,
            "capacity_excess": self.capacity_excess,
            "reward_above_dedicated": self.reward_above_dedicated,
            "complementarity": self.complementarity,
            "conservation": self.conservation,
        }

    def lines(self):
        marks = []
        for name, value in self.violations().items():
            flag = "ok" if value <= self.tol else "VIOLATED"
            marks.append(f"{name:>24}: {value: .3e}  [{flag}]")
        marks.append(f"{'overall':>24}: {'pass' if self.passed else 'FAIL'} (tol={self.tol:g})")
        return marks


def solve_global_relaxation(inst):
    """Exact optimum of the relaxed global matching problem.

    Costs go onto the 1e-9 fixed-point grid, so the reported surplus of two
    exact solvers on the same instance is comparable for strict equality.
    """
    savings_scaled = scale_costs(inst.cbar[None, :] - inst.private_costs)
    sol = solve_transport(-savings_scaled, inst.n)
    lam_scaled = sol.column_prices()
    lam = lam_scaled / SCALE
    w = inst.cbar - lam
    idx = np.arange(inst.num_drivers)
    surplus_scaled = -sol.objective_scaled
    rho = (savings_scaled[idx, sol.assign] - lam_scaled[sol.assign]) / SCALE
    return GlobalMatching(
        y=sol.assign.copy(),
        lam=lam,
        rho=rho,
        w=w,
        surplus=surplus_scaled / SCALE,
        surplus_scaled=int(surplus_scaled),
        counts=sol.counts.copy(),
    )


def extract_equilibrium(gm, inst):
    """Market variables certifying the matching: w = cbar - lambda and the
    utility-maximizing surplus rho[a] = max_rs (w[rs] - c[a, rs])."""
    w = inst.cbar - gm.lam
    rho = np.max(w[None, :] - inst.private_costs, axis=1)
    return w, rho


def verify_equilibrium(y, w, rho, inst, tol=1e-7):
    """Check the three equilibrium conditions; failures are reported, not raised.

    y : per-driver task index (negative = unassigned, a conservation breach)
    """
    y = np.asarray(y)
    w = np.asarray(w, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    assigned = y >= 0
    idx = np.nonzero(assigned)[0]
    if idx.size:
        got = w[y[idx]] - inst.private_costs[idx, y[idx]]
        utility_assigned = float(np.max(np.abs(got - rho[idx])))
    else:
        utility_assigned = 0.0
    envy = np.max(w[None, :] - inst.private_costs - rho[:, None], axis=1)
    utility_envy = float(max(np.max(envy), 0.0))
    counts = np.bincount(y[idx], minlength=inst.num_task_pairs)
    capacity_excess = float(max(int(np.max(counts - inst.n)), 0))
    reward_above = float(max(np.max(w - inst.cbar), 0.0))
    comp = np.minimum(np.maximum(inst.cbar - w, 0.0),
                      np.maximum(inst.n - counts, 0.0))
    complementarity = float(np.max(comp))
    conservation = float(np.count_nonzero(~assigned))
    return EquilibriumReport(
        tol=tol,
        utility_max_assigned=utility_assigned,
        utility_max_envy=utility_envy,
        capacity_excess=capacity_excess,
        reward_above_dedicated=reward_above,
        complementarity=complementarity,
        conservation=conservation,
    )


def aggregate_matching(y, inst):
    """Per-group task counts implied by a global assignment."""
    f_bar = np.zeros((inst.num_od, inst.num_task_pairs), dtype=np.int64)
    np.add.at(f_bar, (inst.driver_od, y), 1)
    return f_bar


def brute_force_oracle(inst):
    """Exhaustive optimum over every capacity-feasible assignment.

    Guarded to |A| <= 8 and |T| <= 3.  Returns (optimal surplus, array of
    all optimal assignments); the surplus lands on the same fixed-point
    grid as solve_global_relaxation, so equality checks are exact.
    """
    nd = inst.num_drivers
    nt = inst.num_task_pairs
    if nd > 8 or nt > 3:
        raise ConfigurationError(
            f"brute force refused: |A|={nd} > 8 or |T|={nt} > 3")
    savings_scaled = scale_costs(inst.cbar[None, :] - inst.private_costs)
    choices = np.indices((nt,) * nd).reshape(nd, -1).T
    counts = np.stack([(choices == j).sum(axis=1) for j in range(nt)], axis=1)
    feasible = np.all(counts <= inst.n[None, :], axis=1)
    if not np.any(feasible):
        raise ConfigurationError("no feasible assignment under task counts")
    values = savings_scaled[np.arange(nd)[None, :], choices].sum(axis=1)
    values = np.where(feasible, values, np.iinfo(np.int64).min)
    best = values.max()
    optimal = choices[values == best]
    return int(best) / SCALE, optimal

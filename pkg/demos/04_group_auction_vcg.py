"""One group's sealed-bid auction.

Drivers bid their cost for each task type; the manager assigns the group's
allocated task counts to maximize declared surplus and rewards each winner
with the loss their absence would cause (so no driver gains by shading a
bid).  The demo replays a hand-sized auction, shows the reward arithmetic,
and then lets one driver try a thousand misreports.
"""
import numpy as np

from csdmatch.auction import run_group_auction, solve_group_assignment, vcg_rewards

cbar = np.array([10.0, 10.0])          # dedicated-vehicle cost per task type
costs = np.array([[2.0, 9.0],          # driver 0's true costs
                  [4.0, 9.0]])         # driver 1's true costs
f_row = np.array([1, 1])               # the group covers one task of each type

out = run_group_auction(costs, f_row, cbar)
print("assignment (driver -> task):", out.allocation.y.tolist())
print("rewards:", out.rewards.tolist())
print("payoffs:", out.payoffs.tolist())
print(f"declared surplus {out.declared_surplus:.1f} = true surplus "
      f"{out.true_surplus:.1f} under truthful bids")

# Reward logic, spelled out for driver 0: without it, driver 1 would switch
# to the cheap task (savings 6 instead of 1); society loses 5, so driver 0
# is paid its task's dedicated cost minus nothing... the recovery: 10-5=5.
print("\ndriver 0 reward components: dedicated cost 10, group recovery "
      f"after removal 5 -> reward {out.rewards[0]:.0f}")

# ---------------------------------------------------------------------------
# Misreporting never helps
# ---------------------------------------------------------------------------
rng = np.random.default_rng(7)
best_gain = -np.inf
for _ in range(1000):
    bids = costs.copy()
    bids[0] += rng.normal(0.0, 4.0, size=2)
    rewards, alloc = vcg_rewards(bids, f_row, cbar)
    payoff = rewards[0] - costs[0, alloc.y[0]]
    best_gain = max(best_gain, payoff - out.payoffs[0])
print(f"\nbest payoff gain over 1000 misreports by driver 0: {best_gain:.2e}"
      " (never positive)")

# ---------------------------------------------------------------------------
# Larger group, still exact
# ---------------------------------------------------------------------------
rng = np.random.default_rng(3)
costs6 = rng.normal(5.0, 3.0, size=(6, 3))
cbar3 = np.array([9.0, 12.0, 8.0])
alloc = solve_group_assignment(cbar3[None, :] - costs6, [2, 2, 2])
print("\nsix drivers over counts (2,2,2):", alloc.y.tolist(),
      f"surplus {alloc.objective:.2f}")

"""Global exact solver, equilibrium extraction, and verification."""
import numpy as np
import pytest

from csdmatch import scenario
from csdmatch.baseline import (aggregate_matching, brute_force_oracle,
                               extract_equilibrium, solve_global_relaxation,
                               verify_equilibrium)
from csdmatch.errors import ConfigurationError


def _micro_instance(ttm, seed, num_od=2, num_task_pairs=3, num_drivers=6,
                    theta=1.0):
    params = scenario.ScenarioParams(num_od=num_od, num_task_pairs=num_task_pairs,
                                     num_drivers=num_drivers, theta=theta,
                                     seed=seed)
    return scenario.generate_instance(params, ttm)


def _handmade_instance(private_costs, cbar, n, q):
    """Instance with fully pinned costs (bypasses the generator)."""
    num_drivers = private_costs.shape[0]
    W = len(q)
    params = scenario.ScenarioParams(num_od=W, num_task_pairs=len(n),
                                     num_drivers=num_drivers, seed=0)
    driver_od = np.repeat(np.arange(W, dtype=np.int64), q)
    dummy_pairs = np.stack([np.arange(1, len(n) + 1), np.arange(2, len(n) + 2)], 1)
    return scenario.Instance(
        params=params,
        od_pairs=np.stack([np.arange(1, W + 1), np.arange(2, W + 2)], 1),
        task_pairs=dummy_pairs,
        q=np.asarray(q, dtype=np.int64),
        n=np.asarray(n, dtype=np.int64),
        C=np.zeros((W, len(n))),
        cbar=np.asarray(cbar, dtype=np.float64),
        private_costs=np.asarray(private_costs, dtype=np.float64),
        driver_od=driver_od,
    )


def test_dominant_tasks_no_contention():
    # each driver has a strictly dominant task, capacity slack everywhere
    costs = np.array([
        [0.0, 9.0, 9.0],
        [9.0, 0.0, 9.0],
        [9.0, 9.0, 0.0],
    ])
    inst = _handmade_instance(costs, cbar=[5.0, 5.0, 5.0], n=[2, 2, 2], q=[3])
    gm = solve_global_relaxation(inst)
    assert gm.y.tolist() == [0, 1, 2]
    assert np.allclose(gm.lam, 0.0)
    assert np.allclose(gm.w, inst.cbar)


def test_three_driver_hand_instance_matches_enumeration(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=3, num_od=2, num_task_pairs=2,
                           num_drivers=3)
    inst.n[:] = [1, 2]
    gm = solve_global_relaxation(inst)
    surplus, optima = brute_force_oracle(inst)
    assert gm.surplus == surplus
    assert any(np.array_equal(gm.y, np.array(o)) for o in optima)


def test_oracle_equivalence_on_random_instances(ring_ttm):
    for seed in range(40):
        inst = _micro_instance(ring_ttm, seed=seed,
                               num_od=1 + seed % 3,
                               num_task_pairs=1 + (seed // 2) % 3,
                               num_drivers=3 + seed % 6)
        gm = solve_global_relaxation(inst)
        surplus, optima = brute_force_oracle(inst)
        assert gm.surplus == surplus
        assert any(np.array_equal(gm.y, np.array(o)) for o in optima)


def test_strong_duality(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=5, num_drivers=8, num_task_pairs=3)
    gm = solve_global_relaxation(inst)
    dual_value = float(inst.n @ gm.lam + gm.rho.sum())
    assert dual_value == pytest.approx(gm.surplus, rel=1e-6)


def test_integrality_and_capacity(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=6, num_drivers=8, num_task_pairs=3)
    gm = solve_global_relaxation(inst)
    assert gm.y.dtype.kind == "i"
    assert np.all(gm.counts <= inst.n)
    assert np.all((gm.lam <= 1e-12) | (gm.counts == inst.n))


def test_assigned_drivers_attain_their_surplus(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=7, num_drivers=8, num_task_pairs=3)
    gm = solve_global_relaxation(inst)
    w, rho = extract_equilibrium(gm, inst)
    attained = w[gm.y] - inst.private_costs[np.arange(8), gm.y]
    assert np.allclose(attained, rho, atol=1e-9)


def test_extract_equilibrium_slack_case():
    costs = np.array([[0.0, 9.0], [9.0, 0.0]])
    inst = _handmade_instance(costs, cbar=[5.0, 5.0], n=[2, 2], q=[2])
    gm = solve_global_relaxation(inst)
    w, rho = extract_equilibrium(gm, inst)
    assert np.allclose(w, inst.cbar)


def test_verifier_passes_on_solver_output(ring_ttm):
    for seed in (11, 12, 13):
        inst = _micro_instance(ring_ttm, seed=seed, num_drivers=7,
                               num_task_pairs=3)
        gm = solve_global_relaxation(inst)
        w, rho = extract_equilibrium(gm, inst)
        report = verify_equilibrium(gm.y, w, rho, inst, tol=1e-7)
        assert report.passed, report.violations()


def test_verifier_flags_reward_perturbation():
    # two drivers compete for one unit of a clearly better task; its
    # capacity price sits strictly between 0 and 1
    costs = np.array([[1.0, 1.6], [1.1, 1.9]])
    inst = _handmade_instance(costs, cbar=[5.0, 5.0], n=[1, 3], q=[2])
    gm = solve_global_relaxation(inst)
    assert gm.counts[0] == 1 and 0 < gm.lam[0] < 1
    w, rho = extract_equilibrium(gm, inst)
    w_bad = w.copy()
    w_bad[0] += 1.0
    report = verify_equilibrium(gm.y, w_bad, rho, inst, tol=1e-7)
    assert not report.passed
    assert report.reward_above_dedicated > 1e-7 or report.complementarity > 1e-7


def test_verifier_flags_dropped_driver(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=14, num_drivers=6)
    gm = solve_global_relaxation(inst)
    w, rho = extract_equilibrium(gm, inst)
    y_bad = gm.y.copy()
    y_bad[2] = -1
    report = verify_equilibrium(y_bad, w, rho, inst, tol=1e-7)
    assert not report.passed
    assert report.conservation == 1.0


def test_report_lines_render():
    costs = np.array([[0.0, 9.0]])
    inst = _handmade_instance(costs, cbar=[5.0, 5.0], n=[1, 1], q=[1])
    gm = solve_global_relaxation(inst)
    w, rho = extract_equilibrium(gm, inst)
    lines = verify_equilibrium(gm.y, w, rho, inst).lines()
    assert any("overall" in line and "pass" in line for line in lines)


def test_aggregate_single_group():
    costs = np.array([[1.0], [2.0], [0.5]])
    inst = _handmade_instance(costs, cbar=[9.0], n=[6], q=[3])
    gm = solve_global_relaxation(inst)
    f_bar = aggregate_matching(gm.y, inst)
    assert np.array_equal(f_bar, [[3]])


def test_aggregate_totals_and_hand_count(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=15, num_od=2, num_task_pairs=2,
                           num_drivers=5)
    gm = solve_global_relaxation(inst)
    f_bar = aggregate_matching(gm.y, inst)
    assert int(f_bar.sum()) == 5
    by_hand = np.zeros((2, 2), dtype=np.int64)
    for a in range(5):
        by_hand[inst.driver_od[a], gm.y[a]] += 1
    assert np.array_equal(f_bar, by_hand)


def test_brute_force_guard(ring_ttm):
    inst = _micro_instance(ring_ttm, seed=16, num_drivers=9)
    with pytest.raises(ConfigurationError, match="refused"):
        brute_force_oracle(inst)


def test_brute_force_tiny_cases():
    one = _handmade_instance(np.array([[2.0]]), cbar=[9.0], n=[2], q=[1])
    surplus, optima = brute_force_oracle(one)
    assert surplus == pytest.approx(7.0)
    two = _handmade_instance(np.array([[1.0, 3.0], [2.0, 2.5]]),
                             cbar=[6.0, 6.0], n=[1, 3], q=[2])
    surplus, _ = brute_force_oracle(two)
    assert surplus == pytest.approx(max((6 - 1) + (6 - 2.5), (6 - 3) + (6 - 2)))

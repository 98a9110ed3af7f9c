"""Scaling solver, duals, value function, objective, and rounding."""
import itertools

import numpy as np
import pytest

from csdmatch import master
from csdmatch.errors import ConvergenceError, InfeasibleError, ValidationError

from oracles import fluid_partition_oracle, mc_group_value


def _random_problem(rng, W, T, tight=True):
    C = rng.uniform(0.0, 8.0, size=(W, T))
    cbar = rng.uniform(3.0, 12.0, size=T)
    q = rng.integers(3, 12, size=W).astype(np.float64)
    if tight:
        n = rng.integers(2, 6, size=T).astype(np.float64)
        need = q.sum() - n.sum()
        if need > 0:
            n[0] += need + 1
    else:
        n = np.full(T, 2.0 * q.sum())
    return C, cbar, q, n


# --- kernel ---------------------------------------------------------------

def test_kernel_all_ones_when_costs_cancel():
    C = np.array([[3.0, 4.0]])
    k = master.build_kernel(C, np.array([3.0, 4.0]), theta=2.5)
    assert np.array_equal(k.K, np.ones((1, 2)))


def test_kernel_direct_exponentiation():
    gain = np.array([[1.0, 0.0], [0.0, 1.0]])
    k = master.build_kernel(-gain, np.zeros(2), theta=1.0)
    assert np.allclose(k.K, np.exp(gain))


def test_kernel_log_flag_at_extreme_scale():
    C = np.array([[0.0, 20.0]])
    k = master.build_kernel(C, np.array([0.0, 0.0]), theta=50.0)
    assert k.use_log


def test_both_paths_agree_single_iteration():
    rng = np.random.default_rng(0)
    C, cbar, q, n = _random_problem(rng, 4, 5)
    k = master.build_kernel(C, cbar, theta=1.3)
    K = np.exp(k.log_K)
    Kq = K * q[:, None]
    u = np.ones(4)
    v = np.ones(5)
    u_m, v_m = np.empty(4), np.empty(5)
    master._iter_mult(K, np.ascontiguousarray(Kq), n, u, v, u_m, v_m)
    a, b = np.zeros(4), np.zeros(5)
    a_l, b_l = np.empty(4), np.empty(5)
    master._iter_log(np.ascontiguousarray(k.log_K), np.log(q), np.log(n),
                     a, b, a_l, b_l)
    assert np.allclose(u_m, np.exp(a_l), rtol=1e-9)
    assert np.allclose(v_m, np.exp(b_l), rtol=1e-9)


def test_both_paths_agree_at_fixed_point():
    rng = np.random.default_rng(1)
    C, cbar, q, n = _random_problem(rng, 3, 4)
    k = master.build_kernel(C, cbar, theta=2.0)
    r_mult = master.sinkhorn_solve(k, q, n, tol=1e-12, max_iter=100_000,
                                   force_log=False)
    r_log = master.sinkhorn_solve(k, q, n, tol=1e-12, max_iter=100_000,
                                  force_log=True)
    assert np.allclose(r_mult.f, r_log.f, rtol=1e-9)
    assert not r_mult.log_domain and r_log.log_domain


def test_log_path_survives_extreme_theta():
    C = np.array([[0.0, 15.0], [15.0, 0.0]])
    cbar = np.array([5.0, 5.0])
    k = master.build_kernel(C, cbar, theta=50.0)
    r = master.sinkhorn_solve(k, [4.0, 4.0], [6.0, 6.0])
    assert np.all(np.isfinite(r.f))
    assert r.log_domain


# --- solver ---------------------------------------------------------------

def test_single_cell_row_constraint():
    k = master.build_kernel(np.array([[2.0]]), np.array([9.0]), 1.0)
    r = master.sinkhorn_solve(k, [3.0], [5.0])
    assert r.f[0, 0] == pytest.approx(3.0, rel=1e-12)
    assert r.v[0] == 1.0


def test_two_symmetric_columns():
    k = master.build_kernel(np.array([[1.0, 1.0]]), np.array([1.0, 1.0]), 1.0)
    r = master.sinkhorn_solve(k, [2.0], [2.0, 2.0])
    assert np.allclose(r.f, [[1.0, 1.0]], rtol=1e-10)
    assert np.allclose(r.v, 1.0)


def test_slack_capacity_gives_logit_shares():
    gain = np.array([[4.0, 3.0], [3.0, 4.0]])
    k = master.build_kernel(-gain, np.zeros(2), 1.0)
    r = master.sinkhorn_solve(k, [10.0, 10.0], [15.0, 15.0])
    share = 1.0 / (1.0 + np.exp(-1.0))
    expected = np.array([[10 * share, 10 * (1 - share)],
                         [10 * (1 - share), 10 * share]])
    assert np.allclose(r.f, expected, atol=1e-3)
    assert np.allclose(r.v, 1.0)


def test_infeasible_totals():
    k = master.build_kernel(np.array([[1.0]]), np.array([2.0]), 1.0)
    with pytest.raises(InfeasibleError):
        master.sinkhorn_solve(k, [5.0], [3.0])


def test_iteration_cap_raises_with_residual():
    rng = np.random.default_rng(2)
    C, cbar, q, n = _random_problem(rng, 4, 4)
    k = master.build_kernel(C, cbar, theta=3.0)
    with pytest.raises(ConvergenceError) as exc:
        master.sinkhorn_solve(k, q, n, tol=1e-12, max_iter=3)
    assert exc.value.residual is not None
    assert exc.value.iterations == 3


def test_marginals_and_slackness_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(25):
        W = int(rng.integers(1, 6))
        T = int(rng.integers(1, 6))
        C, cbar, q, n = _random_problem(rng, W, T, tight=bool(rng.integers(2)))
        k = master.build_kernel(C, cbar, theta=float(rng.uniform(0.3, 3.0)))
        r = master.sinkhorn_solve(k, q, n)
        rows = r.f.sum(axis=1)
        cols = r.f.sum(axis=0)
        assert np.max(np.abs(rows - q) / q) < 1e-6
        assert np.all(cols <= n * (1 + 1e-6))
        assert np.all(r.f > 0)
        assert np.all((r.v > 0) & (r.v <= 1.0))
        # complementary slackness
        assert np.max(np.minimum(1.0 - r.v, n - cols)) <= 1e-4 * np.max(n)
        # residual diagnostics recorded every iteration, reaching tol
        assert r.residuals.shape[0] == r.iterations + r.polish_iterations
        assert r.residuals[r.iterations - 1] < 1e-5


def test_stationarity_exact_by_construction():
    rng = np.random.default_rng(4)
    C, cbar, q, n = _random_problem(rng, 3, 4)
    k = master.build_kernel(C, cbar, theta=1.0)
    r = master.sinkhorn_solve(k, q, n)
    rebuilt = (q * r.u)[:, None] * np.exp(k.log_K) * r.v[None, :]
    assert np.array_equal(rebuilt, r.f)


def test_objective_matches_convex_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        W = int(rng.integers(1, 4))
        T = int(rng.integers(1, 4))
        C, cbar, q, n = _random_problem(rng, W, T)
        theta = float(rng.uniform(0.5, 2.0))
        k = master.build_kernel(C, cbar, theta)
        r = master.sinkhorn_solve(k, q, n, tol=1e-9)
        ours = master.master_objective(r.f, C, cbar, theta, q)
        _, oracle_obj, _ = fluid_partition_oracle(C, cbar, theta, q, n)
        assert abs(ours - oracle_obj) / abs(oracle_obj) < 1e-6


def test_trace_csv(tmp_path):
    k = master.build_kernel(np.array([[1.0, 2.0]]), np.array([3.0, 3.0]), 1.0)
    r = master.sinkhorn_solve(k, [2.0], [3.0, 3.0])
    path = tmp_path / "trace.csv"
    master.write_trace_csv(r, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,residual,elapsed_s"
    assert len(lines) == 1 + len(r.trace)


# --- duals ----------------------------------------------------------------

def test_duals_slack_capacity():
    d = master.extract_duals(np.array([0.5]), np.array([1.0]), 2.0,
                             np.array([7.0]))
    assert d.lam[0] == 0.0
    assert d.w[0] == 7.0


def test_duals_direct_formula():
    d = master.extract_duals(np.array([1.0]), np.array([np.exp(-2.0)]), 1.0,
                             np.array([10.0]))
    assert d.lam[0] == pytest.approx(2.0, rel=1e-12)
    assert d.w[0] == pytest.approx(8.0, rel=1e-12)


def test_duals_reject_bad_scaling():
    with pytest.raises(ValidationError):
        master.extract_duals(np.array([1.0]), np.array([1.5]), 1.0,
                             np.array([1.0]))


def test_binding_duals_match_convex_oracle():
    rng = np.random.default_rng(6)
    C, cbar, q, n = _random_problem(rng, 3, 3)
    theta = 1.2
    k = master.build_kernel(C, cbar, theta)
    r = master.sinkhorn_solve(k, q, n, tol=1e-9)
    d = master.extract_duals(r.u, r.v, theta, cbar)
    _, _, lam_oracle = fluid_partition_oracle(C, cbar, theta, q, n)
    assert np.all(np.abs(d.lam - lam_oracle) < 1e-4)
    assert np.all(np.abs(d.w - (cbar - lam_oracle)) < 1e-4)


# --- value function and objective ------------------------------------------

def test_value_function_single_task():
    z = master.logit_value_function([5.0], [2.0], [8.0], 1.0, 5.0)
    assert z == pytest.approx(30.0, rel=1e-12)


def test_value_function_uniform_row():
    f = np.full(4, 2.5)
    C = np.array([1.0, 2.0, 3.0, 4.0])
    cbar = np.full(4, 5.0)
    z = master.logit_value_function(f, C, cbar, 2.0, 10.0)
    assert z == pytest.approx((f * (cbar - C)).sum() + 5.0 * np.log(4.0),
                              rel=1e-12)


def test_value_function_rejects_boundary():
    with pytest.raises(ValidationError):
        master.logit_value_function([1.0, 0.0], [1.0, 1.0], [2.0, 2.0], 1.0, 1.0)


def test_value_function_against_monte_carlo():
    rng = np.random.default_rng(77)
    C_row = rng.uniform(1.0, 8.0, size=5)
    cbar = C_row + rng.uniform(1.0, 6.0, size=5)
    q = 500
    shares = rng.dirichlet(np.full(5, 3.0))
    f_row = np.floor(shares * q).astype(np.int64)
    f_row[np.argmax(shares)] += q - f_row.sum()
    f_row = np.maximum(f_row, 1)
    f_row[np.argmax(f_row)] -= f_row.sum() - q
    z = master.logit_value_function(f_row.astype(float), C_row, cbar, 1.0, float(q))
    z_mc = mc_group_value(f_row, C_row, cbar, 1.0, q, rng, reps=50)
    assert abs(z - z_mc) / abs(z_mc) < 0.03


def test_objective_single_cell():
    obj = master.master_objective(np.array([[3.0]]), np.array([[2.0]]),
                                  np.array([7.0]), 2.0, np.array([3.0]))
    assert obj == pytest.approx(3 * (2 - 7) - 3 / 2, rel=1e-12)


def test_objective_minimal_under_feasible_perturbations():
    rng = np.random.default_rng(7)
    C, cbar, q, n = _random_problem(rng, 3, 4, tight=False)
    theta = 1.0
    k = master.build_kernel(C, cbar, theta)
    r = master.sinkhorn_solve(k, q, n, tol=1e-10)
    base = master.master_objective(r.f, C, cbar, theta, q)
    for _ in range(100):
        delta = np.zeros_like(r.f)
        w = int(rng.integers(0, 3))
        t1, t2 = rng.choice(4, size=2, replace=False)
        step = min(float(rng.uniform(0.0, 0.2)), 0.9 * r.f[w, t1])
        delta[w, t1] -= step
        delta[w, t2] += step
        f_pert = r.f + delta
        cols = f_pert.sum(axis=0)
        if np.any(cols > n) or np.any(f_pert <= 0):
            continue
        assert master.master_objective(f_pert, C, cbar, theta, q) >= base - 1e-9


def test_objective_equals_negated_value_sum_plus_constant():
    rng = np.random.default_rng(8)
    C, cbar, q, n = _random_problem(rng, 3, 4, tight=False)
    theta = 1.7
    f = rng.uniform(0.2, 1.0, size=(3, 4))
    f *= (q / f.sum(axis=1))[:, None]
    obj = master.master_objective(f, C, cbar, theta, q)
    zsum = sum(master.logit_value_function(f[w], C[w], cbar, theta, q[w])
               for w in range(3))
    assert obj + zsum == pytest.approx(-q.sum() / theta, rel=1e-9)


# --- rounding ---------------------------------------------------------------

def test_round_integer_fixed_point():
    f = np.array([[2.0, 3.0]])
    out = master.round_partition(f, np.array([5]), np.array([9, 9]),
                                 np.array([[1.0, 1.0]]), np.array([3.0, 3.0]), 1.0)
    assert np.array_equal(out, [[2, 3]])


def test_round_tie_break_lower_index():
    out = master.round_partition(np.array([[2.5, 2.5]]), np.array([5]),
                                 np.array([9, 9]), np.array([[1.0, 1.0]]),
                                 np.array([3.0, 3.0]), 1.0)
    assert np.array_equal(out, [[3, 2]])


def test_round_minimal_displacement_five_by_five():
    rng = np.random.default_rng(9)
    q = rng.integers(3, 9, size=5)
    f = rng.dirichlet(np.ones(5), size=5) * q[:, None]
    n = np.full(5, q.sum())  # no column pressure
    C = rng.uniform(0, 5, size=(5, 5))
    cbar = rng.uniform(5, 9, size=5)
    out = master.round_partition(f, q, n, C, cbar, 1.0)
    assert np.array_equal(out.sum(axis=1), q)
    got = np.abs(out - f).sum()
    # exhaustive largest-remainder completions, row by row
    for w in range(5):
        base = np.floor(f[w]).astype(np.int64)
        k = int(q[w] - base.sum())
        best = None
        for subset in itertools.combinations(range(5), k):
            cand = base.copy()
            for t in subset:
                cand[t] += 1
            disp = np.abs(cand - f[w]).sum()
            best = disp if best is None else min(best, disp)
        assert np.abs(out[w] - f[w]).sum() <= best + 1e-12
    assert np.linalg.norm((out - f).ravel(), np.inf) <= 5


def test_round_repairs_column_overflow():
    rng = np.random.default_rng(10)
    W, T = 6, 4
    q = np.full(W, 5)
    C = rng.uniform(0, 5, size=(W, T))
    cbar = rng.uniform(5, 9, size=T)
    # fractional mass piled onto column 0, cap barely above its share
    f = np.full((W, T), 0.25)
    f[:, 0] = 5 - 0.75
    n = np.array([24, 3, 3, 3])
    assert f[:, 0].sum() > n[0] - 1  # rounding will overflow some column
    out = master.round_partition(f, q, n, C, cbar, 1.0)
    assert np.array_equal(out.sum(axis=1), q)
    assert np.all(out.sum(axis=0) <= n)
    assert np.all(out >= 0)


def test_round_rejects_impossible_totals():
    with pytest.raises(InfeasibleError):
        master.round_partition(np.array([[2.0]]), np.array([2]), np.array([1]),
                               np.array([[0.0]]), np.array([1.0]), 1.0)

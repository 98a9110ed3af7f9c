"""The exact transportation kernel against enumeration oracles."""
import numpy as np
import pytest

from csdmatch._transport import SCALE, scale_costs, solve_transport
from csdmatch.errors import InfeasibleError, ValidationError

from oracles import enumerate_assignments


def _random_case(rng, max_drivers=7, max_cols=4):
    nd = int(rng.integers(1, max_drivers + 1))
    nt = int(rng.integers(1, max_cols + 1))
    savings = rng.normal(0.0, 20.0, size=(nd, nt))
    cap = rng.integers(0, 4, size=nt).astype(np.int64)
    if cap.sum() < nd:
        cap[int(rng.integers(0, nt))] += nd - int(cap.sum())
    return scale_costs(savings), cap


def test_matches_enumeration_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(150):
        savings, cap = _random_case(rng)
        sol = solve_transport(-savings, cap)
        best, optima = enumerate_assignments(savings, cap)
        assert -sol.objective_scaled == best
        assert tuple(sol.assign.tolist()) in optima


def test_dual_certificate_and_complementarity():
    rng = np.random.default_rng(43)
    for _ in range(150):
        savings, cap = _random_case(rng)
        sol = solve_transport(-savings, cap)
        lam = sol.column_prices()
        assert np.all(lam >= 0)
        # every driver sits on a column maximizing savings - price
        red = savings - lam[None, :]
        nd = savings.shape[0]
        chosen = red[np.arange(nd), sol.assign]
        assert np.all(chosen >= red.max(axis=1))
        # positive price only on saturated columns
        assert not np.any((lam > 0) & (sol.counts < cap))


def test_removal_improvements_match_from_scratch():
    rng = np.random.default_rng(44)
    for _ in range(100):
        nt = int(rng.integers(1, 4))
        cap = rng.integers(0, 4, size=nt).astype(np.int64)
        if cap.sum() == 0:
            cap[0] = 2
        nd = int(cap.sum())
        savings = scale_costs(rng.normal(0.0, 20.0, size=(nd, nt)))
        sol = solve_transport(-savings, cap)
        improvements = sol.removal_improvements()
        for x in range(nd):
            others = np.delete(np.arange(nd), x)
            best, _ = enumerate_assignments(savings[others], cap)
            repaired = (-sol.objective_scaled
                        - int(savings[x, sol.assign[x]]) + int(improvements[x]))
            assert repaired == best


def test_deterministic_assignment():
    rng = np.random.default_rng(45)
    savings, cap = _random_case(rng, max_drivers=6)
    a = solve_transport(-savings, cap)
    b = solve_transport(-savings, cap)
    assert np.array_equal(a.assign, b.assign)
    assert np.array_equal(a.pi, b.pi)


def test_infeasible_capacity():
    with pytest.raises(InfeasibleError):
        solve_transport(np.zeros((3, 2), dtype=np.int64),
                        np.array([1, 1], dtype=np.int64))


def test_scale_costs_guards():
    with pytest.raises(ValidationError):
        scale_costs(np.array([np.inf]))
    with pytest.raises(ValidationError):
        scale_costs(np.array([1e60]))
    assert scale_costs(np.array([1.25]))[0] == int(1.25 * SCALE)

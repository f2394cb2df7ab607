import dataclasses

import numpy as np
import pytest

from dso_auction import simplex as sx
from oracles import dual_bound, random_box_lp, vertex_enum_optimum

INF = np.inf


def solve(c, a, senses, b, lo, hi, warm=None):
    p = sx.make_problem(c, a, senses, b, lo, hi)
    return p, (sx.solve_lp_warm(p, warm) if warm is not None else sx.solve_lp(p))


def test_single_constraint_identity():
    _, r = solve([1.0], [[1.0]], ["<"], [5.0], [0.0], [INF])
    assert r.status == sx.OPTIMAL
    assert r.objective == pytest.approx(5.0, abs=1e-9)
    assert r.primal[0] == pytest.approx(5.0, abs=1e-9)
    assert r.duals[0] == pytest.approx(1.0, abs=1e-9)


def test_two_row_duals():
    # brute-force vertex oracle agrees: optimum (2, 2), duals (2, 1)
    c = [3.0, 2.0]
    a = [[1.0, 1.0], [1.0, 0.0]]
    b = [4.0, 2.0]
    obj, x = vertex_enum_optimum(c, a, ["<", "<"], b, [0.0, 0.0], [10.0, 10.0])
    assert obj == pytest.approx(10.0)
    _, r = solve(c, a, ["<", "<"], b, [0.0, 0.0], [INF, INF])
    assert r.status == sx.OPTIMAL
    assert r.objective == pytest.approx(10.0, abs=1e-9)
    np.testing.assert_allclose(r.primal, [2.0, 2.0], atol=1e-9)
    np.testing.assert_allclose(r.duals, [2.0, 1.0], atol=1e-9)


def test_empty_feasible_set():
    _, r = solve([1.0], [[1.0]], ["<"], [-1.0], [0.0], [INF])
    assert r.status == sx.INFEASIBLE


def test_unbounded():
    _, r = solve([1.0], [[1.0]], [">"], [0.0], [0.0], [INF])
    assert r.status == sx.UNBOUNDED


def test_equality_row_with_upper_bounds():
    _, r = solve([-2.0, -3.0], [[1.0, 1.0]], ["="], [4.0], [0.0, 0.0], [3.0, 3.0])
    assert r.status == sx.OPTIMAL
    assert r.objective == pytest.approx(-9.0, abs=1e-9)
    np.testing.assert_allclose(r.primal, [3.0, 1.0], atol=1e-9)


def test_warm_restart_is_fixed_point():
    p, r = solve([3.0, 2.0], [[1.0, 1.0], [1.0, 0.0]], ["<", "<"],
                 [4.0, 2.0], [0.0, 0.0], [INF, INF])
    r2 = sx.solve_lp_warm(p, r.basis)
    assert r2.status == sx.OPTIMAL
    assert r2.pivots == 0
    assert r2.objective == pytest.approx(r.objective, abs=1e-12)


def test_warm_child_never_better():
    rng = np.random.default_rng(7)
    for _ in range(25):
        c, a, senses, b, lo, hi = random_box_lp(rng)
        p = sx.make_problem(c, a, senses, b, lo, hi)
        r = sx.solve_lp(p)
        if r.status != sx.OPTIMAL:
            continue
        j = int(rng.integers(0, len(c)))
        mid = 0.5 * (lo[j] + hi[j])
        child_hi = hi.copy()
        child_hi[j] = mid
        child = dataclasses.replace(p, upper=child_hi)
        rc = sx.solve_lp_warm(child, r.basis)
        if rc.status == sx.OPTIMAL:
            assert rc.objective <= r.objective + 1e-7


def test_incompatible_basis_degrades_to_cold():
    p, r = solve([1.0, 1.0], [[1.0, 1.0]], ["<"], [3.0], [0.0, 0.0], [2.0, 2.0])
    bogus = sx.SimplexBasis(vstat=np.zeros(99, dtype=np.int8),
                            basic=np.zeros(1, dtype=np.int32))
    r2 = sx.solve_lp_warm(p, bogus)
    assert r2.status == sx.OPTIMAL
    assert r2.objective == pytest.approx(r.objective, abs=1e-12)


def test_crossing_bounds_rejected():
    with pytest.raises(sx.LpError):
        sx.make_problem([1.0], [[1.0]], ["<"], [1.0], [2.0], [1.0])


def test_fuzz_against_vertex_enumeration():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(80):
        c, a, senses, b, lo, hi = random_box_lp(rng)
        ref_obj, _ = vertex_enum_optimum(c, a, senses, b, lo, hi)
        p = sx.make_problem(c, a, senses, b, lo, hi)
        r = sx.solve_lp(p)
        assert ref_obj is not None, "generator guarantees feasibility"
        assert r.status == sx.OPTIMAL
        assert r.objective == pytest.approx(ref_obj, abs=1e-7 * (1 + abs(ref_obj)))
        checked += 1

        # strong duality and complementary slackness at the returned point
        ub = dual_bound(c, a, b, lo, hi, r.duals)
        assert abs(ub - r.objective) <= 1e-8 * (1.0 + abs(r.objective)) + 1e-9
        ax = np.asarray(a) @ r.primal
        for i, s in enumerate(senses):
            if s != "=":
                assert abs(r.duals[i] * (b[i] - ax[i])) <= 1e-6
            if s == "<":
                assert r.duals[i] >= -1e-7
            if s == ">":
                assert r.duals[i] <= 1e-7
        gap_lo = r.primal - lo
        gap_hi = hi - r.primal
        assert (np.abs(r.reduced_costs * np.minimum(gap_lo, gap_hi)) <= 1e-6).all()
    assert checked == 80


def test_fuzz_warm_equals_cold():
    rng = np.random.default_rng(3)
    for _ in range(40):
        c, a, senses, b, lo, hi = random_box_lp(rng)
        p = sx.make_problem(c, a, senses, b, lo, hi)
        r = sx.solve_lp(p)
        assert r.status == sx.OPTIMAL
        # second problem: same rows, shifted objective and tightened box
        c2 = c + rng.uniform(-1.0, 1.0, size=len(c))
        hi2 = hi - rng.uniform(0.0, 0.3, size=len(c))
        hi2 = np.maximum(hi2, lo)
        p2 = sx.make_problem(c2, a, senses, b, lo, hi2)
        warm = sx.solve_lp_warm(p2, r.basis)
        cold = sx.solve_lp(p2)
        assert warm.status == cold.status
        if cold.status == sx.OPTIMAL:
            assert warm.objective == pytest.approx(
                cold.objective, abs=1e-8 * (1 + abs(cold.objective)) + 1e-9)


def test_determinism():
    rng = np.random.default_rng(11)
    c, a, senses, b, lo, hi = random_box_lp(rng)
    p = sx.make_problem(c, a, senses, b, lo, hi)
    r1 = sx.solve_lp(p)
    r2 = sx.solve_lp(p)
    assert r1.status == r2.status
    assert r1.objective == r2.objective
    assert r1.pivots == r2.pivots
    np.testing.assert_array_equal(r1.primal, r2.primal)
    np.testing.assert_array_equal(r1.duals, r2.duals)


def test_degenerate_rows_terminate():
    # many redundant copies of the same binding row stress degeneracy handling
    n = 4
    a = [[1.0] * n] * 6 + [[1.0, 0.0, 0.0, 0.0]]
    senses = ["<"] * 6 + ["<"]
    b = [2.0] * 6 + [1.0]
    _, r = solve([1.0, 0.9, 0.8, 0.7], a, senses, b, [0.0] * n, [INF] * n)
    assert r.status == sx.OPTIMAL
    assert r.objective == pytest.approx(1.0 + 0.9 * 1.0, abs=1e-9)


def test_fixed_columns_and_free_columns():
    # x fixed at 2, y free: max -y^2 surrogate... keep linear: min y s.t. y >= x - 3
    c = [0.0, -1.0]
    a = [[1.0, -1.0]]
    _, r = solve(c, a, ["<"], [3.0], [2.0, -INF], [2.0, INF])
    assert r.status == sx.OPTIMAL
    assert r.primal[0] == pytest.approx(2.0)
    assert r.primal[1] == pytest.approx(-1.0, abs=1e-9)

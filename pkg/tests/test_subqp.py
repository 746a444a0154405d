import itertools
import math

import numpy as np
import pytest

from pipalab.errors import InteriorityError, SubproblemError
from pipalab.model import Point, counterexample_problem
from pipalab.subqp import (
    FREE, LOWER, build_direction_qp, counterexample_direction, qp_kkt_residual,
    solve_direction_qp, solve_qp, trust_radius,
)

START = Point([0.0], [1.0], [0.02])


def lp_by_vertices(g, A, b, lo, hi):
    """Optimal value of min g'd, A d = b, lo <= d <= hi by visiting every vertex."""
    n, k = g.size, b.size
    best = math.inf
    for fixed in itertools.combinations(range(n), n - k):
        free = [i for i in range(n) if i not in fixed]
        Af = A[:, free]
        if abs(np.linalg.det(Af)) < 1e-9:
            continue
        for sides in itertools.product((0, 1), repeat=len(fixed)):
            d = np.zeros(n)
            for i, s in zip(fixed, sides):
                d[i] = hi[i] if s else lo[i]
            d[free] = np.linalg.solve(Af, b - A[:, list(fixed)] @ d[list(fixed)])
            if np.all(d >= lo - 1e-9) and np.all(d <= hi + 1e-9):
                best = min(best, float(g @ d))
    return best


def test_trust_radius():
    assert trust_radius(START, 0.0, 1.0) == pytest.approx(0.02)
    assert trust_radius(START, 0.5, 2.0) == pytest.approx(1.04)
    with pytest.raises(ValueError):
        trust_radius(START, 0.0, 0.0)


def test_build_qp_structure():
    qp = build_direction_qp(counterexample_problem(), START, sigma=0.1, radius=0.02)
    assert qp.eq_matrix.tolist() == [[1.0, 1.0, 0.0], [0.0, 0.02, 1.0]]
    assert qp.eq_rhs == pytest.approx([0.0, -0.02 + 0.1 * 0.02])
    assert qp.d_lower[0] == pytest.approx(-math.sqrt(0.02))
    assert qp.tr_lower[0] and qp.tr_upper[0]
    assert np.isinf(qp.d_lower[1:]).all()


def test_x_bound_wins_when_tighter():
    qp = build_direction_qp(counterexample_problem(), Point([-0.95], [1.95], [0.5]), radius=1.0)
    assert qp.d_lower[0] == pytest.approx(-0.05)
    assert not qp.tr_lower[0]
    assert qp.tr_upper[0]


def test_interiority_required():
    with pytest.raises(InteriorityError):
        build_direction_qp(counterexample_problem(), Point([0.0], [1.0], [0.0]))


def test_first_direction_matches_closed_form():
    qp = build_direction_qp(counterexample_problem(), START, radius=0.02)
    got = solve_direction_qp(qp)
    ref = counterexample_direction(START, 0.1)
    s = math.sqrt(0.02)
    assert got.d == pytest.approx([-s, s, -0.018 - 0.02 * s], abs=1e-15)
    assert got.d == pytest.approx(ref.d, abs=1e-14)
    assert got.eq_multipliers == pytest.approx([-0.02, 1.0], abs=1e-14)
    assert got.bound_multipliers == pytest.approx([1.02, 0.0, 0.0], abs=1e-14)
    assert got.active.tolist() == [LOWER, FREE, FREE]
    assert got.tr_active.tolist() == [True]
    assert got.tr_multiplier == pytest.approx(1.02)
    assert qp_kkt_residual(qp, got) <= 1e-14


def test_closed_form_tracks_tiny_complementarity():
    p = Point([-0.19], [1.19], [1e-40])
    qp = build_direction_qp(counterexample_problem(), p, radius=p.comp)
    got = solve_direction_qp(qp)
    ref = counterexample_direction(p, 0.1)
    assert np.allclose(got.d, ref.d, rtol=1e-12, atol=0)


def test_warm_start_gives_same_solution():
    prob = counterexample_problem()
    qp = build_direction_qp(prob, START, radius=0.02)
    cold = solve_direction_qp(qp)
    warm = solve_direction_qp(qp, cold.working_set())
    assert np.allclose(cold.d, warm.d, atol=1e-15)
    # A wrong guess must still reach the optimum.
    wrong = solve_direction_qp(qp, {0: 1})
    assert np.allclose(cold.d, wrong.d, atol=1e-14)


def test_lp_against_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(60):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        A = rng.normal(size=(k, n))
        lo, hi = -rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n)
        b = A @ rng.uniform(lo, hi)
        g = rng.normal(size=n)
        d, lam, mu, active = solve_qp(np.zeros((n, n)), g, A, b, lo, hi)
        assert np.allclose(A @ d, b, atol=1e-10)
        assert np.all(d >= lo - 1e-10) and np.all(d <= hi + 1e-10)
        assert g @ d == pytest.approx(lp_by_vertices(g, A, b, lo, hi), abs=1e-9)
        assert np.all(mu >= 0)


def test_strictly_convex_qp_interior_solution():
    H = np.diag([2.0, 4.0])
    g = np.array([-2.0, -4.0])
    A = np.zeros((0, 2))
    d, lam, mu, active = solve_qp(H, g, A, np.zeros(0), [-10, -10], [10, 10])
    assert d == pytest.approx([1.0, 1.0])
    assert (active == FREE).all()


def test_qp_with_active_bound():
    # min (d0 - 3)^2 + d1^2, d0 + d1 = 1, d0 <= 1: solution (1, 0), bound multiplier 4.
    H = 2 * np.eye(2)
    g = np.array([-6.0, 0.0])
    d, lam, mu, active = solve_qp(H, g, np.array([[1.0, 1.0]]), np.array([1.0]),
                                  [-5.0, -5.0], [1.0, 5.0])
    assert d == pytest.approx([1.0, 0.0])
    assert lam == pytest.approx([0.0], abs=1e-14)
    assert mu[0] == pytest.approx(4.0)


def test_inconsistent_bounds():
    with pytest.raises(SubproblemError):
        solve_qp(np.eye(1), [0.0], np.zeros((0, 1)), np.zeros(0), [1.0], [0.0])


def test_infeasible_qp():
    with pytest.raises(SubproblemError):
        solve_qp(np.zeros((1, 1)), [1.0], np.array([[1.0]]), np.array([5.0]), [-1.0], [1.0])


def test_small_q_perturbation():
    prob = counterexample_problem()
    base = solve_direction_qp(build_direction_qp(prob, START, radius=0.02))
    pert = solve_direction_qp(build_direction_qp(prob, START, Q=1e-3 * np.eye(1), radius=0.02))
    assert np.max(np.abs(base.d - pert.d)) <= 1e-2
    assert base.active.tolist() == pert.active.tolist()

"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section of the
pytest terminal summary.
"""

import math
import time

import numpy as np

from pipalab.analysis import (
    check_assumptions, compare_to_table1, limit_bound_constants, stationarity_residual,
    verify_lemma_bounds,
)
from pipalab.model import PROBLEMS, Point, check_derivatives, counterexample_problem, get_problem, random_interior_point
from pipalab.pipa import PipaConfig, PenaltyExponentError, penalty_exponent_update, pipa_solve
from pipalab.subqp import build_direction_qp, counterexample_direction, solve_direction_qp, trust_radius
from pipalab.trpipa import TrConfig, trpipa_solve

START = Point([0.0], [1.0], [0.02])
PROB = counterexample_problem()
REFERENCE = dict(c=1.0, sigma=0.1, gamma=0.01, rho=0.9, alpha=2.0, eps_frac=1e-3)


def test_criterion_1_table_reproduction(criterion):
    t0 = time.perf_counter()
    result = pipa_solve(PROB, PipaConfig(eps_term=1e-5, **REFERENCE), START)
    elapsed = time.perf_counter() - t0
    cmp = compare_to_table1(result.trace)
    ok = (len(result.trace) == 10 and cmp.max_rel_dev <= 1e-6 and cmp.reductions_match
          and elapsed < 1.0)
    criterion(1, ok, f"{len(result.trace)} rows, max rel dev {cmp.max_rel_dev:.3e} at row "
                     f"{cmp.worst[0]} ({cmp.worst[1]}), reductions match: {cmp.reductions_match}, "
                     f"{elapsed:.3f} s")
    assert ok


def test_criterion_2_lemma_bounds(criterion):
    trace = pipa_solve(PROB, PipaConfig(max_iter=50, eps_term=0.0, **REFERENCE), START).trace
    report = verify_lemma_bounds(trace)
    taus = [r.tau for r in trace[1:]]
    halving = all(b.comp <= 0.5 * a.comp for a, b in zip(trace, trace[1:]))
    ok = (len(trace) == 51 and report.passed and halving
          and all(5 / 9 <= t <= 1 for t in taus))
    criterion(2, ok, f"{len(trace) - 1} steps, failures {len(report.failures)}, "
                     f"tau in [{min(taus):.6f}, {max(taus):.6f}], y'w halves: {halving}")
    assert ok


def test_criterion_3_limit_bounds(criterion):
    final = pipa_solve(PROB, PipaConfig(max_iter=50, eps_term=0.0, **REFERENCE), START).final
    x_lo, y_hi = limit_bound_constants()
    x, y, w = final.x[0], final.y[0], final.w[0]
    ok = x_lo <= x <= 0.0 and 1.0 <= y <= y_hi and w < 1e-14
    criterion(3, ok, f"x={x:.10f}, y={y:.10f}, w={w:.3e}")
    assert ok


def test_criterion_4_nonstationarity(criterion):
    trace = pipa_solve(PROB, PipaConfig(max_iter=30, eps_term=0.0, **REFERENCE), START).trace
    p = trace[30].point
    res = stationarity_residual(PROB, p).residual
    sc, ns, smin = check_assumptions(PROB, p, 0.5)
    ok = res >= 0.9 and sc and ns
    criterion(4, ok, f"residual {res:.6f}, SC {sc}, NS {ns} (min singular value {smin:.4f})")
    assert ok


def test_criterion_5_remedy(criterion):
    result = trpipa_solve(PROB, TrConfig(), START)
    p = result.final
    steps = len(result.trace) - 1
    res = stationarity_residual(PROB, p).residual
    ok = (steps <= 500 and abs(p.x[0] + 1) <= 1e-3 and abs(p.y[0] - 2) <= 1e-3
          and p.comp <= 1e-8 and res <= 1e-3)
    criterion(5, ok, f"{result.status} after {steps} accepted steps at x={p.x[0]:.3e}, "
                     f"y={p.y[0]:.6f}, y'w={p.comp:.3e}, residual {res:.3e}")
    assert ok


def test_criterion_6_subproblem_oracle(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        y = rng.uniform(1.0, 1.5)
        w = rng.uniform(0.0, 0.02) or 0.02
        p = Point([1.0 - y], [y], [w])
        qp = build_direction_qp(PROB, p, sigma=0.1, radius=trust_radius(p, 0.0, 1.0))
        assert qp.tr_lower[0]
        got = solve_direction_qp(qp)
        ref = counterexample_direction(p, 0.1)
        assert got.active.tolist() == ref.active.tolist()
        worst = max(worst, float(np.max(np.abs(got.d - ref.d))),
                    float(np.max(np.abs(got.eq_multipliers - ref.eq_multipliers))),
                    float(np.max(np.abs(got.bound_multipliers - ref.bound_multipliers))))
    ok = worst <= 1e-10
    criterion(6, ok, f"100 points, worst abs difference {worst:.3e}")
    assert ok


def scan_oracle(g, comp, F, alpha, sigma, p_max):
    for p in range(1, p_max + 1):
        a = alpha ** p * (1 - sigma) * (F + comp)
        if g - a < -a and -a < -(F + comp):
            return p
    return None


def test_criterion_7_penalty_exponent(criterion):
    trace = pipa_solve(PROB, PipaConfig(max_iter=50, eps_term=0.0, **REFERENCE), START).trace
    never_raised = all(r.p_exp == 1 for r in trace[1:])
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(1000):
        g = rng.uniform(-5, 1)
        comp, F = rng.uniform(1e-8, 2), rng.choice([0.0, rng.uniform(0, 2)])
        alpha, sigma = rng.uniform(1.01, 4), rng.uniform(0.01, 0.99)
        expected = scan_oracle(g, comp, F, alpha, sigma, 50)
        try:
            got = penalty_exponent_update(g, comp, F, alpha, sigma, 50)
        except PenaltyExponentError:
            got = None
        agree += got == expected
    ok = never_raised and agree == 1000
    criterion(7, ok, f"p = 1 at all {len(trace) - 1} steps: {never_raised}, oracle agreement {agree}/1000")
    assert ok


def test_criterion_8_q_perturbation(criterion):
    radius = trust_radius(START, 0.0, 1.0)
    base = solve_direction_qp(build_direction_qp(PROB, START, sigma=0.1, radius=radius))
    pert = solve_direction_qp(build_direction_qp(PROB, START, Q=1e-3 * np.eye(1), sigma=0.1,
                                                 radius=radius))
    diff = float(np.max(np.abs(base.d - pert.d)))
    same = base.active.tolist() == pert.active.tolist()
    ok = diff <= 1e-2 and same
    criterion(8, ok, f"max direction change {diff:.3e}, same active set: {same}")
    assert ok


def test_criterion_9_derivatives(criterion):
    rng = np.random.default_rng(9)
    worst = {}
    for name in PROBLEMS:
        prob = get_problem(name)
        worst[name] = max(check_derivatives(prob, random_interior_point(prob, rng)) for _ in range(10))
    ok = all(v <= 1e-6 for v in worst.values())
    criterion(9, ok, ", ".join(f"{k}: {v:.2e}" for k, v in worst.items()))
    assert ok

"""Direction-finding subproblem.

At an interior iterate the step ``d = (d_x, d_y, d_w, d_z)`` solves::

    min  grad_f' d + 1/2 d_x' Q d_x
    s.t. F + J d = 0
         Y d_w + W d_y = -Y w + sigma (y'w / m) e
         x_lower - x <= d_x <= x_upper - x
         |d_x,i| <= half_width

The trust region is imposed componentwise so the subproblem stays a QP.
It is solved by a primal active-set method on box bounds plus equalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import InteriorityError, SingularMatrixError, SubproblemError
from .model import MpccProblem, Point, eval_all

LOWER, FREE, UPPER = -1, 0, 1


@dataclass(frozen=True)
class QpSubproblem:
    quadratic: np.ndarray
    linear_cost: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    d_lower: np.ndarray
    d_upper: np.ndarray
    n_x: int
    m: int
    n_z: int
    # Which x-block bounds are trust-region bounds rather than bounds of X.
    tr_lower: np.ndarray
    tr_upper: np.ndarray

    @property
    def n(self) -> int:
        return self.linear_cost.size

    def hessian(self) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        H[:self.n_x, :self.n_x] = self.quadratic
        return H


@dataclass(frozen=True)
class Direction:
    d_x: np.ndarray
    d_y: np.ndarray
    d_w: np.ndarray
    d_z: np.ndarray
    eq_multipliers: np.ndarray
    # One entry per variable; zero unless the bound is active. Nonnegative.
    bound_multipliers: np.ndarray
    active: np.ndarray
    tr_active: np.ndarray
    tr_multiplier: float

    @property
    def d(self) -> np.ndarray:
        return np.concatenate([self.d_x, self.d_y, self.d_w, self.d_z])

    def working_set(self) -> dict[int, int]:
        return {int(i): int(s) for i, s in enumerate(self.active) if s != FREE}


def trust_radius(p: Point, F_norm: float, c: float) -> float:
    """Feasibility-tied radius ``c (||F|| + y'w)``; the box half-width is its root."""
    if c <= 0:
        raise ValueError("c must be positive")
    return c * (F_norm + p.comp)


def build_direction_qp(problem: MpccProblem, p: Point, Q=None, sigma: float = 0.1,
                       radius: float = 0.0, half_width: float | None = None) -> QpSubproblem:
    """Assemble the direction-finding QP at ``p``.

    ``radius`` is the squared-norm radius of the feasibility-tied rule and
    gives the half-width ``sqrt(radius)``. Passing ``half_width`` sets the
    x-box directly, as the adaptive trust-region driver does.
    """
    if np.any(p.y <= 0) or np.any(p.w <= 0):
        raise InteriorityError("y and w must be strictly positive")
    if half_width is None:
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        half_width = math.sqrt(radius)
    _, g, F, J = eval_all(problem, p)
    n_x, m, n_z = problem.n_x, problem.m, problem.n_z
    n = problem.n

    comp_rows = np.zeros((m, n))
    idx = np.arange(m)
    comp_rows[idx, n_x + idx] = p.w
    comp_rows[idx, n_x + m + idx] = p.y
    comp_rhs = -p.y * p.w + sigma * p.comp / m

    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    x_lo = problem.x_lower - p.x
    x_hi = problem.x_upper - p.x
    tr_lower = -half_width >= x_lo
    tr_upper = half_width <= x_hi
    lo[:n_x] = np.where(tr_lower, -half_width, x_lo)
    hi[:n_x] = np.where(tr_upper, half_width, x_hi)

    Q = np.zeros((n_x, n_x)) if Q is None else np.asarray(Q, dtype=float)
    return QpSubproblem(
        quadratic=Q, linear_cost=g,
        eq_matrix=np.vstack([J, comp_rows]), eq_rhs=np.concatenate([-F, comp_rhs]),
        d_lower=lo, d_upper=hi, n_x=n_x, m=m, n_z=n_z,
        tr_lower=tr_lower, tr_upper=tr_upper,
    )


def _independent(A: np.ndarray, working: dict[int, int], i: int) -> bool:
    rows = [A] + [np.eye(A.shape[1])[[j]] for j in list(working) + [i]]
    M = np.vstack(rows)
    return np.linalg.matrix_rank(M) == M.shape[0]


def _initial_working_set(A, d, lo, hi, fixed, seed=()) -> dict[int, int]:
    working: dict[int, int] = {}
    for i in list(fixed) + list(seed) + list(range(d.size)):
        if i in working:
            continue
        if d[i] == lo[i]:
            side = LOWER
        elif d[i] == hi[i]:
            side = UPPER
        else:
            continue
        if _independent(A, working, i):
            working[i] = side
    return working


def _multipliers(A, grad, working):
    """Least-squares ``(lam, nu)`` with ``grad = A' lam + sum nu_i e_i`` over the working set."""
    idx = sorted(working)
    C = np.hstack([A.T, np.eye(A.shape[1])[:, idx]])
    u = np.linalg.lstsq(C, grad, rcond=None)[0]
    lam = u[:A.shape[0]]
    # mu >= 0 is the conventional multiplier: grad_i = mu_i at a lower bound, -mu_i at an upper.
    mu = {i: -working[i] * nu for i, nu in zip(idx, u[A.shape[0]:])}
    return lam, mu


def _primal_active_set(H, g, A, b, lo, hi, d, working, fixed, max_iter):
    """Minimize ``1/2 d'Hd + g'd`` over ``Ad = b, lo <= d <= hi`` from a feasible ``d``."""
    n = d.size
    d = d.copy()
    at_eqp_min = False
    for _ in range(max_iter):
        grad = H @ d + g
        gscale = max(1.0, numerics.norm(grad, "inf"))
        p = np.zeros(n)
        ray = False
        if not at_eqp_min:
            free = [i for i in range(n) if i not in working]
            Z = numerics.null_space(A[:, free]) if free else np.zeros((0, 0))
            if free and Z.shape[1]:
                gz = Z.T @ grad[free]
                if numerics.norm(gz, "inf") > 1e-11 * gscale:
                    Hz = Z.T @ H[np.ix_(free, free)] @ Z
                    evals, V = np.linalg.eigh(Hz)
                    pos = evals > 1e-10 * max(1.0, float(np.max(np.abs(evals))))
                    V0 = V[:, ~pos]
                    g0 = V0 @ (V0.T @ gz)
                    if numerics.norm(g0, "inf") > 1e-11 * gscale:
                        pz = -g0
                        ray = True
                    else:
                        Vp = V[:, pos]
                        pz = -Vp @ ((Vp.T @ gz) / evals[pos])
                    p[free] = Z @ pz

        if not np.any(p):
            lam, mu = _multipliers(A, grad, working)
            tol = 1e-10 * gscale
            candidates = [(v, i) for i, v in mu.items() if v < -tol and i not in fixed]
            if not candidates:
                return d, working
            _, drop = min(candidates)
            del working[drop]
            at_eqp_min = False
            continue

        step = math.inf if ray else 1.0
        block = None
        for i in range(n):
            if i in working or p[i] == 0.0:
                continue
            if p[i] < 0 and np.isfinite(lo[i]):
                t, side = (lo[i] - d[i]) / p[i], LOWER
            elif p[i] > 0 and np.isfinite(hi[i]):
                t, side = (hi[i] - d[i]) / p[i], UPPER
            else:
                continue
            t = max(t, 0.0)
            if t < step:
                step, block = t, (i, side)
        if math.isinf(step):
            raise SubproblemError("direction-finding problem is unbounded below")
        d += step * p
        if block is None:
            at_eqp_min = True
        else:
            i, side = block
            d[i] = lo[i] if side == LOWER else hi[i]
            working[i] = side
            at_eqp_min = False
    raise SubproblemError(f"active-set iteration limit ({max_iter}) reached")


def _warm_point(A, b, lo, hi, working):
    """Fix the working-set bounds and solve the equalities for the rest, if that is feasible."""
    n = lo.size
    d = np.zeros(n)
    for i, side in working.items():
        bound = lo[i] if side == LOWER else hi[i]
        if not np.isfinite(bound):
            return None
        d[i] = bound
    free = [i for i in range(n) if i not in working]
    rhs = b - A @ d
    Af = A[:, free]
    try:
        if Af.shape[0] == Af.shape[1]:
            d[free] = numerics.solve_linear(Af, rhs)
        else:
            d[free] = np.linalg.lstsq(Af, rhs, rcond=None)[0]
    except SingularMatrixError:
        return None
    scale = numerics.norm(b, "inf") + numerics.norm(np.abs(A) @ np.abs(d), "inf")
    if numerics.norm(A @ d - b, "inf") > 1e-12 * scale:
        return None
    slack = 1e-14 * np.maximum(np.abs(d), 1e-300)
    if np.any(d < lo - slack) or np.any(d > hi + slack):
        return None
    return np.clip(d, lo, hi)


def _phase_one(A, b, lo, hi, fixed, max_iter):
    n = lo.size
    d0 = np.clip(np.zeros(n), lo, hi)
    r = b - A @ d0
    sgn = np.where(r >= 0, 1.0, -1.0)
    k = b.size
    A1 = np.hstack([A, np.diag(sgn)])
    lo1 = np.concatenate([lo, np.zeros(k)])
    hi1 = np.concatenate([hi, np.full(k, np.inf)])
    g1 = np.concatenate([np.zeros(n), np.ones(k)])
    x1 = np.concatenate([d0, np.abs(r)])
    working = _initial_working_set(A1, x1, lo1, hi1, fixed)
    x1, _ = _primal_active_set(np.zeros((n + k, n + k)), g1, A1, b, lo1, hi1, x1, working,
                               set(fixed), max_iter)
    scale = numerics.norm(b, "inf") + numerics.norm(np.abs(A) @ np.abs(x1[:n]), "inf")
    if np.sum(x1[n:]) > 1e-8 * scale:
        raise SubproblemError("direction-finding problem is infeasible")
    return x1[:n]


def solve_qp(H, g, A, b, lo, hi, warm: dict[int, int] | None = None):
    """Solve a convex QP with equality rows and box bounds.

    Returns ``(d, lam, mu, active)`` where ``H d + g = A' lam + sum_i s_i mu_i e_i``
    with ``s_i = +1`` on active lower bounds and ``-1`` on active upper bounds.
    """
    H, g, A, b = (np.asarray(v, dtype=float) for v in (H, g, A, b))
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    n = g.size
    if np.any(lo > hi):
        raise SubproblemError("inconsistent bounds")
    fixed = [i for i in range(n) if lo[i] == hi[i]]
    max_iter = 100 * n

    d = None
    if warm:
        seed = {i: s for i, s in warm.items() if i < n}
        for i in fixed:
            seed[i] = LOWER
        d = _warm_point(A, b, lo, hi, seed)
    if d is None:
        d = _phase_one(A, b, lo, hi, fixed, max_iter)
        seed = {}
    working = _initial_working_set(A, d, lo, hi, fixed, seed=sorted(seed))
    d, working = _primal_active_set(H, g, A, b, lo, hi, d, working, set(fixed), max_iter)

    # Re-solve the final equality-constrained problem by LU for full relative accuracy.
    free = [i for i in range(n) if i not in working]
    W = sorted(working)
    k = b.size
    if free:
        Hff = H[np.ix_(free, free)]
        Af = A[:, free]
        K = np.block([[Hff, -Af.T], [Af, np.zeros((k, k))]])
        rhs = np.concatenate([-(g[free] + H[np.ix_(free, W)] @ d[W]), b - A[:, W] @ d[W]])
        try:
            sol = numerics.solve_linear(K, rhs)
            d[free] = sol[:len(free)]
        except SingularMatrixError:
            pass
    lam, mu_w = _multipliers(A, H @ d + g, working)
    mu = np.zeros(n)
    active = np.zeros(n, dtype=int)
    for i, side in working.items():
        if i in fixed and mu_w[i] < 0:
            side, mu_w[i] = -side, -mu_w[i]
        active[i] = side
        mu[i] = max(mu_w[i], 0.0)
    return d, lam, mu, active


def solve_direction_qp(qp: QpSubproblem, warm: dict[int, int] | None = None) -> Direction:
    """Solve the direction-finding QP, optionally warm-started from a working set."""
    d, lam, mu, active = solve_qp(qp.hessian(), qp.linear_cost, qp.eq_matrix, qp.eq_rhs,
                                  qp.d_lower, qp.d_upper, warm=warm)
    n_x, m = qp.n_x, qp.m
    ax = active[:n_x]
    tr_active = ((ax == LOWER) & qp.tr_lower) | ((ax == UPPER) & qp.tr_upper)
    tr_mult = float(np.max(mu[:n_x][tr_active])) if np.any(tr_active) else 0.0
    return Direction(
        d_x=d[:n_x], d_y=d[n_x:n_x + m], d_w=d[n_x + m:n_x + 2 * m], d_z=d[n_x + 2 * m:],
        eq_multipliers=lam, bound_multipliers=mu, active=active,
        tr_active=tr_active, tr_multiplier=tr_mult,
    )


def qp_kkt_residual(qp: QpSubproblem, direction: Direction) -> float:
    """Largest violation of the QP optimality conditions at ``direction``."""
    d = direction.d
    H = qp.hessian()
    A = qp.eq_matrix
    signed = np.where(direction.active == UPPER, -1.0, 1.0) * direction.bound_multipliers
    stat = H @ d + qp.linear_cost - A.T @ direction.eq_multipliers - signed
    primal = A @ d - qp.eq_rhs
    lo_viol = np.maximum(qp.d_lower - d, 0.0)
    hi_viol = np.maximum(d - qp.d_upper, 0.0)
    gap = np.where(direction.active == LOWER, d - qp.d_lower,
                   np.where(direction.active == UPPER, qp.d_upper - d, 0.0))
    inactive_mu = np.where(direction.active == FREE, direction.bound_multipliers, 0.0)
    parts = [stat, primal, lo_viol, hi_viol, gap * direction.bound_multipliers,
             np.minimum(direction.bound_multipliers, 0.0), inactive_mu]
    return max(numerics.norm(v, "inf") for v in parts)


def counterexample_direction(p: Point, sigma: float) -> Direction:
    """Closed-form step and multipliers of the counterexample subproblem.

    Valid while the trust-region lower bound on ``d_x`` is the active constraint.
    """
    y, w = float(p.y[0]), float(p.w[0])
    s = math.sqrt(y * w)
    lam3 = 1.0 + w / y
    return Direction(
        d_x=np.array([-s]), d_y=np.array([s]),
        d_w=np.array([-(1.0 - sigma) * w - (w / y) * s]), d_z=np.zeros(0),
        eq_multipliers=np.array([-w / y, 1.0 / y]),
        bound_multipliers=np.array([lam3, 0.0, 0.0]),
        active=np.array([LOWER, FREE, FREE]),
        tr_active=np.array([True]), tr_multiplier=lam3,
    )

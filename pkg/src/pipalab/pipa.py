"""Penalty interior-point algorithm (PIPA).

Each iteration solves the direction-finding QP, picks a step length in two
stages (a centrality root keeping ``(y, w)`` positive and near the central
path, then an Armijo search on the penalty function), and moves to
``point + tau * d``. The x-block trust region has half-width
``sqrt(c (||F|| + y'w))``, so it shrinks as the iterates become feasible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import InteriorityError, LineSearchError, PenaltyExponentError, PipaError
from .model import MpccProblem, Point, eval_all
from .subqp import Direction, build_direction_qp, solve_direction_qp, trust_radius

log = logging.getLogger(__name__)

CONVERGED = "converged_small_step"
MAX_ITER = "max_iter"
ERROR = "error"

ARMIJO_TRIALS = 50


@dataclass(frozen=True)
class PipaConfig:
    c: float = 1.0
    sigma: float = 0.1
    gamma: float = 0.01
    rho: float = 0.9
    alpha: float = 2.0
    eps_frac: float = 1e-3
    eps_term: float = 1e-5
    backtrack: float = 0.5
    max_iter: int = 100
    p_max: int = 50
    # ||F|| at or below this counts as zero in the radius and the penalty test.
    feas_tol: float = 1e-14

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        for name in ("sigma", "gamma", "rho", "eps_frac", "backtrack"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.eps_term < 0 or self.feas_tol < 0:
            raise ValueError("eps_term and feas_tol must be nonnegative")
        if self.max_iter < 0 or self.p_max < 1:
            raise ValueError("max_iter must be >= 0 and p_max >= 1")


@dataclass(frozen=True)
class TraceRecord:
    """One accepted iterate.

    Step quantities (``tau``, ``d_norm``, ``ared``, ``pred``, ``delta``,
    ``p_exp``) describe the step that produced this iterate, so they are NaN
    (and ``p_exp`` is 0) on the starting point. ``ared`` is the signed change
    ``P(new) - P(old)``; ``pred`` is the model value
    ``grad_f'd - alpha^p (1 - sigma)(||F|| + y'w)``.
    """

    k: int
    point: Point
    tau: float
    d_norm: float
    ared: float
    pred: float
    comp: float
    F_norm: float
    delta: float
    p_exp: int


@dataclass
class SolveResult:
    status: str
    trace: list[TraceRecord] = field(default_factory=list)
    error: Exception | None = None

    def __iter__(self):
        return iter((self.status, self.trace))

    @property
    def final(self) -> Point:
        return self.trace[-1].point


def penalty_value(problem: MpccProblem, p: Point, alpha_eff: float) -> float:
    """``f + alpha_eff (||F||^2 + y'w)``."""
    f, _, F, _ = eval_all(problem, p)
    return f + alpha_eff * (float(F @ F) + p.comp)


def centrality_root(p: Point, d: Direction, sigma: float, rho: float) -> float | None:
    """Positive root of the linear centrality function, or None if there is none."""
    m = p.y.size
    prods = d.d_y * d.d_w
    slope = float(np.min(prods)) - rho * float(d.d_y @ d.d_w) / m
    if slope >= 0:
        return None
    return -(1.0 - rho) * sigma * (p.comp / m) / slope


def penalty_exponent_update(grad_dot_d: float, comp: float, F_norm: float, alpha: float,
                            sigma: float, p_max: int) -> int:
    """Smallest integer ``p >= 1`` giving sufficient model decrease."""
    infeas = F_norm + comp
    for p in range(1, p_max + 1):
        a = alpha ** p * (1.0 - sigma) * infeas
        if grad_dot_d - a < -a < -infeas:
            return p
    raise PenaltyExponentError(
        f"no penalty exponent <= {p_max} gives model decrease (grad'd = {grad_dot_d:.3e})")


def armijo_search(problem: MpccProblem, p: Point, d: Direction, tau0: float, alpha_eff: float,
                  gamma: float, backtrack: float, pred: float) -> float:
    """Backtrack from ``tau0`` until ``P(p + tau d) - P(p) <= gamma tau pred``.

    Trial points that leave ``y, w > 0`` are rejected. When the required
    decrease at ``tau0`` is already below the rounding level of ``P`` the
    test cannot discriminate, and ``tau0`` is taken if ``P`` does not rise
    beyond that level.
    """
    if not 0.0 < tau0 <= 1.0:
        raise ValueError(f"tau0 must lie in (0, 1], got {tau0}")
    if not pred < 0:
        raise ValueError("pred must be negative")
    P0 = penalty_value(problem, p, alpha_eff)
    noise = 10.0 * np.finfo(float).eps * abs(P0)
    unresolvable = gamma * tau0 * abs(pred) <= noise
    dvec = d.d
    tau = tau0
    for _ in range(ARMIJO_TRIALS):
        trial = p.step(dvec, tau)
        if np.all(trial.y > 0) and np.all(trial.w > 0):
            change = penalty_value(problem, trial, alpha_eff) - P0
            if change <= gamma * tau * pred or (unresolvable and change <= noise):
                return tau
        tau *= backtrack
    raise LineSearchError(f"no sufficient decrease after {ARMIJO_TRIALS} trials from tau0={tau0}")


class FeasibilityRadius:
    """The original rule: the radius follows the current infeasibility."""

    def __init__(self, c: float):
        self.c = c

    def half_width(self, p: Point, F_norm: float) -> tuple[float, float]:
        delta = trust_radius(p, F_norm, self.c)
        return math.sqrt(delta), delta

    def update(self, ared: float, pred: float) -> bool:
        return True


def _check_start(problem: MpccProblem, start: Point) -> None:
    problem.check_point(start)
    if np.any(start.y <= 0) or np.any(start.w <= 0):
        raise InteriorityError("starting point must have y, w > 0")
    if np.any(start.x < problem.x_lower) or np.any(start.x > problem.x_upper):
        raise ValueError("starting x lies outside its bounds")


def run_driver(problem: MpccProblem, cfg: PipaConfig, start: Point, policy, Q=None) -> SolveResult:
    """Iteration loop shared by the feasibility-tied and adaptive radius rules."""
    _check_start(problem, start)
    if cfg.alpha * (1.0 - cfg.sigma) > 1.0:
        log.info("alpha (1 - sigma) = %.4g > 1: the first penalty exponent suffices whenever "
                 "grad'd < 0", cfg.alpha * (1.0 - cfg.sigma))
    point = start
    _, _, F, _ = eval_all(problem, point)
    nan = math.nan
    trace = [TraceRecord(1, point, nan, nan, nan, nan, point.comp, numerics.norm(F), nan, 0)]
    warm = None
    steps = 0
    try:
        while True:
            if steps >= cfg.max_iter:
                return SolveResult(MAX_ITER, trace)
            _, g, F, _ = eval_all(problem, point)
            F_norm = numerics.norm(F)
            if F_norm <= cfg.feas_tol:
                F_norm = 0.0
            hw, delta = policy.half_width(point, F_norm)
            qp = build_direction_qp(problem, point, Q, cfg.sigma, half_width=hw)
            direction = solve_direction_qp(qp, warm)
            warm = direction.working_set()
            d = direction.d
            d_norm = numerics.norm(d)
            if d_norm <= cfg.eps_term:
                return SolveResult(CONVERGED, trace)

            comp = point.comp
            grad_dot_d = float(g @ d)
            p_exp = penalty_exponent_update(grad_dot_d, comp, F_norm, cfg.alpha, cfg.sigma, cfg.p_max)
            alpha_eff = cfg.alpha ** p_exp
            pred = grad_dot_d - alpha_eff * (1.0 - cfg.sigma) * (F_norm + comp)

            root = centrality_root(point, direction, cfg.sigma, cfg.rho)
            tau0 = root if root is not None and root <= 1.0 else 1.0 - cfg.eps_frac
            tau = armijo_search(problem, point, direction, tau0, alpha_eff, cfg.gamma,
                                cfg.backtrack, pred)
            new = point.step(d, tau)
            ared = penalty_value(problem, new, alpha_eff) - penalty_value(problem, point, alpha_eff)
            steps += 1
            if not policy.update(ared, pred):
                log.debug("step %d rejected by the radius rule", steps)
                continue
            point = new
            _, _, F_new, _ = eval_all(problem, point)
            trace.append(TraceRecord(len(trace) + 1, point, tau, d_norm, ared, pred, point.comp,
                                     numerics.norm(F_new), delta, p_exp))
    except PipaError as exc:
        log.warning("solve stopped after %d steps: %s", steps, exc)
        return SolveResult(ERROR, trace, exc)


def pipa_solve(problem: MpccProblem, config: PipaConfig, start: Point, Q=None) -> SolveResult:
    """Run PIPA from ``start``. ``Q`` is an optional constant PSD matrix on the x-block."""
    return run_driver(problem, config, start, FeasibilityRadius(config.c), Q)

"""PIPA with an algorithm-controlled trust region.

The x-block box has half-width ``delta_k``, updated after every step from
the ratio of actual to predicted penalty change instead of being tied to
infeasibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RadiusCollapseError
from .model import MpccProblem, Point
from .pipa import FeasibilityRadius, PipaConfig, SolveResult, run_driver


def _tr_base() -> PipaConfig:
    # The plain-PIPA termination default is tuned to stop the counterexample
    # run early; the remedy is run to a tight step length instead.
    return PipaConfig(eps_term=1e-10, max_iter=500)


@dataclass(frozen=True)
class TrConfig:
    base: PipaConfig = field(default_factory=_tr_base)
    gamma0: float = 0.5
    gamma1: float = 0.5
    gamma2: float = 2.0
    eta1: float = 0.25
    eta2: float = 0.75
    delta0: float = 1.0
    delta_min: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.gamma0 <= self.gamma1 < 1.0 <= self.gamma2:
            raise ValueError("need 0 < gamma0 <= gamma1 < 1 <= gamma2")
        if not 0.0 < self.eta1 < self.eta2 < 1.0:
            raise ValueError("need 0 < eta1 < eta2 < 1")
        if self.delta0 <= 0 or self.delta_min <= 0:
            raise ValueError("delta0 and delta_min must be positive")


def tr_ratio(ared_signed: float, pred: float) -> float:
    if not pred < 0:
        raise ValueError("pred must be negative")
    return ared_signed / pred


def tr_update(delta: float, rho_k: float, cfg: TrConfig) -> float:
    """Next radius; the upper end of each admissible interval is used."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if rho_k < cfg.eta1:
        return cfg.gamma1 * delta
    if rho_k < cfg.eta2:
        return delta
    return cfg.gamma2 * delta


class AdaptiveRadius:
    def __init__(self, cfg: TrConfig):
        self.cfg = cfg
        self.delta = cfg.delta0
        self.ratios: list[float] = []

    def half_width(self, p: Point, F_norm: float) -> tuple[float, float]:
        if self.delta < self.cfg.delta_min:
            raise RadiusCollapseError(
                f"trust-region radius {self.delta:.3e} fell below {self.cfg.delta_min:.3e}")
        return self.delta, self.delta

    def update(self, ared: float, pred: float) -> bool:
        rho_k = tr_ratio(ared, pred)
        self.ratios.append(rho_k)
        self.delta = tr_update(self.delta, rho_k, self.cfg)
        return rho_k > 0


def trpipa_solve(problem: MpccProblem, cfg: TrConfig, start: Point, Q=None,
                 radius_rule: str = "adaptive") -> SolveResult:
    """Run the trust-region variant.

    ``radius_rule="feasibility"`` swaps in the original feasibility-tied
    radius, which turns this into plain PIPA.
    """
    if radius_rule == "adaptive":
        policy = AdaptiveRadius(cfg)
    elif radius_rule == "feasibility":
        policy = FeasibilityRadius(cfg.base.c)
    else:
        raise ValueError(f"unknown radius rule {radius_rule!r}")
    return run_driver(problem, cfg.base, start, policy, Q)

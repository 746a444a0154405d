"""Penalty interior-point algorithm for MPCCs, its counterexample and a trust-region remedy."""

from .analysis import (
    StationarityResult,
    TableComparison,
    VerificationReport,
    check_assumptions,
    compare_to_table1,
    stationarity_residual,
    verify_lemma_bounds,
)
from .errors import PipaError
from .model import MpccProblem, Point, check_derivatives, counterexample_problem, get_problem
from .pipa import PipaConfig, SolveResult, TraceRecord, pipa_solve
from .subqp import Direction, QpSubproblem, build_direction_qp, solve_direction_qp, solve_qp
from .trpipa import TrConfig, trpipa_solve

__all__ = [
    "Direction", "MpccProblem", "PipaConfig", "PipaError", "Point", "QpSubproblem",
    "SolveResult", "StationarityResult", "TableComparison", "TraceRecord", "TrConfig",
    "VerificationReport", "build_direction_qp", "check_assumptions", "check_derivatives",
    "compare_to_table1", "counterexample_problem", "get_problem", "pipa_solve",
    "solve_direction_qp", "solve_qp", "stationarity_residual", "trpipa_solve",
    "verify_lemma_bounds",
]

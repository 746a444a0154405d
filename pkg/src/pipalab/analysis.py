"""Numerical checks of the counterexample: iterate bounds, the reference table, assumptions, stationarity."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from . import numerics
from .errors import TraceTooShortError
from .model import MpccProblem, Point, eval_all
from .pipa import TraceRecord

TAU_LOWER = 5.0 / 9.0
BOUND_NAMES = ("ind1", "ind2", "ind3", "ind4", "ind5")

# Iterates and reduction columns exactly as printed, rows k = 1..10. The
# column headed "ared" holds the model prediction and the one headed "pred"
# holds the signed penalty change; they are stored here under what they are.
TABLE1 = [
    ("0", "1", "0.02", None, None),
    ("-0.096022613", "1.0960226", "0.0058578644", "-0.198", "-0.137"),
    ("-0.17606958", "1.1760696", "0.00016323495", "-0.0974", "-0.0982"),
    ("-0.18991126", "1.1899113", "1.4549224E-05", "-0.0143", "-0.0143"),
    ("-0.1940679", "1.1940679", "1.4171928E-06", "-0.00421", "-0.0042"),
    ("-0.19536745", "1.1953675", "1.4145236E-07", "-0.00131", "-0.0013"),
    ("-0.19577825", "1.1957782", "1.4223933E-08", "-0.000412", "-0.000411"),
    ("-0.19590853", "1.1959085", "1.433645E-09", "-0.00013", "-0.00013"),
    ("-0.1959499", "1.1959499", "1.4460519E-10", "-4.14e-05", "-4.14e-05"),
    ("-0.19596304", "1.195963", "1.4586827E-11", "-1.32e-05", "-1.31e-05"),
]


def limit_bound_constants() -> tuple[float, float]:
    """Bounds on x and y along the counterexample run: ``-/+ 2 / (10 (sqrt 2 - 1))``."""
    r = 2.0 / (10.0 * (math.sqrt(2.0) - 1.0))
    return -r, 1.0 + r


@dataclass
class Failure:
    check: str
    k: int
    detail: str


@dataclass
class VerificationReport:
    flags: dict[str, list[bool]] = field(default_factory=dict)
    x_limit_ok: bool = True
    y_limit_ok: bool = True
    min_tau: float = math.nan
    max_table_dev: float | None = None
    failures: list[Failure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def worst_index(self, check: str) -> int | None:
        ks = [f.k for f in self.failures if f.check == check]
        return ks[0] if ks else None

    def to_text(self) -> str:
        lines = []
        for name in BOUND_NAMES:
            ok = self.flags.get(name, [])
            lines.append(f"{name}: {sum(ok)}/{len(ok)} steps pass")
        lines.append(f"x lower limit: {'pass' if self.x_limit_ok else 'FAIL'}")
        lines.append(f"y upper limit: {'pass' if self.y_limit_ok else 'FAIL'}")
        lines.append(f"observed min tau: {self.min_tau:.6g}")
        if self.max_table_dev is not None:
            lines.append(f"max relative deviation from the reference table: {self.max_table_dev:.3e}")
        for f in self.failures:
            lines.append(f"FAIL {f.check} at k={f.k}: {f.detail}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["check,k,passed"]
        for name in BOUND_NAMES:
            for k, ok in enumerate(self.flags.get(name, []), start=1):
                rows.append(f"{name},{k},{int(ok)}")
        rows.append(f"x_limit,,{int(self.x_limit_ok)}")
        rows.append(f"y_limit,,{int(self.y_limit_ok)}")
        return "\n".join(rows) + "\n"


def verify_lemma_bounds(trace: list[TraceRecord]) -> VerificationReport:
    """Check the five inductive bounds on every consecutive pair of iterates.

    Flags are indexed by the record number ``k`` of the earlier iterate.
    """
    report = VerificationReport(flags={name: [] for name in BOUND_NAMES})
    x_lim, y_lim = limit_bound_constants()
    taus = []

    def record(name, k, ok, detail):
        report.flags[name].append(bool(ok))
        if not ok:
            report.failures.append(Failure(name, k, detail))

    for cur, nxt in zip(trace, trace[1:]):
        x, y, w = cur.point.x[0], cur.point.y[0], cur.point.w[0]
        x1, y1, w1 = nxt.point.x[0], nxt.point.y[0], nxt.point.w[0]
        k = cur.k
        record("ind1", k, 1.0 <= y <= y1, f"y={y!r}, y_next={y1!r}")
        record("ind2", k, w1 <= 0.5 * w <= 0.02, f"w={w!r}, w_next={w1!r}")
        floor = x - math.sqrt(y * w)
        record("ind3", k, x1 >= floor > -1.0, f"x_next={x1!r}, x - sqrt(yw)={floor!r}")
        record("ind4", k, y1 * w1 <= 0.5 * y * w, f"yw={y * w!r}, yw_next={y1 * w1!r}")
        tau = nxt.tau
        taus.append(tau)
        record("ind5", k, TAU_LOWER <= tau <= 1.0, f"tau={tau!r}")

    for rec in trace:
        if rec.point.x[0] < x_lim and report.x_limit_ok:
            report.x_limit_ok = False
            report.failures.append(Failure("x_limit", rec.k, f"x={rec.point.x[0]!r} < {x_lim!r}"))
        if rec.point.y[0] > y_lim and report.y_limit_ok:
            report.y_limit_ok = False
            report.failures.append(Failure("y_limit", rec.k, f"y={rec.point.y[0]!r} > {y_lim!r}"))
    report.min_tau = min(taus) if taus else math.nan
    return report


def check_assumptions(problem: MpccProblem, p: Point, tol: float) -> tuple[bool, bool, float]:
    """Strict complementarity and nonsingularity of ``[F_y F_w F_z; W Y 0]`` at ``p``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    _, _, _, J = eval_all(problem, p)
    m, n_x = problem.m, problem.n_x
    top = J[:, n_x:]
    bottom = np.hstack([np.diag(p.w), np.diag(p.y), np.zeros((m, problem.n_z))])
    M = np.vstack([top, bottom])
    smin = float(np.linalg.svd(M, compute_uv=False).min())
    sc = bool(np.min(p.y + p.w) > tol)
    return sc, smin > tol, smin


@dataclass
class StationarityResult:
    residual: float
    multipliers: dict[str, np.ndarray]
    warning: str | None = None

    def __float__(self) -> float:
        return float(self.residual)


def _constrained_lsq(C, g, state_rows, control_rows, signed):
    """Min ``||g_X - C_X u||`` subject to ``C_S u = g_S`` and ``u_j >= 0`` for signed ``j``.

    Every subset of the sign-constrained columns is tried. Returns None if the
    state rows cannot be met exactly.
    """
    k = C.shape[1]
    unsigned = [j for j in range(k) if j not in signed]
    best = None
    for r in range(len(signed) + 1):
        for subset in itertools.combinations(signed, r):
            cols = sorted(unsigned + list(subset))
            u = np.zeros(k)
            if cols:
                Cs, Cx = C[np.ix_(state_rows, cols)], C[np.ix_(control_rows, cols)]
                gs, gx = g[state_rows], g[control_rows]
                up = np.linalg.lstsq(Cs, gs, rcond=None)[0] if len(state_rows) else np.zeros(len(cols))
                if np.linalg.norm(Cs @ up - gs) > 1e-10 * (1.0 + np.linalg.norm(gs)):
                    continue
                N = numerics.null_space(Cs) if len(state_rows) else np.eye(len(cols))
                if N.shape[1] and len(control_rows):
                    t = np.linalg.lstsq(Cx @ N, gx - Cx @ up, rcond=None)[0]
                    up = up + N @ t
                u[cols] = up
            elif np.linalg.norm(g[state_rows]) > 1e-10:
                continue
            if any(u[j] < -1e-12 for j in subset):
                continue
            res = float(np.linalg.norm(g[control_rows] - C[control_rows] @ u))
            if best is None or res < best[0]:
                best = (res, u)
    return best


def stationarity_residual(problem: MpccProblem, p: Point, tol_active: float = 1e-6) -> StationarityResult:
    """Strong-stationarity residual at ``p``; zero certifies a strongly stationary point.

    Multipliers are fitted so that the Lagrangian gradient vanishes in the
    ``(y, w, z)`` rows, where the nonsingular Jacobian block determines them,
    and the residual is the norm of what remains in the ``x`` rows. If no
    admissible multipliers clear those rows the full Lagrangian-gradient norm
    is minimized instead.
    """
    if tol_active <= 0:
        raise ValueError("tol_active must be positive")
    _, g, F, J = eval_all(problem, p)
    n_x, m, n_z, n = problem.n_x, problem.m, problem.n_z, problem.n
    cols, names, signed = [], [], []

    def add(vec, name, sign_constrained):
        if sign_constrained:
            signed.append(len(cols))
        cols.append(vec)
        names.append(name)

    for j in range(problem.n_eq):
        add(J[j], f"eq{j}", False)
    eye = np.eye(n)
    for i in range(n_x):
        at_lo = p.x[i] - problem.x_lower[i] <= tol_active
        at_hi = problem.x_upper[i] - p.x[i] <= tol_active
        if at_lo and at_hi:
            add(eye[i], f"x{i}", False)
        elif at_lo:
            add(eye[i], f"x{i}_lower", True)
        elif at_hi:
            add(-eye[i], f"x{i}_upper", True)
    for i in range(m):
        y_act, w_act = p.y[i] <= tol_active, p.w[i] <= tol_active
        if y_act:
            add(eye[n_x + i], f"y{i}", w_act)
        if w_act:
            add(eye[n_x + m + i], f"w{i}", y_act)

    C = np.array(cols).T if cols else np.zeros((n, 0))
    control = list(range(n_x))
    state = list(range(n_x, n))
    best = _constrained_lsq(C, g, state, control, signed)
    if best is None:
        best = _constrained_lsq(C, g, [], list(range(n)), signed)
    res, u = best
    F_norm = float(np.linalg.norm(F))
    warning = f"point is infeasible: ||F|| = {F_norm:.3e}" if F_norm > tol_active else None
    return StationarityResult(res, dict(zip(names, u)), warning)


@dataclass
class TableComparison:
    max_rel_dev: float
    worst: tuple[int, str]
    deviations: list[dict[str, float]]
    reductions_match: bool
    reduction_mismatches: list[tuple[int, str, float, float]]

    def __float__(self) -> float:
        return float(self.max_rel_dev)


def _half_unit(printed: str) -> float:
    """Half a unit in the last significant digit of a printed decimal."""
    exp = Decimal(printed).as_tuple().exponent
    return 0.5 * 10.0 ** exp


def compare_to_table1(trace: list[TraceRecord]) -> TableComparison:
    """Compare the first ten records against the reference table.

    Iterates are compared by relative deviation. The reduction columns are
    matched to the precision they were printed with (at most three
    significant figures).
    """
    if len(trace) < len(TABLE1):
        raise TraceTooShortError(f"need {len(TABLE1)} trace rows, got {len(trace)}")
    devs = []
    worst = (0.0, (1, "x"))
    mismatches = []
    for row, (rec, printed) in enumerate(zip(trace, TABLE1), start=1):
        ours = {"x": rec.point.x[0], "y": rec.point.y[0], "w": rec.point.w[0]}
        dev = {}
        for name, s in zip("xyw", printed[:3]):
            ref = float(s)
            dev[name] = abs(ours[name] - ref) / abs(ref) if ref != 0 else abs(ours[name])
            if dev[name] > worst[0]:
                worst = (dev[name], (row, name))
        devs.append(dev)
        for label, ours_val, s in (("pred_model", rec.pred, printed[3]),
                                   ("ared_signed", rec.ared, printed[4])):
            if s is None:
                continue
            if not abs(ours_val - float(s)) <= _half_unit(s):
                mismatches.append((row, label, ours_val, float(s)))
    return TableComparison(worst[0], worst[1], devs, not mismatches, mismatches)

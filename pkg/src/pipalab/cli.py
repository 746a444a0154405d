"""Command line front end.

Examples::

    pipalab run-pipa --problem counterexample --format table
    pipalab run-trpipa --out trace.csv
    pipalab verify-table
    pipalab verify-lemma
    pipalab check-derivatives

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 solver error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .model import DEFAULT_STARTS, PROBLEMS, check_derivatives, get_problem, random_interior_point
from .pipa import ERROR, PipaConfig, TraceRecord, pipa_solve
from .trpipa import TrConfig, trpipa_solve

COMMANDS = ("run-pipa", "run-trpipa", "verify-table", "check-derivatives", "verify-lemma")
CSV_HEADER = ["k", "x", "y", "w", "tau", "pred_model", "ared_signed", "comp", "normF", "delta", "p"]

# flag name -> (config field, type)
PARAMS = {
    "c": ("c", float),
    "sigma": ("sigma", float),
    "gamma": ("gamma", float),
    "rho": ("rho", float),
    "alpha": ("alpha", float),
    "eps-frac": ("eps_frac", float),
    "eps-term": ("eps_term", float),
    "max-iter": ("max_iter", int),
    "delta0": ("delta0", float),
}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


@dataclass
class RunSpec:
    command: str
    problem_name: str = "counterexample"
    overrides: dict[str, float] = field(default_factory=dict)
    output_path: str | None = None
    format: str = "table"


class UsageError(Exception):
    pass


def read_config_file(path: str | Path) -> dict[str, float]:
    """Parse ``name=value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected name=value")
        name, value = (s.strip() for s in line.split("=", 1))
        name = name.replace("_", "-")
        if name not in PARAMS:
            raise UsageError(f"{path}:{lineno}: unknown parameter {name!r}")
        try:
            values[name] = PARAMS[name][1](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: malformed number {value!r}") from None
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pipalab", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--problem", default="counterexample", choices=sorted(PROBLEMS))
    for name, (_, typ) in PARAMS.items():
        parser.add_argument(f"--{name}", type=typ, default=None)
    parser.add_argument("--out", default=None, help="write the trace to this file")
    parser.add_argument("--format", choices=("csv", "table"), default="table")
    parser.add_argument("--config", default=None, help="file of name=value defaults")
    return parser


def parse_args(argv: list[str]) -> RunSpec:
    """Parse a command line; usage problems exit with status 2."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    overrides: dict[str, float] = {}
    if ns.config:
        try:
            overrides.update(read_config_file(ns.config))
        except (OSError, UsageError) as exc:
            parser.error(str(exc))
    for name in PARAMS:
        value = getattr(ns, name.replace("-", "_"))
        if value is not None:
            overrides[name] = value
    spec = RunSpec(ns.command, ns.problem, overrides, ns.out, ns.format)
    if spec.command == "verify-table":
        spec.problem_name = "counterexample"
        spec.overrides.setdefault("max-iter", 10)
    try:
        build_configs(spec)
    except ValueError as exc:
        parser.error(str(exc))
    return spec


def build_configs(spec: RunSpec) -> tuple[PipaConfig, TrConfig]:
    """Apply overrides on top of the command's defaults; raises ValueError on bad ranges."""
    base = PipaConfig()
    if spec.command == "verify-lemma":
        base = PipaConfig(eps_term=0.0, max_iter=50)
    elif spec.command == "run-trpipa":
        base = TrConfig().base
    fields = {PARAMS[k][0]: v for k, v in spec.overrides.items() if k != "delta0"}
    base = dataclasses.replace(base, **fields)
    tr = TrConfig(base=base, **({"delta0": spec.overrides["delta0"]} if "delta0" in spec.overrides else {}))
    return base, tr


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else repr(float(v))


def _vec(a: np.ndarray) -> str:
    return ";".join(_fmt(v) for v in a)


def write_trace(trace: list[TraceRecord], format: str = "csv", output=None) -> None:
    """Write ``trace`` as CSV (17 significant digits) or as a listing laid out like the reference table.

    ``output`` is a path, an open text stream, or None for stdout.
    """
    if isinstance(output, (str, Path)):
        with open(output, "w", newline="") as fh:
            write_trace(trace, format, fh)
        return
    out = sys.stdout if output is None else output
    if format == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in trace:
            writer.writerow([r.k, _vec(r.point.x), _vec(r.point.y), _vec(r.point.w), _fmt(r.tau),
                             _fmt(r.pred), _fmt(r.ared), _fmt(r.comp), _fmt(r.F_norm),
                             _fmt(r.delta), r.p_exp])
    elif format == "table":
        out.write(f"{'k':>3} | {'x':>15} {'y':>15} {'w':>15} | {'pred_model':>15} {'ared_signed':>15}\n")
        out.write("-" * 88 + "\n")
        for r in trace:
            cells = [" ".join(f"{v:.8g}" for v in a) for a in (r.point.x, r.point.y, r.point.w)]
            red = ["" if math.isnan(v) else f"{v:.8g}" for v in (r.pred, r.ared)]
            out.write(f"{r.k:>3} | {cells[0]:>15} {cells[1]:>15} {cells[2]:>15} | "
                      f"{red[0]:>15} {red[1]:>15}\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def read_trace(source) -> list[dict[str, object]]:
    """Parse CSV written by :func:`write_trace` back into per-row dicts."""
    if isinstance(source, (str, Path)):
        source = io.StringIO(Path(source).read_text())
    rows = []
    reader = csv.DictReader(source)
    if reader.fieldnames != CSV_HEADER:
        raise ValueError(f"unexpected header {reader.fieldnames}")
    for row in reader:
        parsed: dict[str, object] = {"k": int(row["k"]), "p": int(row["p"])}
        for key in ("x", "y", "w"):
            parsed[key] = np.array([float(v) for v in row[key].split(";") if v])
        for key in ("tau", "pred_model", "ared_signed", "comp", "normF", "delta"):
            parsed[key] = float(row[key])
        rows.append(parsed)
    return rows


def _emit(trace, spec: RunSpec) -> None:
    if spec.output_path:
        write_trace(trace, spec.format, spec.output_path)
    else:
        write_trace(trace, spec.format)


def _run(spec: RunSpec) -> int:
    pipa_cfg, tr_cfg = build_configs(spec)
    if spec.command == "check-derivatives":
        rng = np.random.default_rng(0)
        worst_all = 0.0
        # Every built-in problem is checked, whatever --problem says.
        for name in sorted(PROBLEMS):
            problem = get_problem(name)
            worst = max(check_derivatives(problem, random_interior_point(problem, rng))
                        for _ in range(10))
            worst_all = max(worst_all, worst)
            print(f"{name}: max relative derivative error {worst:.3e}")
        return EXIT_OK if worst_all <= 1e-6 else EXIT_FAIL

    problem = get_problem(spec.problem_name)
    start = DEFAULT_STARTS[spec.problem_name]()
    if spec.command == "run-trpipa":
        result = trpipa_solve(problem, tr_cfg, start)
    else:
        result = pipa_solve(problem, pipa_cfg, start)
    _emit(result.trace, spec)
    print(f"status: {result.status}, iterates: {len(result.trace)}", file=sys.stderr)
    if result.status == ERROR:
        print(f"solver error: {result.error}", file=sys.stderr)
        return EXIT_SOLVER

    if spec.command == "verify-table":
        try:
            cmp = analysis.compare_to_table1(result.trace)
        except analysis.TraceTooShortError as exc:
            print(f"FAIL: {exc}")
            return EXIT_FAIL
        ok_iter = cmp.max_rel_dev <= 1e-6
        print(f"iterates: max relative deviation {cmp.max_rel_dev:.3e} at row {cmp.worst[0]} "
              f"({cmp.worst[1]}) -> {'pass' if ok_iter else 'FAIL'}")
        for row, dev in enumerate(cmp.deviations, start=1):
            print(f"  row {row:2d}: " + "  ".join(f"{k}={v:.2e}" for k, v in dev.items()))
        print(f"reduction columns: {'pass' if cmp.reductions_match else 'FAIL'}")
        for row, label, ours, printed in cmp.reduction_mismatches:
            print(f"  row {row}: {label} {ours:.6g} vs printed {printed:g}")
        return EXIT_OK if ok_iter and cmp.reductions_match else EXIT_FAIL

    if spec.command == "verify-lemma":
        report = analysis.verify_lemma_bounds(result.trace)
        print(report.to_text())
        return EXIT_OK if report.passed else EXIT_FAIL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    spec = parse_args(argv)
    return _run(spec)


if __name__ == "__main__":
    sys.exit(main())

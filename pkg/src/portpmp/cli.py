"""Command-line front end.

    portpmp solve FILE [--steps N] [--tol T] [--seed-lambda v1,..,vn]... [--nu MODE] [--out DIR]
    portpmp compare FILE [--intervals N] [--tol-rel R] [solve flags]
    portpmp sweep FILE PARAM RANGE [solve flags]
    portpmp validate FILE

Exit codes: 0 success, 1 input error, 2 solver failure (or a failed
comparison).  Artifacts are CSV and plain-text files written to ``--out``
(default: the current directory); the run report also goes to stdout and
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .direct import compare, optimize, transcribe
from .indirect import SolverConfig, SolverFailedError, check_certificate, solve
from .model import ProblemError, check_problem, read_problem

__all__ = ["RunReport", "main", "build_parser", "parse_range", "format_csv"]

EXIT_OK, EXIT_INPUT, EXIT_FAILED = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    config: dict = field(default_factory=dict)
    status: str = "not started"
    nu_class: str = ""
    cost: float | None = None
    residual_norm: float | None = None
    certificate: str = ""
    wall_time: float = 0.0
    details: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"command: {self.command}"]
        if self.config:
            lines.append("config: " + ", ".join(f"{k}={v}" for k, v in self.config.items()))
        lines.append(f"status: {self.status}")
        if self.nu_class:
            lines.append(f"nu class: {self.nu_class}")
        if self.cost is not None:
            lines.append(f"J = {self.cost:.17g}")
        if self.residual_norm is not None:
            lines.append(f"residual norm = {self.residual_norm:.3e}")
        if self.certificate:
            lines.append("certificate:")
            lines.extend("  " + s for s in self.certificate.splitlines())
        lines.extend(self.details)
        lines.append(f"wall time: {self.wall_time:.3f} s")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# formatting helpers


def _fmt(x) -> str:
    return format(float(x), ".17g")


def format_csv(header, rows) -> str:
    """CSV text with '.' decimals, 17 significant digits and '\\n' line endings."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    return "\n".join(out) + "\n"


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def parse_range(text: str) -> list:
    """``a,b,c`` or ``start:stop:count`` (inclusive, evenly spaced); empty text gives []."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 0:
                raise ValueError
            return [float(v) for v in np.linspace(start, stop, count)]
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"bad range {text!r}: expected 'a,b,c' or 'start:stop:count'") from None


def _seed(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}: expected comma-separated numbers") from None


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="portpmp", description="Indirect optimal control for port-controlled systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(p):
        p.add_argument("file", type=Path, help="problem file")
        p.add_argument("--steps", type=int, default=1000, help="RK4 steps on [0, t1]")
        p.add_argument("--tol", type=float, default=1e-9, help="shooting residual tolerance")
        p.add_argument("--seed-lambda", type=_seed, action="append", default=[], metavar="v1,..,vn",
                       help="extra initial costate guess (repeatable)")
        p.add_argument("--nu", choices=("auto", "normal", "abnormal"), default="auto")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    solver_flags(sub.add_parser("solve", help="solve by costate shooting"))
    p = sub.add_parser("compare", help="compare the indirect solution with direct transcription")
    solver_flags(p)
    p.add_argument("--intervals", type=int, default=50, help="direct control intervals N_d")
    p.add_argument("--tol-rel", type=float, default=0.02, help="relative cost gap tolerance")
    p = sub.add_parser("sweep", help="re-solve over a range of one scalar parameter")
    solver_flags(p)
    p.add_argument("parameter", help="t1, q0.<state> or terminal.<state>")
    p.add_argument("range", help="'a,b,c' or 'start:stop:count'")
    p = sub.add_parser("validate", help="check a problem file")
    p.add_argument("file", type=Path)
    return parser


def _config(args, problem) -> SolverConfig:
    for seed in args.seed_lambda:
        if len(seed) != problem.n:
            raise InputError(f"--seed-lambda {','.join(map(_fmt, seed))} needs {problem.n} components")
    try:
        return SolverConfig(steps=args.steps, tol=args.tol, seeds=tuple(args.seed_lambda), nu=args.nu)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load(path: Path):
    try:
        return check_problem(read_problem(path))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except ProblemError as exc:
        raise InputError(f"{path}: {exc}") from None


def _outdir(args) -> Path:
    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


# ---------------------------------------------------------------------------
# commands


def _solve(problem, config, report: RunReport):
    try:
        extremal = solve(problem, config)
    except SolverFailedError as exc:
        report.status = "solver failed"
        report.details.append(exc.report.to_text())
        return None
    report.status = "converged"
    report.nu_class = extremal.nu_class
    report.cost = extremal.cost
    report.residual_norm = extremal.residual_norm
    report.certificate = check_certificate(extremal, problem, config=config).to_text()
    if extremal.report is not None and extremal.report.messages:
        report.details.extend(extremal.report.messages)
    return extremal


def cmd_solve(args, report: RunReport) -> int:
    problem = _load(args.file)
    config = _config(args, problem)
    out = _outdir(args)
    report.config = dict(steps=config.steps, tol=config.tol, nu=config.nu, seeds=list(config.seeds))
    extremal = _solve(problem, config, report)
    _write(out / f"{args.file.stem}.report.txt", report.to_text())
    if extremal is None:
        return EXIT_FAILED
    tr = extremal.trajectory
    csv = format_csv(tr.columns(problem), tr.as_array())
    path = out / f"{args.file.stem}.trajectory.csv"
    _write(path, csv)
    report.details.append(f"trajectory: {path}")
    return EXIT_OK


def cmd_compare(args, report: RunReport) -> int:
    problem = _load(args.file)
    config = _config(args, problem)
    out = _outdir(args)
    if args.intervals < 2:
        raise InputError("--intervals must be at least 2")
    if not args.tol_rel >= 0:
        raise InputError("--tol-rel must be non-negative")
    report.config = dict(steps=config.steps, tol=config.tol, nu=config.nu,
                         intervals=args.intervals, tol_rel=args.tol_rel)
    extremal = _solve(problem, config, report)
    if extremal is None:
        _write(out / f"{args.file.stem}.compare.txt", report.to_text())
        return EXIT_FAILED
    try:
        direct = optimize(transcribe(problem, args.intervals))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = compare(extremal, direct, args.tol_rel)
    report.details.append(result.to_text())
    report.status = "compare pass" if result.passed else "compare fail"
    _write(out / f"{args.file.stem}.compare.txt", report.to_text())
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_sweep(args, report: RunReport) -> int:
    problem = _load(args.file)
    config = _config(args, problem)
    if args.parameter not in problem.parameter_names():
        raise InputError(f"unknown parameter {args.parameter!r}; expected one of {problem.parameter_names()}")
    values = parse_range(args.range)
    out = _outdir(args)
    report.config = dict(steps=config.steps, tol=config.tol, nu=config.nu,
                         parameter=args.parameter, values=len(values))
    rows = []
    for value in values:
        try:
            variant = check_problem(problem.with_parameter(args.parameter, value))
            extremal = solve(variant, config)
        except (ProblemError, SolverFailedError) as exc:
            rows.append((value, "nan", "nan", "false"))
            report.details.append(f"{args.parameter}={_fmt(value)}: {str(exc).splitlines()[0]}")
        else:
            rows.append((value, extremal.cost, extremal.nu, "true"))
    path = out / f"{args.file.stem}.sweep.csv"
    _write(path, format_csv([args.parameter, "J", "nu", "converged"], rows))
    report.status = f"{sum(r[3] == 'true' for r in rows)}/{len(rows)} converged"
    report.details.append(f"sweep: {path}")
    return EXIT_OK


def cmd_validate(args, report: RunReport) -> int:
    _load(args.file)
    report.status = "valid"
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    report = RunReport(command="portpmp " + " ".join(argv))
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, report)
    except InputError as exc:
        report.status = "input error"
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    report.wall_time = time.perf_counter() - start
    sys.stdout.write(report.to_text())
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Declarative optimal-control problems with input/output ports.

A :class:`ControlProblem` describes

    dq/dt = F_u(q) + B(q) f'(t),     e = A(q)^T F_u(q),     q(0) = q0,

together with a running cost phi(q, u, e) integrated over the fixed horizon
[0, t1], a box of admissible controls and equality constraints on selected
state components at t1.  ``k = 0`` gives a port-free problem.

Problems are read from a small line-oriented text format, see
:func:`load_problem`, and written back with :func:`dump_problem`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .expr import Expr, ParseError, lambdify, parse, symbols, to_text

__all__ = [
    "ControlProblem", "ExprSignal", "TableSignal", "LinkedSignal",
    "Diagnostic", "ProblemError", "ProblemSyntaxError",
    "load_problem", "read_problem", "dump_problem", "validate", "check_problem",
]


# ---------------------------------------------------------------------------
# time signals


@dataclass(frozen=True)
class ExprSignal:
    """Signal given by an expression in ``t``."""

    expr: Expr

    @cached_property
    def _fn(self):
        return lambdify(self.expr, ("t",))

    def __call__(self, t: float) -> float:
        return self._fn(t)

    def to_text(self) -> str:
        return to_text(self.expr)


@dataclass(frozen=True)
class TableSignal:
    """Piecewise-linear signal through ``(times, values)``; constant outside."""

    times: tuple
    values: tuple

    def __call__(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class LinkedSignal:
    """Marks f' as the time derivative of f (central differences on the grid)."""


# ---------------------------------------------------------------------------
# problem


@dataclass(frozen=True)
class ControlProblem:
    n: int
    l: int
    k: int
    t1: float
    dynamics: tuple
    running_cost: Expr
    q0: tuple
    port_A: tuple = ()
    port_B: tuple = ()
    control_bounds: tuple = ()
    port_signal_f: tuple = ()
    port_signal_fprime: tuple = ()
    terminal: tuple = ()  # (state index, target value)
    state_prefix: str = "q"
    sense: str = "min"

    def __post_init__(self):
        if not self.control_bounds:
            object.__setattr__(
                self, "control_bounds", tuple((-math.inf, math.inf) for _ in range(self.l))
            )

    # symbol sets -----------------------------------------------------------
    @property
    def state_names(self) -> tuple:
        return tuple(f"{self.state_prefix}{i + 1}" for i in range(self.n))

    @property
    def control_names(self) -> tuple:
        return tuple(f"u{j + 1}" for j in range(self.l))

    @property
    def output_names(self) -> tuple:
        return tuple(f"e{j + 1}" for j in range(self.k))

    @property
    def signal_names(self) -> tuple:
        return tuple(f"f{j + 1}" for j in range(self.k))

    @property
    def signal_prime_names(self) -> tuple:
        return tuple(f"fprime{j + 1}" for j in range(self.k))

    @property
    def dynamics_symbols(self) -> frozenset:
        return frozenset(self.state_names + self.control_names + ("t",))

    @property
    def port_symbols(self) -> frozenset:
        return frozenset(self.state_names + ("t",))

    @property
    def cost_symbols(self) -> frozenset:
        return frozenset(
            self.state_names + self.control_names + self.output_names
            + self.signal_names + self.signal_prime_names + ("t",)
        )

    @property
    def linked(self) -> tuple:
        return tuple(isinstance(s, LinkedSignal) for s in self.port_signal_fprime)

    def replace(self, **changes) -> "ControlProblem":
        return replace(self, **changes)

    def terminal_targets(self) -> dict:
        names = self.state_names
        return {names[i]: v for i, v in self.terminal}

    # scalar parameters for sweeps -------------------------------------------
    def parameter_names(self) -> list:
        out = ["t1"]
        out += [f"q0.{name}" for name in self.state_names]
        out += [f"terminal.{self.state_names[i]}" for i, _ in self.terminal]
        return out

    def with_parameter(self, name: str, value: float) -> "ControlProblem":
        """Copy with one scalar (``t1``, ``q0.<state>``, ``terminal.<state>``) changed."""
        value = float(value)
        names = self.state_names
        if name == "t1":
            return self.replace(t1=value)
        kind, _, state = name.partition(".")
        if state in names:
            index = names.index(state)
            if kind == "q0":
                q0 = list(self.q0)
                q0[index] = value
                return self.replace(q0=tuple(q0))
            if kind == "terminal" and any(i == index for i, _ in self.terminal):
                return self.replace(
                    terminal=tuple((i, value if i == index else v) for i, v in self.terminal)
                )
        raise KeyError(f"unknown problem parameter {name!r}; expected one of {self.parameter_names()}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


class ProblemError(ValueError):
    def __init__(self, message: str, diagnostics: Sequence[Diagnostic] = ()):
        self.diagnostics = list(diagnostics)
        if self.diagnostics:
            message = message + "\n" + "\n".join(f"  {d}" for d in self.diagnostics)
        super().__init__(message)


class ProblemSyntaxError(ProblemError):
    """Malformed problem file; ``line`` is 1-based, ``column`` 0-based."""

    def __init__(self, message: str, line: int, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


def _check_expr(diags, name, expr, allowed):
    if not isinstance(expr, Expr):
        diags.append(Diagnostic(name, f"not an expression: {expr!r}"))
        return
    extra = symbols(expr) - allowed
    if extra:
        diags.append(Diagnostic(name, f"undeclared symbol(s) {', '.join(sorted(extra))}"))


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def validate(problem: ControlProblem) -> list:
    """Return one :class:`Diagnostic` per violated invariant (empty if valid)."""
    p = problem
    diags: list = []
    for name, value, low in (("n", p.n, 1), ("l", p.l, 1), ("k", p.k, 0)):
        if not isinstance(value, (int, np.integer)) or value < low:
            diags.append(Diagnostic(name, f"must be an integer >= {low}, got {value!r}"))
    if diags:
        return diags
    if not (_finite(p.t1) and p.t1 > 0):
        diags.append(Diagnostic("t1", f"must be finite and > 0, got {p.t1!r}"))
    if not re.fullmatch(r"[A-Za-z][A-Za-z_]*", p.state_prefix or "") or p.state_prefix in ("u", "e", "f", "fprime"):
        diags.append(Diagnostic("state_prefix", f"invalid state symbol prefix {p.state_prefix!r}"))
    if p.sense not in ("min", "max"):
        diags.append(Diagnostic("sense", f"must be 'min' or 'max', got {p.sense!r}"))

    if len(p.dynamics) != p.n:
        diags.append(Diagnostic("dynamics", f"expected {p.n} expressions, got {len(p.dynamics)}"))
    for i, e in enumerate(p.dynamics):
        _check_expr(diags, f"dynamics[{i + 1}]", e, p.dynamics_symbols)

    for label, matrix in (("port_A", p.port_A), ("port_B", p.port_B)):
        if p.k == 0 and not matrix:
            continue
        if len(matrix) != p.n or any(len(row) != p.k for row in matrix):
            diags.append(Diagnostic(label, f"expected an {p.n}x{p.k} matrix"))
            continue
        for i, row in enumerate(matrix):
            for j, e in enumerate(row):
                _check_expr(diags, f"{label}[{i + 1},{j + 1}]", e, p.port_symbols)

    _check_expr(diags, "running_cost", p.running_cost, p.cost_symbols)

    if len(p.control_bounds) != p.l:
        diags.append(Diagnostic("control_bounds", f"expected {p.l} intervals, got {len(p.control_bounds)}"))
    for j, bound in enumerate(p.control_bounds):
        try:
            lo, hi = (float(b) for b in bound)
        except (TypeError, ValueError):
            diags.append(Diagnostic(f"control_bounds[{j + 1}]", f"not an interval: {bound!r}"))
            continue
        if math.isnan(lo) or math.isnan(hi) or lo > hi or lo == math.inf or hi == -math.inf:
            diags.append(Diagnostic(f"control_bounds[{j + 1}]", f"empty interval [{lo}, {hi}]"))

    for label, sigs in (("port_signal_f", p.port_signal_f), ("port_signal_fprime", p.port_signal_fprime)):
        if len(sigs) != p.k:
            diags.append(Diagnostic(label, f"expected {p.k} signals, got {len(sigs)}"))
            continue
        for j, s in enumerate(sigs):
            where = f"{label}[{j + 1}]"
            if isinstance(s, ExprSignal):
                _check_expr(diags, where, s.expr, frozenset(("t",)))
            elif isinstance(s, TableSignal):
                times = np.asarray(s.times, dtype=float)
                if len(s.times) != len(s.values) or len(s.times) < 1:
                    diags.append(Diagnostic(where, "table needs matching, nonempty time/value columns"))
                elif np.any(np.diff(times) <= 0) or not np.all(np.isfinite(times)):
                    diags.append(Diagnostic(where, "table times must be finite and strictly increasing"))
                elif not all(_finite(v) for v in s.values):
                    diags.append(Diagnostic(where, "table values must be finite"))
            elif isinstance(s, LinkedSignal):
                if label == "port_signal_f":
                    diags.append(Diagnostic(where, "only f' signals can be linked"))
            else:
                diags.append(Diagnostic(where, f"not a signal: {s!r}"))

    if len(p.q0) != p.n:
        diags.append(Diagnostic("q0", f"expected {p.n} values, got {len(p.q0)}"))
    elif not all(_finite(v) for v in p.q0):
        diags.append(Diagnostic("q0", "values must be finite"))

    if len(p.terminal) > p.n:
        diags.append(Diagnostic("terminal", f"at most {p.n} terminal constraints allowed"))
    seen = set()
    for index, target in p.terminal:
        if not isinstance(index, (int, np.integer)) or not 0 <= index < p.n:
            diags.append(Diagnostic("terminal", f"state index {index!r} out of range"))
        elif index in seen:
            diags.append(Diagnostic("terminal", f"duplicate constraint on state {index + 1}"))
        elif not _finite(target):
            diags.append(Diagnostic("terminal", f"target for state {index + 1} must be finite"))
        seen.add(index)
    return diags


def check_problem(problem) -> ControlProblem:
    """Input validation helper: accept a problem, its file text or a path.

    Raises :class:`ProblemError` listing every diagnostic if the problem is
    not valid.
    """
    if isinstance(problem, Path):
        problem = read_problem(problem)
    elif isinstance(problem, str):
        problem = load_problem(problem)
    if not isinstance(problem, ControlProblem):
        raise TypeError(f"expected a ControlProblem, got {type(problem).__name__}")
    diags = validate(problem)
    if diags:
        raise ProblemError("invalid control problem", diags)
    return problem


# ---------------------------------------------------------------------------
# problem files

_SECTIONS = ("dims", "dynamics", "port_A", "port_B", "cost", "bounds", "signals", "boundary")
_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")


@dataclass
class _Line:
    number: int
    text: str
    column: int  # column of text within the raw line


def _split_sections(source: str) -> dict:
    sections: dict = {}
    current = None
    for number, raw in enumerate(source.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        text = body.strip()
        if not text:
            continue
        column = len(body) - len(body.lstrip())
        m = _SECTION_RE.match(text)
        if m:
            current = m.group(1)
            if current not in _SECTIONS:
                raise ProblemSyntaxError(f"unknown section [{current}]", number, column)
            if current in sections:
                raise ProblemSyntaxError(f"duplicate section [{current}]", number, column)
            sections[current] = []
            continue
        if current is None:
            raise ProblemSyntaxError("content before the first [section]", number, column)
        sections[current].append(_Line(number, text, column))
    return sections


def _key_value(line: _Line) -> tuple:
    key, sep, value = line.text.partition("=")
    if not sep:
        raise ProblemSyntaxError("expected 'key = value'", line.number, line.column)
    offset = line.column + len(key) + 1
    stripped = value.lstrip()
    return key.strip(), stripped, offset + len(value) - len(stripped)


def _number(text: str, line: _Line, column: int | None = None) -> float:
    try:
        return float(text)
    except ValueError:
        raise ProblemSyntaxError(
            f"expected a number, got {text!r}", line.number, line.column if column is None else column
        ) from None


def _integer(text: str, line: _Line, column: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ProblemSyntaxError(f"expected an integer, got {text!r}", line.number, column) from None


def _expr(text: str, allowed, line: _Line, column: int) -> Expr:
    try:
        return parse(text, allowed)
    except ParseError as exc:
        col = column + len(text.encode("utf-8")[: exc.offset].decode("utf-8", "ignore"))
        raise ProblemSyntaxError(f"{type(exc).__name__}: {exc.message}", line.number, col) from None


def _require(sections: dict, name: str):
    if name not in sections:
        raise ProblemError(f"missing mandatory section [{name}]", [Diagnostic(name, "missing")])
    return sections[name]


def load_problem(source: str) -> ControlProblem:
    """Parse problem-file text into a validated :class:`ControlProblem`.

    Example::

        [dims]
        n = 2
        l = 1
        t1 = 1
        state = x          # optional symbol prefix, default q
        [dynamics]
        x2
        u1
        [cost]
        u1^2
        [boundary]
        q0 = 0 1
        terminal x1 = 1
        terminal x2 = 0

    Port problems (``k >= 1``) add ``[port_A]``/``[port_B]`` with ``n*k``
    expression lines in row-major order and a ``[signals]`` section holding
    ``fJ = <expr in t>`` and ``fprimeJ = <expr in t>`` lines.  A signal may
    also be ``table`` followed by ``time value`` rows, and ``fprimeJ = linked``
    makes f' the numerical derivative of f.
    """
    sections = _split_sections(source)

    dims = {}
    for line in _require(sections, "dims"):
        key, value, column = _key_value(line)
        if key in dims:
            raise ProblemSyntaxError(f"duplicate key {key!r}", line.number, line.column)
        dims[key] = (value, line, column)
    unknown = set(dims) - {"n", "l", "k", "t1", "state", "sense"}
    if unknown:
        key = sorted(unknown)[0]
        raise ProblemSyntaxError(f"unknown [dims] key {key!r}", dims[key][1].number, dims[key][1].column)
    for key in ("n", "l", "t1"):
        if key not in dims:
            raise ProblemError(f"missing mandatory field {key} in [dims]", [Diagnostic(key, "missing")])
    n = _integer(*dims["n"])
    l = _integer(*dims["l"])
    k = _integer(*dims["k"]) if "k" in dims else 0
    t1 = _number(*dims["t1"])
    prefix = dims["state"][0] if "state" in dims else "q"
    sense = dims["sense"][0] if "sense" in dims else "min"
    if n < 1 or l < 1 or k < 0:
        raise ProblemError("invalid dimensions", [Diagnostic("dims", f"need n >= 1, l >= 1, k >= 0; got n={n}, l={l}, k={k}")])

    skeleton = ControlProblem(n=n, l=l, k=k, t1=t1, dynamics=(), running_cost=None, q0=(), state_prefix=prefix, sense=sense)
    states = skeleton.state_names

    lines = _require(sections, "dynamics")
    if len(lines) != n:
        raise ProblemError("dimension mismatch", [Diagnostic("dynamics", f"expected {n} expressions, got {len(lines)}")])
    dynamics = tuple(_expr(ln.text, skeleton.dynamics_symbols, ln, ln.column) for ln in lines)

    matrices = {}
    for name in ("port_A", "port_B"):
        lines = sections.get(name, [])
        if k == 0 and not lines:
            matrices[name] = ()
            continue
        if name not in sections:
            raise ProblemError(f"missing mandatory section [{name}]", [Diagnostic(name, "missing")])
        if len(lines) != n * k:
            raise ProblemError("dimension mismatch", [Diagnostic(name, f"expected {n * k} entries, got {len(lines)}")])
        entries = [_expr(ln.text, skeleton.port_symbols, ln, ln.column) for ln in lines]
        matrices[name] = tuple(tuple(entries[i * k:(i + 1) * k]) for i in range(n))

    lines = _require(sections, "cost")
    if len(lines) != 1:
        raise ProblemSyntaxError("[cost] takes exactly one expression", lines[-1].number if lines else 0)
    cost = _expr(lines[0].text, skeleton.cost_symbols, lines[0], lines[0].column)

    bounds = []
    for ln in sections.get("bounds", []):
        parts = ln.text.split()
        if len(parts) != 2:
            raise ProblemSyntaxError("expected 'lo hi'", ln.number, ln.column)
        bounds.append((_number(parts[0], ln), _number(parts[1], ln)))
    if "bounds" in sections and len(bounds) != l:
        raise ProblemError("dimension mismatch", [Diagnostic("control_bounds", f"expected {l} intervals, got {len(bounds)}")])

    f_signals, fp_signals = _parse_signals(sections.get("signals", []), k)

    q0 = None
    terminal = []
    for ln in _require(sections, "boundary"):
        key, value, column = _key_value(ln)
        if key == "q0":
            if q0 is not None:
                raise ProblemSyntaxError("duplicate q0", ln.number, ln.column)
            q0 = tuple(_number(v, ln, column) for v in value.split())
            if len(q0) != n:
                raise ProblemError("dimension mismatch", [Diagnostic("q0", f"expected {n} values, got {len(q0)}")])
        elif key.startswith("terminal"):
            state = key[len("terminal"):].strip()
            if state not in states:
                raise ProblemSyntaxError(f"unknown state {state!r} in terminal constraint", ln.number, ln.column)
            terminal.append((states.index(state), _number(value, ln, column)))
        else:
            raise ProblemSyntaxError(f"unknown [boundary] key {key!r}", ln.number, ln.column)
    if q0 is None:
        raise ProblemError("missing mandatory field q0 in [boundary]", [Diagnostic("q0", "missing")])

    problem = ControlProblem(
        n=n, l=l, k=k, t1=t1, dynamics=dynamics, running_cost=cost, q0=q0,
        port_A=matrices["port_A"], port_B=matrices["port_B"],
        control_bounds=tuple(bounds), port_signal_f=f_signals, port_signal_fprime=fp_signals,
        terminal=tuple(terminal), state_prefix=prefix, sense=sense,
    )
    diags = validate(problem)
    if diags:
        raise ProblemError("invalid control problem", diags)
    return problem


def _parse_signals(lines: list, k: int) -> tuple:
    found: dict = {}
    table = None
    for ln in lines:
        if "=" not in ln.text:
            if table is None:
                raise ProblemSyntaxError("table row outside a table signal", ln.number, ln.column)
            parts = ln.text.split()
            if len(parts) != 2:
                raise ProblemSyntaxError("expected 'time value' table row", ln.number, ln.column)
            table.append((_number(parts[0], ln), _number(parts[1], ln)))
            continue
        key, value, column = _key_value(ln)
        m = re.fullmatch(r"(f|fprime)([1-9][0-9]*)", key)
        if not m or int(m.group(2)) > k:
            raise ProblemSyntaxError(f"unknown signal {key!r}", ln.number, ln.column)
        if key in found:
            raise ProblemSyntaxError(f"duplicate signal {key!r}", ln.number, ln.column)
        table = None
        if value == "table":
            table = []
            found[key] = table
        elif value == "linked":
            if m.group(1) != "fprime":
                raise ProblemSyntaxError("only fprime signals can be linked", ln.number, column)
            found[key] = LinkedSignal()
        else:
            found[key] = ExprSignal(_expr(value, ("t",), ln, column))

    def build(key):
        if key not in found:
            raise ProblemError(f"missing mandatory signal {key}", [Diagnostic("signals", f"{key} missing")])
        s = found[key]
        if isinstance(s, list):
            if not s:
                raise ProblemError(f"empty table for {key}", [Diagnostic("signals", f"{key} table is empty")])
            return TableSignal(tuple(r[0] for r in s), tuple(r[1] for r in s))
        return s

    f = tuple(build(f"f{j + 1}") for j in range(k))
    fp = tuple(build(f"fprime{j + 1}") for j in range(k))
    return f, fp


def read_problem(path) -> ControlProblem:
    return load_problem(Path(path).read_text(encoding="utf-8"))


def _num(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def dump_problem(problem: ControlProblem) -> str:
    """Problem-file text that :func:`load_problem` reads back to an equal problem."""
    p = problem
    out = ["[dims]", f"n = {p.n}", f"l = {p.l}", f"k = {p.k}", f"t1 = {_num(p.t1)}"]
    if p.state_prefix != "q":
        out.append(f"state = {p.state_prefix}")
    if p.sense != "min":
        out.append(f"sense = {p.sense}")
    out += ["", "[dynamics]", *(to_text(e) for e in p.dynamics)]
    if p.k:
        for name, matrix in (("port_A", p.port_A), ("port_B", p.port_B)):
            out += ["", f"[{name}]", *(to_text(e) for row in matrix for e in row)]
    out += ["", "[cost]", to_text(p.running_cost)]
    out += ["", "[bounds]", *(f"{_num(lo)} {_num(hi)}" for lo, hi in p.control_bounds)]
    if p.k:
        out += ["", "[signals]"]
        for prefix, sigs in (("f", p.port_signal_f), ("fprime", p.port_signal_fprime)):
            for j, s in enumerate(sigs):
                key = f"{prefix}{j + 1}"
                if isinstance(s, LinkedSignal):
                    out.append(f"{key} = linked")
                elif isinstance(s, TableSignal):
                    out.append(f"{key} = table")
                    out += [f"{_num(t)} {_num(v)}" for t, v in zip(s.times, s.values)]
                else:
                    out.append(f"{key} = {s.to_text()}")
    out += ["", "[boundary]", "q0 = " + " ".join(_num(v) for v in p.q0)]
    names = p.state_names
    out += [f"terminal {names[i]} = {_num(v)}" for i, v in p.terminal]
    return "\n".join(out) + "\n"

"""Scalar arithmetic expressions: parsing, evaluation, symbolic derivatives.

Expressions are immutable trees of frozen dataclasses, so two expressions
compare equal exactly when they are structurally identical.  Besides the
tree-walking evaluator, expressions can be compiled to plain Python source
(:func:`compile_block`) which is what the integrators use in their inner
loops; the tree evaluator is kept for diagnostics and as a test oracle.

Grammar (highest precedence first)::

    primary  := number | name | name '(' args ')' | '(' expr ')'
    power    := primary ['^' unary]          # right associative
    unary    := ('-' | '+') unary | power
    term     := unary (('*' | '/') unary)*
    expr     := term (('+' | '-') term)*

Exponents must reduce to a numeric constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Neg", "BinOp", "Call",
    "ExprError", "ParseError", "UnknownSymbolError", "UnknownFunctionError",
    "ArityError", "EvaluationError", "UnboundVariableError", "DomainError",
    "FUNCTIONS", "parse", "evaluate", "diff", "to_text", "symbols",
    "substitute", "simplify", "is_zero", "CompiledBlock", "compile_block",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax error; ``offset`` is the byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.message = message
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class UnknownSymbolError(ParseError):
    pass


class UnknownFunctionError(ParseError):
    pass


class ArityError(ParseError):
    pass


class EvaluationError(ExprError):
    pass


class UnboundVariableError(EvaluationError):
    pass


class DomainError(EvaluationError):
    """Arithmetic outside a function's domain; ``node`` is the failing subtree."""

    def __init__(self, message: str, node: "Expr | None" = None):
        self.node = node
        where = f" in '{to_text(node)}'" if node is not None else ""
        super().__init__(message + where)


# ---------------------------------------------------------------------------
# nodes


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    func: str
    args: tuple


# name -> arity.  ``sign`` and ``step`` appear in derivatives of abs/min/max;
# they are ordinary functions so that derivatives print and parse back.
FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "min": 2, "max": 2, "sign": 1, "step": 1,
}

_KINKED = {"abs", "min", "max", "sign", "step"}


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, allowed: Iterable[str] | None):
        self.source = source
        self.allowed = None if allowed is None else frozenset(allowed)
        self.tokens = self._tokenize()
        self.pos = 0

    def _error(self, cls, message, index):
        return cls(message, _byte_offset(self.source, index), self.source)

    def _tokenize(self):
        src = self.source
        out = []
        i = 0
        while True:
            while i < len(src) and src[i].isspace():
                i += 1
            if i >= len(src):
                break
            m = _TOKEN.match(src, i)
            if m is None or m.end() == i:
                raise self._error(ParseError, f"unexpected character {src[i]!r}", i)
            kind = m.lastgroup
            start = m.start(kind)
            out.append((kind, m.group(kind), start))
            i = m.end()
        out.append(("end", "", len(src)))
        return out

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        kind, value, index = self.take()
        if value != text or kind != "op":
            found = "end of input" if kind == "end" else repr(value)
            raise self._error(ParseError, f"expected {text!r}, found {found}", index)

    def parse(self) -> Expr:
        node = self.expr()
        kind, value, index = self.peek()
        if kind != "end":
            raise self._error(ParseError, f"unexpected {value!r}", index)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        if kind == "op" and value == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        kind, value, index = self.peek()
        if kind == "op" and value == "^":
            self.take()
            start = self.peek()[2]
            exponent = _fold_constant(self.unary())
            if not isinstance(exponent, Const):
                raise self._error(ParseError, "exponent must be a numeric constant", start)
            return BinOp("^", base, exponent)
        return base

    def primary(self) -> Expr:
        kind, value, index = self.take()
        if kind == "num":
            number = float(value)
            if not math.isfinite(number):
                raise self._error(ParseError, f"number out of range {value!r}", index)
            return Const(number)
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(value, index)
            if self.allowed is not None and value not in self.allowed:
                raise self._error(UnknownSymbolError, f"unknown symbol {value!r}", index)
            return Var(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise self._error(ParseError, f"unexpected {found}", index)

    def call(self, name, index) -> Expr:
        if name not in FUNCTIONS:
            raise self._error(UnknownFunctionError, f"unknown function {name!r}", index)
        self.expect("(")
        args = []
        if not (self.peek()[1] == ")" and self.peek()[0] == "op"):
            args.append(self.expr())
            while self.peek()[1] == "," and self.peek()[0] == "op":
                self.take()
                args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTIONS[name]:
            raise self._error(
                ArityError,
                f"{name}() takes {FUNCTIONS[name]} argument(s), got {len(args)}",
                index,
            )
        return Call(name, tuple(args))


def parse(source: str, symbols: Iterable[str] | None = None) -> Expr:
    """Parse ``source``; names outside ``symbols`` raise UnknownSymbolError.

    ``symbols=None`` accepts any name.
    """
    return _Parser(source, symbols).parse()


def _fold_constant(node: Expr) -> Expr:
    if symbols(node):
        return node
    try:
        return Const(float(evaluate(node, {})))
    except EvaluationError:
        return node


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    if isinstance(node, Const) and node.value < 0:
        return _ATOM  # printed with its own parentheses
    return _ATOM


def _format_number(value: float) -> str:
    negative = math.copysign(1.0, value) < 0  # keeps -0.0 distinct from 0
    if math.isfinite(value) and value == int(value) and abs(value) < 1e16:
        text = ("-" if negative else "") + str(abs(int(value)))
    else:
        text = repr(float(value))
    return f"({text})" if negative else text


def to_text(node: Expr) -> str:
    """Canonical text; ``parse(to_text(e)) == e`` for any parsed ``e``."""
    if isinstance(node, Const):
        return _format_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        if _prec(node.arg) < _NEG_PREC:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_text(node.left), to_text(node.right)
        if node.op == "^":
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < p:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression: {node!r}")


# ---------------------------------------------------------------------------
# evaluation


def _sign(x):
    return (x > 0) - (x < 0)


def _step(x):
    return 1.0 if x >= 0 else 0.0


def _apply(node: Call, args: Sequence[float]) -> float:
    name = node.func
    x = args[0]
    try:
        if name == "sin":
            return math.sin(x)
        if name == "cos":
            return math.cos(x)
        if name == "exp":
            return math.exp(x)
        if name == "log":
            if x <= 0:
                raise DomainError(f"log of non-positive value {x!r}", node)
            return math.log(x)
        if name == "sqrt":
            if x < 0:
                raise DomainError(f"sqrt of negative value {x!r}", node)
            return math.sqrt(x)
        if name == "abs":
            return abs(x)
        if name == "sign":
            return float(_sign(x))
        if name == "step":
            return _step(x)
        if name == "min":
            return min(args[0], args[1])
        if name == "max":
            return max(args[0], args[1])
    except (OverflowError, ValueError) as exc:
        raise DomainError(f"{name}: {exc}", node) from None
    raise DomainError(f"unknown function {name!r}", node)


def _power(node: BinOp, base: float, exponent: float) -> float:
    if exponent == int(exponent) and abs(exponent) < 2**31:
        if base == 0 and exponent < 0:
            raise DomainError("zero raised to a negative power", node)
        try:
            return float(base ** int(exponent))
        except OverflowError:
            raise DomainError("overflow in power", node) from None
    if base < 0:
        raise DomainError(f"negative base {base!r} with non-integer exponent", node)
    if base == 0 and exponent < 0:
        raise DomainError("zero raised to a negative power", node)
    try:
        return math.pow(base, exponent)
    except OverflowError:
        raise DomainError("overflow in power", node) from None


def evaluate(node: Expr, env: Mapping[str, float]) -> float:
    """Evaluate in IEEE double precision; domain violations raise DomainError."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise UnboundVariableError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise DomainError("division by zero", node)
            return a / b
        return _power(node, a, b)
    if isinstance(node, Call):
        return _apply(node, [evaluate(a, env) for a in node.args])
    raise TypeError(f"not an expression: {node!r}")


def symbols(node: Expr) -> frozenset:
    """Names of all variables referenced by ``node``."""
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Neg):
        return symbols(node.arg)
    if isinstance(node, BinOp):
        return symbols(node.left) | symbols(node.right)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= symbols(a)
        return out
    return frozenset()


# ---------------------------------------------------------------------------
# simplifying constructors

ZERO = Const(0.0)
ONE = Const(1.0)


def is_zero(node: Expr) -> bool:
    return isinstance(node, Const) and node.value == 0


def _is_one(node: Expr) -> bool:
    return isinstance(node, Const) and node.value == 1


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if isinstance(b, Neg):
        return BinOp("+", a, b.arg)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(a, Const) and a.value == -1:
        return neg(b)
    if isinstance(b, Const) and b.value == -1:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return ZERO
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    return BinOp("/", a, b)


def power(a: Expr, exponent: float) -> Expr:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return a
    if isinstance(a, Const):
        try:
            return Const(_power(BinOp("^", a, Const(exponent)), a.value, exponent))
        except DomainError:
            pass
    return BinOp("^", a, Const(float(exponent)))


def call(name: str, *args: Expr) -> Expr:
    if all(isinstance(a, Const) for a in args):
        try:
            return Const(_apply(Call(name, args), [a.value for a in args]))
        except DomainError:
            pass
    return Call(name, tuple(args))


def simplify(node: Expr) -> Expr:
    """Bottom-up constant folding and identity removal."""
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        return neg(simplify(node.arg))
    if isinstance(node, BinOp):
        a, b = simplify(node.left), simplify(node.right)
        if node.op == "+":
            return add(a, b)
        if node.op == "-":
            return sub(a, b)
        if node.op == "*":
            return mul(a, b)
        if node.op == "/":
            return div(a, b)
        return power(a, b.value)
    if isinstance(node, Call):
        return call(node.func, *(simplify(a) for a in node.args))
    raise TypeError(f"not an expression: {node!r}")


def substitute(node: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, then simplify."""
    def walk(n):
        if isinstance(n, Var):
            return mapping.get(n.name, n)
        if isinstance(n, Neg):
            return Neg(walk(n.arg))
        if isinstance(n, BinOp):
            return BinOp(n.op, walk(n.left), walk(n.right))
        if isinstance(n, Call):
            return Call(n.func, tuple(walk(a) for a in n.args))
        return n
    return simplify(walk(node))


# ---------------------------------------------------------------------------
# differentiation


def diff(node: Expr, var: str, warnings: list | None = None) -> Expr:
    """Exact symbolic derivative of ``node`` with respect to ``var``.

    abs, min and max are differentiated with one-sided conventions: the
    derivative of abs at 0 is 0, and min/max follow their first argument on
    ties.  Each use of such a convention appends a message to ``warnings``.
    """
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if var not in symbols(node):
        return ZERO
    if isinstance(node, Neg):
        return neg(diff(node.arg, var, warnings))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        op = node.op
        if op == "+":
            return add(diff(a, var, warnings), diff(b, var, warnings))
        if op == "-":
            return sub(diff(a, var, warnings), diff(b, var, warnings))
        if op == "*":
            return add(mul(diff(a, var, warnings), b), mul(a, diff(b, var, warnings)))
        if op == "/":
            da, db = diff(a, var, warnings), diff(b, var, warnings)
            if is_zero(db):
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2))
        c = b.value
        return mul(mul(Const(c), power(a, c - 1)), diff(a, var, warnings))
    if isinstance(node, Call):
        name = node.func
        if name in _KINKED and warnings is not None:
            warnings.append(f"{name}() differentiated with a one-sided convention in '{to_text(node)}'")
        if name in ("sign", "step"):
            return ZERO
        if name in ("min", "max"):
            a, b = node.args
            # step(b - a) is 1 when a <= b, so min picks a on ties; max mirrors it
            pick_a = call("step", sub(b, a) if name == "min" else sub(a, b))
            da, db = diff(a, var, warnings), diff(b, var, warnings)
            return add(mul(pick_a, da), mul(sub(ONE, pick_a), db))
        (a,) = node.args
        da = diff(a, var, warnings)
        if name == "sin":
            outer = call("cos", a)
        elif name == "cos":
            outer = neg(call("sin", a))
        elif name == "exp":
            outer = node
        elif name == "log":
            return div(da, a)
        elif name == "sqrt":
            return div(da, mul(Const(2.0), node))
        elif name == "abs":
            outer = call("sign", a)
        else:  # pragma: no cover - FUNCTIONS is closed
            raise ExprError(f"no derivative rule for {name!r}")
        return mul(outer, da)
    raise TypeError(f"not an expression: {node!r}")


# ---------------------------------------------------------------------------
# compilation


def _to_python(node: Expr, names: Mapping[str, str]) -> str:
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return names[node.name]
    if isinstance(node, Neg):
        return f"(-{_to_python(node.arg, names)})"
    if isinstance(node, BinOp):
        a = _to_python(node.left, names)
        if node.op == "^":
            c = node.right.value
            if c == int(c) and 0 < c <= 64:
                return f"({a} ** {int(c)})"
            if c == int(c) and abs(c) <= 64:
                return f"_ipow({a}, {int(c)})"
            return f"_fpow({a}, {c!r})"
        b = _to_python(node.right, names)
        return f"({a} {node.op} {b})"
    if isinstance(node, Call):
        args = ", ".join(_to_python(a, names) for a in node.args)
        return f"_{node.func}({args})"
    raise TypeError(f"not an expression: {node!r}")


def _scalar_ipow(x, n):
    if n < 0 and x == 0:
        raise ZeroDivisionError("zero raised to a negative power")
    return x ** n


def _scalar_sqrt(x):
    return math.sqrt(x)


def _scalar_log(x):
    if x <= 0:
        raise ValueError("log of non-positive value")
    return math.log(x)


_SCALAR_NS = {
    "_sin": math.sin, "_cos": math.cos, "_exp": math.exp, "_log": _scalar_log,
    "_sqrt": _scalar_sqrt, "_abs": abs, "_min": min, "_max": max,
    "_sign": lambda x: float(_sign(x)), "_step": _step,
    "_ipow": _scalar_ipow, "_fpow": math.pow,
}


def _vector_fpow(x, c):
    if np.any(np.asarray(x) < 0):
        raise FloatingPointError("negative base with non-integer exponent")
    return np.power(x, c)


def _vector_log(x):
    if np.any(np.asarray(x) <= 0):
        raise FloatingPointError("log of non-positive value")
    return np.log(x)


_VECTOR_NS = {
    "_sin": np.sin, "_cos": np.cos, "_exp": np.exp, "_log": _vector_log,
    "_sqrt": np.sqrt, "_abs": np.abs, "_min": np.minimum, "_max": np.maximum,
    "_sign": np.sign, "_step": lambda x: np.where(np.asarray(x) >= 0, 1.0, 0.0),
    "_ipow": lambda x, n: np.power(x, float(n)), "_fpow": _vector_fpow,
}

_FAST_ERRORS = (ArithmeticError, ValueError, FloatingPointError)


class CompiledBlock:
    """A group of expressions compiled into one Python function.

    Calling the block with positional arguments (in ``argnames`` order)
    returns a tuple with one value per expression.  Arguments may be floats
    or, via :meth:`vector`, equally shaped numpy arrays.  A domain error in
    the fast path is re-diagnosed with the tree evaluator so that the error
    names the failing subexpression.
    """

    def __init__(self, exprs: Sequence[Expr], argnames: Sequence[str], name: str = "block"):
        self.exprs = tuple(exprs)
        self.argnames = tuple(argnames)
        self.name = name
        ids = {n: f"a{i}" for i, n in enumerate(self.argnames)}
        missing = set().union(*(symbols(e) for e in self.exprs)) - set(ids) if self.exprs else set()
        if missing:
            raise UnboundVariableError(f"{name}: unbound variables {sorted(missing)}")
        body = ", ".join(_to_python(e, ids) for e in self.exprs)
        params = ", ".join(ids[n] for n in self.argnames)
        src = f"def {name}({params}):\n    return ({body}{',' if len(self.exprs) == 1 else ''})\n"
        self.source = src
        scalar_ns = dict(_SCALAR_NS)
        vector_ns = dict(_VECTOR_NS)
        exec(compile(src, f"<{name}>", "exec"), scalar_ns)
        exec(compile(src, f"<{name}>", "exec"), vector_ns)
        self._scalar = scalar_ns[name]
        self._vector = vector_ns[name]

    def __len__(self) -> int:
        return len(self.exprs)

    def __call__(self, *args):
        try:
            return self._scalar(*args)
        except _FAST_ERRORS:
            self._diagnose(args)
            raise

    def vector(self, *args):
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                return self._vector(*args)
        except _FAST_ERRORS as exc:
            raise DomainError(f"{self.name}: {exc}") from None

    def _diagnose(self, args):
        env = dict(zip(self.argnames, (float(a) for a in args)))
        for e in self.exprs:
            evaluate(e, env)
        raise DomainError(f"{self.name}: arithmetic error")


def compile_block(exprs: Sequence[Expr], argnames: Sequence[str], name: str = "block") -> CompiledBlock:
    return CompiledBlock(exprs, argnames, name)


def python_source(node: Expr, names: Mapping[str, str]) -> str:
    """Python expression text for ``node``; ``names`` maps symbols to identifiers."""
    return _to_python(node, names)


def exec_scalar(source: str, name: str, **constants) -> Callable:
    """Define function ``name`` from ``source`` in the scalar math namespace."""
    ns = dict(_SCALAR_NS, **constants)
    exec(compile(source, f"<{name}>", "exec"), ns)
    return ns[name]


def lambdify(node: Expr, argnames: Sequence[str]) -> Callable[..., float]:
    """Scalar function of positional arguments for a single expression."""
    block = CompiledBlock([node], argnames, "expr")
    return lambda *args: block(*args)[0]

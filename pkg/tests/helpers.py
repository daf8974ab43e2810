"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from portpmp.bench import CheapestStopParams, classic_file
from portpmp.expr import BinOp, Call, Const, Neg, Var, evaluate
from portpmp.model import load_problem

CLASSIC = CheapestStopParams()
PORTED = CheapestStopParams(f="0.1*t", fprime="0.1")


def problem_text(n=1, l=1, t1=1.0, dynamics=("u1",), cost="u1^2", bounds=None,
                 q0=None, terminal=(), k=0, A=(), B=(), signals=(), state="q") -> str:
    lines = ["[dims]", f"n = {n}", f"l = {l}", f"k = {k}", f"t1 = {t1}", f"state = {state}",
             "[dynamics]", *dynamics]
    if k:
        lines += ["[port_A]", *A, "[port_B]", *B]
    lines += ["[cost]", cost]
    if bounds is not None:
        lines += ["[bounds]", *(f"{lo} {hi}" for lo, hi in bounds)]
    if signals:
        lines += ["[signals]", *signals]
    q0 = q0 if q0 is not None else [0.0] * n
    lines += ["[boundary]", "q0 = " + " ".join(str(v) for v in q0)]
    lines += [f"terminal {state}{i + 1} = {v}" for i, v in terminal]
    return "\n".join(lines) + "\n"


def make_problem(**kw):
    return load_problem(problem_text(**kw))


def zero_motion_problem():
    return load_problem(classic_file(CheapestStopParams(x0=0.5, v0=0.0, x1=0.5)))


def smooth_nonquadratic_problem():
    """Double integrator with cost u^2 + 0.1 u^4 on a box: the general argmax route."""
    text = classic_file().replace("u1^2", "u1^2 + 0.1*u1^4").replace("-inf inf", "-5 5")
    return load_problem(text)


def padded_classic(params=CLASSIC):
    """The classic problem with one port whose matrices and signals are all zero."""
    text = classic_file(params).replace("k = 0", "k = 1").replace(
        "[cost]", "[port_A]\n0\n0\n\n[port_B]\n0\n0\n\n[cost]"
    ).replace("[boundary]", "[signals]\nf1 = 0\nfprime1 = 0\n\n[boundary]")
    return load_problem(text)


# random smooth expressions ----------------------------------------------------

VARS = ("x", "y", "z")


def random_smooth_expr(rng: np.random.Generator, depth: int = 3):
    """Random expression that is smooth everywhere (no poles, no kinks)."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.35:
            return Const(float(np.round(rng.uniform(-3, 3), 3)))
        return Var(VARS[int(rng.integers(len(VARS)))])
    a = random_smooth_expr(rng, depth - 1)
    kind = int(rng.integers(10))
    if kind == 0:
        return Neg(a)
    if kind in (1, 2, 3):
        b = random_smooth_expr(rng, depth - 1)
        return BinOp("+-*"[kind - 1], a, b)
    if kind == 4:
        # a / (1 + b^2) never divides by zero
        b = random_smooth_expr(rng, depth - 1)
        return BinOp("/", a, BinOp("+", Const(1.0), BinOp("^", b, Const(2.0))))
    if kind == 5:
        return BinOp("^", a, Const(float(rng.integers(2, 4))))
    if kind == 6:
        return Call(["sin", "cos"][int(rng.integers(2))], (a,))
    if kind == 7:
        return Call("exp", (Call("sin", (a,)),))
    if kind == 8:
        return Call("log", (BinOp("+", Const(1.0), BinOp("^", a, Const(2.0))),))
    return Call("sqrt", (BinOp("+", Const(2.0), Call("cos", (a,))),))


def sample_pair(rng: np.random.Generator, depth: int = 3) -> tuple:
    """(expr, env) with moderate magnitude at env, so a difference quotient is a fair oracle."""
    while True:
        e = random_smooth_expr(rng, depth)
        env = {v: float(rng.uniform(-2, 2)) for v in VARS}
        if abs(evaluate(e, env)) <= 1e4:
            return e, env


def fd_derivative(expr, env: dict, var: str) -> float:
    """Central difference of ``expr`` in ``var`` with Ridders' extrapolation.

    The step shrinks geometrically from 0.01 and the tableau entry with the
    smallest error estimate wins, so fast oscillations do not fool it.
    """
    x = env[var]

    def at(v):
        return evaluate(expr, {**env, var: v})

    h, con = 0.01 * max(1.0, abs(x)), 1.4
    table = [[(at(x + h) - at(x - h)) / (2 * h)]]
    best, err = table[0][0], math.inf
    for i in range(1, 20):
        h /= con
        row = [(at(x + h) - at(x - h)) / (2 * h)]
        fac = con * con
        for j in range(1, i + 1):
            row.append((row[j - 1] * fac - table[i - 1][j - 1]) / (fac - 1))
            fac *= con * con
            e = max(abs(row[j] - row[j - 1]), abs(row[j] - table[i - 1][j - 1]))
            if e <= err:
                best, err = row[j], e
        table.append(row)
    return best


def isclose_rel(a, b, rel):
    return abs(a - b) <= rel * (1 + abs(b))


def linear_fit_residual(t, u) -> float:
    coef = np.polyfit(t, u, 1)
    return float(np.max(np.abs(np.polyval(coef, t) - u)))


"""Cheapest Stop benchmark: brake a double integrator to rest at a target.

Classic form::

    x1' = x2,  x2' = u,  x(0) = (x0, v0),  x1(t1) = x1_target,  x2(t1) = 0,
    minimise  integral of u^2 over [0, t1].

The ported form adds one port (k = 1) with constant columns A and B, a
reuse signal f(t) and a lift signal f'(t)::

    x' = (x2, u) + B f',   e1 = A^T (x2, u),   e2 = B^T (x2, u),
    minimise  integral of u^2 + (e1 + e2) f.

e1 is the problem's port output; e2 is written into the cost directly.
The classic optimum is linear in time, u(t) = alpha*t + beta, which gives
a closed-form oracle (:func:`analytic_classic`).
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import Const, Var, add, mul, parse, to_text
from .model import ControlProblem, ExprSignal, check_problem, dump_problem

__all__ = ["CheapestStopParams", "classic_problem", "ported_problem", "analytic_classic",
           "classic_file", "ported_file"]


@dataclass(frozen=True)
class CheapestStopParams:
    x0: float = 0.0
    v0: float = 1.0
    x1: float = 1.0
    t1: float = 1.0
    A: tuple = (1.0, 0.0)
    B: tuple = (0.0, 1.0)
    f: str = "0"        # reuse signal f(t), expression in t
    fprime: str = "0"   # lift signal f'(t), expression in t

    def check(self):
        if not self.t1 > 0:
            raise ValueError(f"t1 must be > 0, got {self.t1!r}")
        if len(self.A) != 2 or len(self.B) != 2:
            raise ValueError("A and B must be columns of length 2")


def _base(params: CheapestStopParams) -> dict:
    params.check()
    return dict(
        n=2, l=1, t1=float(params.t1),
        dynamics=(Var("x2"), Var("u1")),
        q0=(float(params.x0), float(params.v0)),
        terminal=((0, float(params.x1)), (1, 0.0)),
        state_prefix="x",
    )


def classic_problem(params: CheapestStopParams = CheapestStopParams()) -> ControlProblem:
    return check_problem(ControlProblem(k=0, running_cost=parse("u1^2"), **_base(params)))


def ported_problem(params: CheapestStopParams = CheapestStopParams()) -> ControlProblem:
    base = _base(params)
    a = tuple((Const(float(v)),) for v in params.A)
    b = tuple((Const(float(v)),) for v in params.B)
    drift = base["dynamics"]
    e2 = add(mul(b[0][0], drift[0]), mul(b[1][0], drift[1]))
    cost = parse(f"u1^2 + (e1 + {to_text(e2)})*f1")
    return check_problem(ControlProblem(
        k=1, running_cost=cost, port_A=a, port_B=b,
        port_signal_f=(ExprSignal(parse(params.f, ("t",))),),
        port_signal_fprime=(ExprSignal(parse(params.fprime, ("t",))),),
        **base,
    ))


def analytic_classic(params: CheapestStopParams = CheapestStopParams()) -> tuple:
    """Exact (alpha, beta, J*) of the linear optimal control u = alpha*t + beta.

    Solves  v0 + beta*t1 + alpha*t1^2/2 = 0  and
    x0 + v0*t1 + beta*t1^2/2 + alpha*t1^3/6 = x1  by Cramer's rule.
    """
    params.check()
    x0, v0, x1, t1 = (float(v) for v in (params.x0, params.v0, params.x1, params.t1))
    a11, a12, b1 = t1 ** 2 / 2, t1, -v0
    a21, a22, b2 = t1 ** 3 / 6, t1 ** 2 / 2, x1 - x0 - v0 * t1
    det = a11 * a22 - a12 * a21  # t1^4 / 12
    alpha = (b1 * a22 - a12 * b2) / det
    beta = (a11 * b2 - a21 * b1) / det
    cost = alpha ** 2 * t1 ** 3 / 3 + alpha * beta * t1 ** 2 + beta ** 2 * t1
    return alpha, beta, cost


def classic_file(params: CheapestStopParams = CheapestStopParams()) -> str:
    return "# Cheapest Stop, classic\n" + dump_problem(classic_problem(params))


def ported_file(params: CheapestStopParams = CheapestStopParams()) -> str:
    return "# Cheapest Stop with a lift/reuse port\n" + dump_problem(ported_problem(params))

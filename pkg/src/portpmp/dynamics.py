"""Port-controlled equations of motion, outputs, Hamiltonians and the adjoint.

For a problem with drift ``F_u(q)``, port matrices ``A(q)``, ``B(q)`` and
running cost ``phi`` the quantities evaluated here are::

    qdot      = F_u(q) + B(q) f'
    e         = A(q)^T F_u(q)
    e'        = B(q)^T (dF_u/dq)^T lam
    h         = <lam, F_u(q)>
    h_ext     = h + I + nu * phi(q, u, e)
    lamdot    = -(dF_u/dq)^T lam - nu * dphi/dq + A(q) f
    ydot      = phi,    Idot = e.f + e'.f'

``phi`` is differentiated with ``e`` substituted, so ``dphi/dq`` is the total
derivative.  For ``sense = max`` problems phi is negated everywhere except
in the reported cost ``y``, so that ``nu <= 0`` always means minimisation.

All expressions of a problem are assembled once into a :class:`PortSystem`
and compiled; the module-level point functions and :func:`rk4_integrate`
work on top of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .expr import (
    ZERO, Const, Expr, ExprError, Var, add, compile_block, diff, mul, neg,
    python_source, exec_scalar, sub, substitute, symbols,
)
from .model import ControlProblem, LinkedSignal

__all__ = [
    "PortSystem", "Trajectory", "IntegrationError", "system_for",
    "vector_field", "output_e", "output_eprime", "hamiltonian",
    "extended_hamiltonian", "adjoint_rhs", "rk4_integrate",
]

NU = "_nu"


def _lam(i: int) -> str:
    return f"_lam{i + 1}"


def _sum(terms) -> Expr:
    out = ZERO
    for term in terms:
        out = add(out, term)
    return out


class IntegrationError(RuntimeError):
    """Integration aborted at grid step ``step`` (time ``time``)."""

    def __init__(self, message: str, step: int, time: float, cause: Exception | None = None):
        self.step = step
        self.time = time
        self.cause = cause
        super().__init__(f"step {step} (t={time:.6g}): {message}")


class PortSystem:
    """Compiled evaluators for one problem.

    ``grid_step`` is the spacing used for linked (differentiated) f' signals.
    """

    def __init__(self, problem: ControlProblem, grid_step: float | None = None):
        p = problem
        self.problem = p
        self.n, self.l, self.k = p.n, p.l, p.k
        self.grid_step = float(grid_step) if grid_step else p.t1 / 1000
        self.sign = -1.0 if p.sense == "max" else 1.0

        states = p.state_names
        controls = p.control_names
        lams = tuple(_lam(i) for i in range(p.n))
        fs, fps = p.signal_names, p.signal_prime_names
        self.names = dict(states=states, controls=controls, lams=lams, f=fs, fprime=fps)

        F = list(p.dynamics)
        A = [list(row) for row in p.port_A] if p.k else [[] for _ in range(p.n)]
        B = [list(row) for row in p.port_B] if p.k else [[] for _ in range(p.n)]
        lam = [Var(x) for x in lams]
        nu = Var(NU)

        e = [_sum(mul(A[i][j], F[i]) for i in range(p.n)) for j in range(p.k)]
        phi = substitute(p.running_cost, dict(zip(p.output_names, e)))
        phi_obj = phi if self.sign > 0 else neg(phi)
        jac = [[diff(F[m], q) for q in states] for m in range(p.n)]
        dh_dq = [_sum(mul(lam[m], jac[m][i]) for m in range(p.n)) for i in range(p.n)]
        eprime = [_sum(mul(B[i][j], dh_dq[i]) for i in range(p.n)) for j in range(p.k)]
        qdot = [add(F[i], _sum(mul(B[i][j], Var(fps[j])) for j in range(p.k))) for i in range(p.n)]
        lamdot = [
            add(sub(neg(dh_dq[i]), mul(nu, diff(phi_obj, states[i]))),
                _sum(mul(A[i][j], Var(fs[j])) for j in range(p.k)))
            for i in range(p.n)
        ]
        ham = _sum(mul(lam[i], F[i]) for i in range(p.n))
        idot = _sum(
            add(mul(e[j], Var(fs[j])), mul(eprime[j], Var(fps[j]))) for j in range(p.k)
        )
        psi = add(ham, mul(nu, phi_obj))
        grad = [diff(psi, u) for u in controls]
        hess = [[diff(g, u) for u in controls] for g in grad]

        self.exprs = dict(
            e=e, eprime=eprime, phi=phi, phi_obj=phi_obj, qdot=qdot, lamdot=lamdot,
            ham=ham, idot=idot, psi=psi, grad=grad, hess=hess, jac=jac,
        )
        control_set = set(controls)
        self.quadratic = all(not (symbols(h) & control_set) for row in hess for h in row)

        T = ("t",)
        full = T + states + lams + controls + fs + fps + (NU,)
        self._field = compile_block(qdot + lamdot + [phi, idot], full, "field")
        self._forward = compile_block(qdot + [phi_obj], T + states + controls + fs + fps, "forward")
        self._qdot = compile_block(qdot, T + states + controls + fps, "qdot")
        self._outputs = compile_block(e + eprime, T + states + lams + controls, "outputs")
        self._ham = compile_block([ham], T + states + lams + controls, "hamiltonian")
        self._phi = compile_block([phi_obj], T + states + controls + fs + fps, "phi")
        self._lamdot = compile_block(lamdot, full, "adjoint")
        self._psi = compile_block([psi], full, "objective")
        self._grad = compile_block(grad, full, "gradient")
        self._hess = compile_block([h for row in hess for h in row], full, "hessian")
        if self.quadratic:
            at_zero = {u: Const(0.0) for u in controls}
            g0 = [substitute(g, at_zero) for g in grad]
            self._quad = compile_block(
                g0 + [h for row in hess for h in row], T + states + lams + fs + fps + (NU,), "quadratic"
            )

    def closed_form_stage(self, bounds) -> Callable | None:
        """Fused argmax + right-hand side for a scalar control with quadratic objective.

        The generated ``stage(t, *q, *lam, *f, *fp, nu)`` returns
        ``(field, u)``, or None whenever the objective is not strictly concave
        at the current stage; callers then take the general route.  It performs
        the same floating-point operations as :class:`HamiltonianMaximizer`.
        """
        if not (self.quadratic and self.l == 1):
            return None
        names = self.names
        lo, hi = (float(b) for b in bounds[0])
        lam_ids = [f"L{i}" for i in range(self.n)]
        norm_ids = [f"N{i}" for i in range(self.n)]
        ids = {"t": "t", NU: "nu"}
        ids.update({x: f"Q{i}" for i, x in enumerate(names["states"])})
        ids.update({x: f"F{j}" for j, x in enumerate(names["f"])})
        ids.update({x: f"P{j}" for j, x in enumerate(names["fprime"])})
        ids[names["controls"][0]] = "U"
        norm = dict(ids, **dict(zip(names["lams"], norm_ids)), **{NU: "NV"})
        full = dict(ids, **dict(zip(names["lams"], lam_ids)))
        g0 = substitute(self.exprs["grad"][0], {names["controls"][0]: Const(0.0)})
        h = self.exprs["hess"][0][0]
        params = ", ".join(["t", *(ids[x] for x in names["states"]), *lam_ids,
                            *(ids[x] for x in names["f"]), *(ids[x] for x in names["fprime"]), "nu"])
        field = [python_source(e, full) for e in self.exprs["qdot"] + self.exprs["lamdot"]]
        field += [python_source(self.exprs["phi"], full), python_source(self.exprs["idot"], full)]
        lines = [
            f"def stage({params}):",
            f"    s = -nu if nu < 0 else max(0.0, {', '.join(f'abs({x})' for x in lam_ids)})",
            "    if s > 0 and s != 1.0:",
            *(f"        {m} = {x} / s" for m, x in zip(norm_ids, lam_ids)),
            "        NV = nu / s",
            "    elif s == 0:",
            *(f"        {m} = 0.0" for m in norm_ids),
            "        NV = 0.0",
            "    else:",
            *(f"        {m} = {x}" for m, x in zip(norm_ids, lam_ids)),
            "        NV = nu",
            f"    g = {python_source(g0, norm)}",
            f"    h = {python_source(h, norm)}",
            "    if not h < 0:",
            "        return None",
            "    U = min(max(-g / h, LO), HI)",
            f"    return ({', '.join(field)},), U",
        ]
        return exec_scalar("\n".join(lines) + "\n", "stage", LO=lo, HI=hi)

    # signals ------------------------------------------------------------------
    def signals(self, t: float) -> tuple:
        p = self.problem
        if not p.k:
            return (), ()
        f = tuple(s(t) for s in p.port_signal_f)
        fp = []
        for j, s in enumerate(p.port_signal_fprime):
            if isinstance(s, LinkedSignal):
                d = self.grid_step
                src = p.port_signal_f[j]
                fp.append((src(t + d) - src(t - d)) / (2 * d))
            else:
                fp.append(s(t))
        return f, tuple(fp)

    # evaluators ------------------------------------------------------------------
    def field(self, t, q, lam, u, f, fp, nu) -> tuple:
        """Time derivative of the packed state (q, lam, y, I)."""
        return self._field(t, *q, *lam, *u, *f, *fp, nu)

    def forward(self, t, q, u, f, fp) -> tuple:
        """(qdot, phi_obj); arguments may be numpy arrays of a common shape."""
        return self._forward.vector(t, *q, *u, *f, *fp)

    def outputs(self, t, q, lam, u) -> tuple:
        v = self._outputs(t, *q, *lam, *u)
        return v[: self.k], v[self.k:]

    def objective(self, t, q, lam, u, f, fp, nu) -> float:
        """u-dependent part of the extended Hamiltonian: <lam, F_u> + nu*phi."""
        return self._psi(t, *q, *lam, *u, *f, *fp, nu)[0]

    def objective_line(self, t, q, lam, u, j, xs, f, fp, nu) -> np.ndarray:
        """Objective at many values ``xs`` of control ``j``, the others fixed at ``u``."""
        xs = np.asarray(xs, dtype=float)
        args = list(u)
        args[j] = xs
        return np.broadcast_to(self._psi.vector(t, *q, *lam, *args, *f, *fp, nu)[0], xs.shape)

    def objective_gradient(self, t, q, lam, u, f, fp, nu) -> tuple:
        return self._grad(t, *q, *lam, *u, *f, *fp, nu)

    def objective_hessian(self, t, q, lam, u, f, fp, nu) -> np.ndarray:
        return np.array(self._hess(t, *q, *lam, *u, *f, *fp, nu)).reshape(self.l, self.l)

    def quadratic_parts(self, t, q, lam, f, fp, nu) -> tuple:
        """(gradient at u=0, Hessian) of the objective; only for quadratic objectives."""
        v = self._quad(t, *q, *lam, *f, *fp, nu)
        return v[: self.l], v[self.l:]


@lru_cache(maxsize=64)
def system_for(problem: ControlProblem, grid_step: float | None = None) -> PortSystem:
    return PortSystem(problem, grid_step)


# ---------------------------------------------------------------------------
# point operations


def vector_field(problem: ControlProblem, q, u, fprime=None, t: float = 0.0) -> np.ndarray:
    """F_u(q) + B(q) f'; ``fprime`` defaults to the problem's own f' signal at ``t``."""
    s = system_for(problem)
    fprime = s.signals(t)[1] if fprime is None else tuple(fprime)
    if len(fprime) != problem.k:
        raise ValueError(f"expected {problem.k} f' values, got {len(fprime)}")
    return np.array(s._qdot(t, *q, *u, *fprime))


def output_e(problem: ControlProblem, q, u, t: float = 0.0) -> np.ndarray:
    """A(q)^T F_u(q)."""
    s = system_for(problem)
    return np.array(s.outputs(t, q, (0.0,) * problem.n, u)[0])


def output_eprime(problem: ControlProblem, q, lam, u, t: float = 0.0) -> np.ndarray:
    """B(q)^T (dF_u/dq)^T lam."""
    s = system_for(problem)
    return np.array(s.outputs(t, q, lam, u)[1])


def hamiltonian(problem: ControlProblem, lam, q, u, t: float = 0.0) -> float:
    return system_for(problem)._ham(t, *q, *lam, *u)[0]


def extended_hamiltonian(problem: ControlProblem, lam, q, u, t: float = 0.0, nu: float = -1.0, I: float = 0.0) -> float:
    """h + I + nu * phi(q, u, e(q, u, t)) with the problem's signals at ``t``."""
    s = system_for(problem)
    f, fp = s.signals(t)
    return s._ham(t, *q, *lam, *u)[0] + I + nu * s._phi(t, *q, *u, *f, *fp)[0]


def adjoint_rhs(problem: ControlProblem, lam, q, u, f=None, t: float = 0.0, nu: float = -1.0) -> np.ndarray:
    """-(dF_u/dq)^T lam - nu * dphi/dq + A(q) f; ``f`` defaults to the problem's signal at ``t``."""
    s = system_for(problem)
    f_default, fp = s.signals(t)
    f = f_default if f is None else tuple(f)
    if len(f) != problem.k:
        raise ValueError(f"expected {problem.k} f values, got {len(f)}")
    return np.array(s._lamdot(t, *q, *lam, *u, *f, *fp, nu))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    f: np.ndarray
    fprime: np.ndarray
    e: np.ndarray
    eprime: np.ndarray
    y: np.ndarray
    I: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.t) - 1

    def columns(self, problem: ControlProblem | None = None) -> list:
        n, l, k = self.q.shape[1], self.u.shape[1], self.f.shape[1]
        states = problem.state_names if problem is not None else tuple(f"q{i + 1}" for i in range(n))
        return (
            ["t", *states, *(f"lambda{i + 1}" for i in range(n)), *(f"u{j + 1}" for j in range(l)),
             *(f"f{j + 1}" for j in range(k)), *(f"fprime{j + 1}" for j in range(k)),
             *(f"e{j + 1}" for j in range(k)), *(f"eprime{j + 1}" for j in range(k)), "y", "I"]
        )

    def as_array(self) -> np.ndarray:
        return np.column_stack(
            [self.t, self.q, self.lam, self.u, self.f, self.fprime, self.e, self.eprime, self.y, self.I]
        )

    def max_difference(self, other: "Trajectory") -> float:
        """Largest per-node difference over t, q, lam, u, y (port columns excluded)."""
        pairs = [(self.t, other.t), (self.q, other.q), (self.lam, other.lam), (self.u, other.u),
                 (self.y, other.y)]
        return max(float(np.max(np.abs(a - b))) if a.size else 0.0 for a, b in pairs)


Control = Callable[[float, Sequence[float], Sequence[float], tuple, tuple], tuple]


def rk4_integrate(
    system: PortSystem | ControlProblem,
    q0: Sequence[float],
    lam0: Sequence[float] | None = None,
    *,
    control: Control,
    nu: float = -1.0,
    steps: int = 1000,
    record: bool = True,
    fused: Callable | None = None,
):
    """Classical fourth-order Runge-Kutta for the coupled (q, lam, y, I) system.

    ``control(t, q, lam, f, fp)`` supplies u at every stage, either as a
    feedback law (Hamiltonian maximisation) or open loop.  ``fused``, when
    given, is tried first (see :meth:`PortSystem.closed_form_stage`).  Returns a
    :class:`Trajectory` on the uniform grid ``t_i = t1*i/steps``, or only the
    final packed state when ``record`` is false.
    """
    if steps < 2:
        raise ValueError(f"need at least 2 steps, got {steps}")
    if isinstance(system, ControlProblem):
        system = system_for(system, system.t1 / steps)
    n = system.n
    t1 = system.problem.t1
    h = t1 / steps
    x = [float(v) for v in q0] + [float(v) for v in (lam0 if lam0 is not None else (0.0,) * n)] + [0.0, 0.0]
    if len(x) != 2 * n + 2:
        raise ValueError("initial values have the wrong dimension")
    signals = system.signals
    field = system.field
    size = len(x)

    def stage(t, xs):
        f, fp = signals(t)
        if fused is not None:
            out = fused(t, *xs[:2 * n], *f, *fp, nu)
            if out is not None:
                return out[0], (out[1],), f, fp
        q = xs[:n]
        lam = xs[n:2 * n]
        u = control(t, q, lam, f, fp)
        return field(t, q, lam, u, f, fp, nu), u, f, fp

    if record:
        xs_rec = np.empty((steps + 1, size))
        u_rec = np.empty((steps + 1, system.l))
        f_rec = np.empty((steps + 1, system.k))
        fp_rec = np.empty((steps + 1, system.k))

    i = 0
    t = 0.0
    try:
        for i in range(steps):
            t = t1 * i / steps
            k1, u, f, fp = stage(t, x)
            if record:
                xs_rec[i] = x
                u_rec[i] = u
                f_rec[i] = f
                fp_rec[i] = fp
            th = t + 0.5 * h
            k2 = stage(th, [x[m] + 0.5 * h * k1[m] for m in range(size)])[0]
            k3 = stage(th, [x[m] + 0.5 * h * k2[m] for m in range(size)])[0]
            tn = t1 * (i + 1) / steps
            k4 = stage(tn, [x[m] + h * k3[m] for m in range(size)])[0]
            x = [x[m] + h / 6.0 * (k1[m] + 2.0 * (k2[m] + k3[m]) + k4[m]) for m in range(size)]
            if not all(math.isfinite(v) for v in x):
                raise IntegrationError("non-finite value encountered", i + 1, tn)
        i = steps
        t = t1
        if record:
            _, u, f, fp = stage(t1, x)
            xs_rec[steps] = x
            u_rec[steps] = u
            f_rec[steps] = f
            fp_rec[steps] = fp
    except IntegrationError:
        raise
    except (ExprError, ArithmeticError, ValueError) as exc:
        raise IntegrationError(str(exc), i, t, exc) from exc

    if not record:
        return x
    grid = t1 * np.arange(steps + 1) / steps
    e_rec = np.empty((steps + 1, system.k))
    ep_rec = np.empty((steps + 1, system.k))
    if system.k:
        for m in range(steps + 1):
            e_rec[m], ep_rec[m] = system.outputs(grid[m], xs_rec[m, :n], xs_rec[m, n:2 * n], u_rec[m])
    return Trajectory(
        t=grid, q=xs_rec[:, :n], lam=xs_rec[:, n:2 * n], u=u_rec, f=f_rec, fprime=fp_rec,
        e=e_rec, eprime=ep_rec, y=xs_rec[:, 2 * n], I=xs_rec[:, 2 * n + 1],
    )

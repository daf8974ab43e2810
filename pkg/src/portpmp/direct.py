"""Direct transcription: an independent oracle for the indirect solver.

The control is piecewise constant on ``N_d`` equal intervals.  A fixed-step
RK4 rollout under that control gives the running cost and the terminal
defects; terminal conditions enter as a quadratic penalty whose weight is
raised from 1e2 to 1e8 across warm-started rounds.  Each round is a
projected gradient descent with central-difference gradients and a
backtracking line search.

Gradients are formed from ``2 * dims`` perturbed rollouts evaluated as one
numpy batch, which keeps desk-scale problems (a few hundred unknowns) fast
without any external optimiser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dynamics import system_for
from .expr import ExprError
from .model import ControlProblem, check_problem

__all__ = [
    "TranscribedObjective", "DirectSolution", "CompareReport", "transcribe", "optimize",
    "compare", "DirectTranscriptionSolver", "PENALTY_SCHEDULE", "MAX_DIMS",
]

PENALTY_SCHEDULE = tuple(10.0 ** p for p in range(2, 9))
MAX_DIMS = 512
DEFECT_TOL = 1e-3
_MEMORY = 10


class TranscribedObjective:
    """Penalised cost of a piecewise-constant control, ``u`` flattened interval-major.

    ``u.reshape(intervals, l)[i]`` is the control on interval ``i``.
    """

    def __init__(self, problem: ControlProblem, intervals: int, substeps: int = 2,
                 rho: float = PENALTY_SCHEDULE[0]):
        if int(intervals) < 2:
            raise ValueError(f"need at least 2 intervals, got {intervals!r}")
        if int(substeps) < 1:
            raise ValueError("substeps must be positive")
        self.problem = problem
        self.intervals = int(intervals)
        self.substeps = int(substeps)
        self.rho = float(rho)
        self.dims = problem.l * self.intervals
        self.bounds = [tuple(map(float, b)) for b in problem.control_bounds] * self.intervals
        self.steps = self.intervals * self.substeps
        self.h = problem.t1 / self.steps
        self.system = system_for(problem, self.h)
        # signal values at every RK4 stage time, shared by all rollouts
        self._signals = []
        for s in range(self.steps):
            t = problem.t1 * s / self.steps
            self._signals.append([self.system.signals(x) for x in (t, t + self.h / 2, t + self.h)])

    def with_rho(self, rho: float) -> "TranscribedObjective":
        out = object.__new__(TranscribedObjective)
        out.__dict__.update(self.__dict__)
        out.rho = float(rho)
        return out

    def rollout(self, U) -> tuple:
        """Costs (``m``,) and terminal defects (``m``, constraints) for controls ``U`` (``m``, dims)."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        m = U.shape[0]
        p = self.problem
        n, l = p.n, p.l
        controls = U.reshape(m, self.intervals, l)
        q = [np.full(m, float(v)) for v in p.q0]
        y = np.zeros(m)
        h = self.h
        forward = self.system.forward

        def rhs(t, state, u, sig):
            out = forward(t, state, u, *sig)
            return [np.broadcast_to(v, (m,)) for v in out]

        for s in range(self.steps):
            t = p.t1 * s / self.steps
            u = [controls[:, s // self.substeps, j] for j in range(l)]
            s0, s1, s2 = self._signals[s]
            k1 = rhs(t, q, u, s0)
            k2 = rhs(t + h / 2, [q[i] + h / 2 * k1[i] for i in range(n)], u, s1)
            k3 = rhs(t + h / 2, [q[i] + h / 2 * k2[i] for i in range(n)], u, s1)
            k4 = rhs(t + h, [q[i] + h * k3[i] for i in range(n)], u, s2)
            y = y + h / 6 * (k1[n] + 2 * k2[n] + 2 * k3[n] + k4[n])
            q = [q[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(n)]
        defects = np.column_stack([q[i] - target for i, target in p.terminal]) if p.terminal else np.zeros((m, 0))
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(defects))):
            raise FloatingPointError("non-finite value in rollout")
        return y, defects

    def batch(self, U) -> np.ndarray:
        cost, defects = self.rollout(U)
        return cost + self.rho * np.sum(defects ** 2, axis=1)

    def __call__(self, u) -> float:
        return float(self.batch(np.asarray(u, dtype=float)[None, :])[0])

    def cost(self, u) -> float:
        """Running cost in the problem's own sense (no penalty)."""
        value = float(self.rollout(np.asarray(u, dtype=float)[None, :])[0][0])
        return -value if self.problem.sense == "max" else value

    def defect(self, u) -> np.ndarray:
        return self.rollout(np.asarray(u, dtype=float)[None, :])[1][0]


def transcribe(problem: ControlProblem, intervals: int, substeps: int = 2) -> TranscribedObjective:
    """Penalised objective over ``R^(l * intervals)`` for ``problem``."""
    return TranscribedObjective(check_problem(problem), intervals, substeps)


@dataclass
class DirectSolution:
    x: np.ndarray            # flat control vector
    controls: np.ndarray     # (intervals, l); (dims, 1) for a plain objective
    edges: np.ndarray        # interval boundaries in time
    cost: float              # J_d, penalty excluded
    objective: float         # penalised value at the last round
    defect_norm: float
    iterations: int
    converged: bool
    rho: float = math.nan
    defect_tol: float = DEFECT_TOL

    def control_at(self, t) -> np.ndarray:
        """Piecewise-constant control at times ``t``, shape (len(t), l)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.controls) - 1)
        return self.controls[idx]


def _evaluate_many(objective, X: np.ndarray) -> np.ndarray:
    batch = getattr(objective, "batch", None)
    if batch is not None:
        return np.asarray(batch(X), dtype=float)
    return np.array([float(objective(x)) for x in X])


def _gradient(objective, x: np.ndarray, fd_step: float) -> np.ndarray:
    d = x.size
    delta = fd_step * np.maximum(1.0, np.abs(x))
    X = np.repeat(x[None, :], 2 * d, axis=0)
    idx = np.arange(d)
    X[idx, idx] += delta
    X[d + idx, idx] -= delta
    v = _evaluate_many(objective, X)
    return (v[:d] - v[d:]) / (2 * delta)


def _descend(objective, x, lo, hi, tol, max_iter, fd_step) -> tuple:
    """Projected gradient descent; returns (x, f(x), iterations, converged)."""
    fx = float(objective(x))
    recent = [fx]  # nonmonotone reference: BB steps need room to overshoot
    x_prev = g_prev = None
    alpha = None
    for it in range(max_iter + 1):
        g = _gradient(objective, x, fd_step)
        pg = x - np.clip(x - g, lo, hi)
        if np.linalg.norm(pg) < tol:
            return x, fx, it, True
        if it == max_iter:
            break
        # Barzilai-Borwein trial step, falling back to the previous accepted one
        if x_prev is not None:
            s, yv = x - x_prev, g - g_prev
            sy = float(s @ yv)
            if sy > 0:
                alpha = float(s @ s) / sy
        if alpha is None or not math.isfinite(alpha) or alpha <= 0:
            alpha = 1.0 / max(1.0, float(np.linalg.norm(g)))
        for _ in range(60):
            trial = np.clip(x - alpha * g, lo, hi)
            try:
                ft = float(objective(trial))
            except (ArithmeticError, ExprError):
                ft = math.inf
            if math.isfinite(ft) and ft <= max(recent) - 1e-4 * float(g @ (x - trial)):
                break
            alpha *= 0.5
        else:
            return x, fx, it, False
        if np.array_equal(trial, x):
            return x, fx, it, False
        x_prev, g_prev = x, g
        x, fx = trial, ft
        recent = (recent + [fx])[-_MEMORY:]
    return x, fx, max_iter, False


def optimize(objective: Callable, dims: int | None = None, bounds: Sequence | None = None, *,
             tol: float = 1e-6, max_iter: int = 10_000, fd_step: float = 1e-6,
             x0=None) -> DirectSolution:
    """Minimise ``objective`` over a box by projected gradient descent.

    A :class:`TranscribedObjective` is minimised through its penalty
    schedule, warm-starting each round.  Any other callable on ``R^dims`` is
    minimised once.  The start is the box midpoint (0 on unbounded sides).
    The iteration cap applies per round; hitting it, or a stalled line
    search, marks the result non-converged.
    """
    transcribed = isinstance(objective, TranscribedObjective)
    if dims is None:
        dims = objective.dims if transcribed else None
    if bounds is None:
        bounds = objective.bounds if transcribed else [(-math.inf, math.inf)] * (dims or 0)
    if not dims or dims < 1:
        raise ValueError("dims must be a positive integer")
    if dims > MAX_DIMS:
        raise ValueError(f"dims = {dims} exceeds the desk-scale limit {MAX_DIMS}")
    if len(bounds) != dims:
        raise ValueError(f"expected {dims} bounds, got {len(bounds)}")
    lo = np.array([float(b[0]) for b in bounds])
    hi = np.array([float(b[1]) for b in bounds])
    if np.any(lo > hi):
        raise ValueError("lower bound above upper bound")
    if x0 is None:
        both = np.isfinite(lo) & np.isfinite(hi)
        x = np.clip(0.0, lo, hi)
        x[both] = 0.5 * (lo[both] + hi[both])
    else:
        x = np.clip(np.asarray(x0, dtype=float).reshape(dims), lo, hi)

    total = 0
    converged = True
    if transcribed:
        rounds = [objective.with_rho(r) for r in PENALTY_SCHEDULE]
    else:
        rounds = [objective]
    fx = math.nan
    for obj in rounds:
        x, fx, iters, ok = _descend(obj, x, lo, hi, tol, max_iter, fd_step)
        total += iters
        converged = ok
    if transcribed:
        p = objective.problem
        controls = x.reshape(objective.intervals, p.l)
        edges = np.linspace(0.0, p.t1, objective.intervals + 1)
        defect = objective.defect(x)
        return DirectSolution(
            x=x, controls=controls, edges=edges, cost=objective.cost(x), objective=fx,
            defect_norm=float(np.max(np.abs(defect))) if defect.size else 0.0,
            iterations=total, converged=converged, rho=rounds[-1].rho,
        )
    return DirectSolution(
        x=x, controls=x.reshape(dims, 1), edges=np.arange(dims + 1, dtype=float), cost=fx,
        objective=fx, defect_norm=0.0, iterations=total, converged=converged,
    )


@dataclass
class CompareReport:
    j_indirect: float
    j_direct: float
    relative_gap: float
    control_rms: float
    tol_rel: float
    passed: bool
    direct_defect: float = math.nan
    direct_converged: bool = True

    def to_text(self) -> str:
        return "\n".join([
            f"J_indirect = {self.j_indirect:.12g}",
            f"J_direct = {self.j_direct:.12g}",
            f"relative cost gap = {self.relative_gap:.6e} (tolerance {self.tol_rel:g})",
            f"control RMS gap = {self.control_rms:.6e}",
            f"direct terminal defect = {self.direct_defect:.3e}",
            f"direct optimiser converged = {self.direct_converged}",
            f"result: {'pass' if self.passed else 'FAIL'}",
        ])


def compare(extremal, direct: DirectSolution, tol_rel: float = 0.02) -> CompareReport:
    """Cost and control agreement between an indirect extremal and a direct solution."""
    if tol_rel < 0:
        raise ValueError("tol_rel must be non-negative")
    j_i = float(extremal.cost)
    j_d = float(direct.cost)
    gap = abs(j_i - j_d) / max(1.0, abs(j_d))
    tr = extremal.trajectory
    diff = tr.u - direct.control_at(tr.t)
    rms = float(np.sqrt(np.mean(diff ** 2))) if diff.size else 0.0
    return CompareReport(j_i, j_d, gap, rms, float(tol_rel), bool(gap <= tol_rel),
                         direct.defect_norm, direct.converged)


class DirectTranscriptionSolver(BaseEstimator):
    """Estimator-style wrapper: ``fit(problem)`` then ``predict(t)`` for the control."""

    def __init__(self, intervals=50, substeps=2, tol=1e-6, max_iter=10_000, fd_step=1e-6):
        self.intervals = intervals
        self.substeps = substeps
        self.tol = tol
        self.max_iter = max_iter
        self.fd_step = fd_step

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        objective = transcribe(problem, int(self.intervals), int(self.substeps))
        solution = optimize(objective, tol=float(self.tol), max_iter=int(self.max_iter),
                            fd_step=float(self.fd_step))
        self.problem_ = problem
        self.solution_ = solution
        self.cost_ = solution.cost
        self.controls_ = solution.controls
        self.n_iter_ = solution.iterations
        self.converged_ = solution.converged
        return self

    def predict(self, t) -> np.ndarray:
        check_is_fitted(self, "solution_")
        return self.solution_.control_at(t)

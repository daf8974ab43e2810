"""Indirect solution of port optimal-control problems by costate shooting.

The control at every instant maximises the u-dependent part of the extended
Hamiltonian, ``<lam, F_u(q)> + nu * phi(q, u, e)``.  The accumulated port
integral ``I(t)`` is the same for every candidate control at a fixed instant,
so it is carried along in the trajectory but plays no part in the argmax.

Shooting integrates state and costate forward from ``(q0, lam0)`` and drives
the terminal defects to zero with a damped Newton iteration on ``lam0``.
The cost multiplier is normalised to ``nu = -1`` (normal) or ``nu = 0``
(abnormal); positive rescaling of ``(lam, nu)`` leaves the argmax unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dynamics import IntegrationError, PortSystem, Trajectory, rk4_integrate, system_for
from .model import ControlProblem, check_problem

__all__ = [
    "SolverConfig", "Extremal", "StartResult", "ShootingReport", "CertificateReport",
    "UnboundedHamiltonianError", "UnsupportedProblemError", "SolverFailedError",
    "maximize_hamiltonian", "integrate_extremal", "shooting_residual", "solve",
    "check_certificate", "IndirectShootingSolver", "NONTRIVIAL_THRESHOLD",
]

NONTRIVIAL_THRESHOLD = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_EPS = float(np.finfo(float).eps)
_MAX_DOUBLINGS = 45


class UnboundedHamiltonianError(ArithmeticError):
    """The Hamiltonian has no maximum over U (grows without bound along ``component``)."""

    def __init__(self, component: int, detail: str = ""):
        self.component = component
        super().__init__(f"unbounded Hamiltonian along control component u{component + 1}" + (f": {detail}" if detail else ""))


class UnsupportedProblemError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    steps: int = 1000
    tol: float = 1e-9
    max_iter: int = 50
    fd_step: float = 1e-6
    grid_size: int = 64
    refine_iter: int = 30
    max_halvings: int = 30
    seeds: tuple = ()
    nu: str = "auto"

    def __post_init__(self):
        for name in ("steps", "max_iter", "grid_size", "refine_iter"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if not (self.tol > 0 and self.fd_step > 0):
            raise ValueError("tol and fd_step must be positive")
        if self.nu not in ("auto", "normal", "abnormal"):
            raise ValueError(f"nu must be 'auto', 'normal' or 'abnormal', got {self.nu!r}")


# ---------------------------------------------------------------------------
# pointwise maximisation


class HamiltonianMaximizer:
    """argmax over the control box of ``<lam, F_u> + nu * phi`` for one problem."""

    def __init__(self, system: PortSystem, config: SolverConfig = SolverConfig()):
        self.system = system
        self.config = config
        self.bounds = [(float(lo), float(hi)) for lo, hi in system.problem.control_bounds]
        self.unbounded = any(math.isinf(lo) or math.isinf(hi) for lo, hi in self.bounds)

    def __call__(self, t, q, lam, f, fp, nu) -> tuple:
        # (lam, nu) -> (lam, nu)/s makes the result exactly invariant under
        # positive rescaling whenever the rescaled inputs are representable
        scale = -nu if nu < 0 else max((abs(v) for v in lam), default=0.0)
        if scale > 0 and scale != 1.0:
            lam = [v / scale for v in lam]
            nu = nu / scale
        elif scale == 0:
            lam = [0.0] * len(lam)
            nu = 0.0
        system = self.system
        if system.quadratic:
            g0, hflat = system.quadratic_parts(t, q, lam, f, fp, nu)
            if system.l == 1:
                # a concave parabola on an interval peaks at the clipped vertex
                h = hflat[0]
                if h < 0:
                    lo, hi = self.bounds[0]
                    return (min(max(-g0[0] / h, lo), hi),)
            else:
                H = np.asarray(hflat).reshape(system.l, system.l)
                try:
                    np.linalg.cholesky(-H)
                except np.linalg.LinAlgError:
                    pass
                else:
                    u = np.linalg.solve(H, -np.asarray(g0))
                    if all(lo <= v <= hi for v, (lo, hi) in zip(u, self.bounds)):
                        return tuple(float(v) for v in u)
        return self._search(t, q, lam, f, fp, nu)

    # general path: cyclic coordinate search -------------------------------
    def _search(self, t, q, lam, f, fp, nu) -> tuple:
        system = self.system
        l = system.l
        u = [min(max(0.0, lo), hi) for lo, hi in self.bounds]
        if self.unbounded:
            self._check_growth(t, q, lam, f, fp, nu, u)

        for _ in range(100 if l > 1 else 1):
            moved = 0.0
            for j in range(l):
                x = self._line_max(t, q, lam, f, fp, nu, u, j)
                moved = max(moved, abs(x - u[j]) / (1.0 + abs(x)))
                u[j] = x
            if moved < 1e-12:
                break
        return tuple(u)

    def _check_growth(self, t, q, lam, f, fp, nu, u):
        system = self.system
        if system.quadratic:
            g = system.objective_gradient(t, q, lam, u, f, fp, nu)
            H = system.objective_hessian(t, q, lam, u, f, fp, nu)
            for j, (lo, hi) in enumerate(self.bounds):
                for direction, open_side in ((1.0, math.isinf(hi)), (-1.0, math.isinf(lo))):
                    if open_side and (H[j, j] > 0 or (H[j, j] == 0 and direction * g[j] > 0)):
                        raise UnboundedHamiltonianError(j, f"at t={t:.6g}")
            if system.l > 1 and np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) > 1e-12 * (1 + np.max(np.abs(H))):
                raise UnsupportedProblemError("objective is not concave in u on an unbounded control set")
        else:
            for probe in (u, [v + 1.0 for v in u], [v - 1.0 for v in u]):
                probe = [min(max(v, lo), hi) for v, (lo, hi) in zip(probe, self.bounds)]
                H = system.objective_hessian(t, q, lam, probe, f, fp, nu)
                if np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) > 1e-12 * (1 + np.max(np.abs(H))):
                    raise UnsupportedProblemError("objective is not concave in u on an unbounded control set")

    def _window(self, fun, j, x0):
        lo, hi = self.bounds[j]
        center = min(max(x0 if math.isfinite(x0) else 0.0, lo), hi)
        base = fun(center)
        ends = []
        for direction, limit in ((-1.0, lo), (1.0, hi)):
            if math.isfinite(limit):
                ends.append(limit)
                continue
            prev = base
            width = 1.0
            grew = False
            for _ in range(_MAX_DOUBLINGS):
                value = fun(center + direction * width)
                if value < prev:
                    break
                grew = grew or value > base
                prev = value
                width *= 2.0
            else:
                if grew:
                    raise UnboundedHamiltonianError(j, "objective grows along the search edge")
            ends.append(center + direction * width)
        return ends[0], ends[1]

    def _line_max(self, t, q, lam, f, fp, nu, u, j) -> float:
        """Maximise along control ``j``: grid, golden section, then a Newton polish."""
        lo, hi = self.bounds[j]
        if lo == hi:
            return lo
        system = self.system

        def fun(x):
            trial = list(u)
            trial[j] = x
            return system.objective(t, q, lam, trial, f, fp, nu)

        a, b = self._window(fun, j, u[j])
        n = self.config.grid_size
        xs = np.linspace(a, b, n)
        vals = system.objective_line(t, q, lam, u, j, xs, f, fp, nu)
        best = int(np.argmax(vals))  # first maximum: smallest u on ties
        top = float(vals[best])
        if top - float(np.min(vals)) <= 1e-14 * (1.0 + abs(top)):
            return min(max(0.0, lo), hi) if not math.isfinite(lo) else lo
        left = float(xs[max(best - 1, 0)])
        right = float(xs[min(best + 1, n - 1)])
        x1 = right - _GOLDEN * (right - left)
        x2 = left + _GOLDEN * (right - left)
        f1, f2 = fun(x1), fun(x2)
        for _ in range(self.config.refine_iter):
            if f1 >= f2:
                right, x2, f2 = x2, x1, f1
                x1 = right - _GOLDEN * (right - left)
                f1 = fun(x1)
            else:
                left, x1, f1 = x1, x2, f2
                x2 = left + _GOLDEN * (right - left)
                f2 = fun(x2)
        x, v = (x1, f1) if f1 >= f2 else (x2, f2)
        if not v > top:
            return float(xs[best])
        return self._polish(fun, t, q, lam, f, fp, nu, u, j, x, v, left, right)

    def _polish(self, fun, t, q, lam, f, fp, nu, u, j, x, v, left, right) -> float:
        # golden section leaves ~1e-7 relative error, too coarse for the
        # finite-difference shooting Jacobian; Newton on the symbolic
        # derivatives recovers full precision inside the final bracket
        system = self.system
        lo, hi = self.bounds[j]
        left, right = max(left, lo), min(right, hi)
        for _ in range(20):
            trial = list(u)
            trial[j] = x
            try:
                g = system.objective_gradient(t, q, lam, trial, f, fp, nu)[j]
                h = system.objective_hessian(t, q, lam, trial, f, fp, nu)[j, j]
            except (ArithmeticError, ValueError):
                break
            if not (h < 0 and math.isfinite(g)):
                break
            step = -g / h
            x_new = x + step
            if not left <= x_new <= right:
                break
            v_new = fun(x_new)
            # near the peak the true gain is below the rounding of v
            if v_new < v - 8 * _EPS * (1.0 + abs(v)):
                break
            x, v = x_new, v_new
            if abs(step) <= 4e-16 * (1.0 + abs(x)):
                break
        return x


def maximize_hamiltonian(problem: ControlProblem, lam, q, t: float = 0.0, nu: float = -1.0,
                         config: SolverConfig | None = None) -> np.ndarray:
    """Control maximising ``<lam, F_u(q)> + nu * phi`` over the control box at time ``t``.

    Raises :class:`UnboundedHamiltonianError` when no maximum exists.
    """
    system = system_for(problem)
    f, fp = system.signals(t)
    m = HamiltonianMaximizer(system, config or SolverConfig())
    return np.array(m(t, [float(v) for v in q], [float(v) for v in lam], f, fp, float(nu)))


# ---------------------------------------------------------------------------
# extremals and shooting


def _system(problem: ControlProblem, config: SolverConfig) -> PortSystem:
    return system_for(problem, problem.t1 / config.steps)


def _feedback(system: PortSystem, config: SolverConfig, nu: float):
    maximizer = HamiltonianMaximizer(system, config)
    return lambda t, q, lam, f, fp: maximizer(t, q, lam, f, fp, nu)


def _integrate(system: PortSystem, config: SolverConfig, q0, lam0, nu: float, record: bool = True):
    return rk4_integrate(
        system, q0, lam0, control=_feedback(system, config, nu), nu=nu, steps=config.steps,
        record=record, fused=system.closed_form_stage(system.problem.control_bounds),
    )


def integrate_extremal(problem: ControlProblem, lam0, nu: float = -1.0,
                       config: SolverConfig | None = None) -> Trajectory:
    """State/costate trajectory with u(t) maximising the Hamiltonian at every stage."""
    config = config or SolverConfig()
    return _integrate(_system(problem, config), config, problem.q0, lam0, nu)


def shooting_residual(problem: ControlProblem, lam0, nu: float = -1.0,
                      config: SolverConfig | None = None) -> np.ndarray:
    """Terminal defects ``q_i(t1) - target_i``, one per terminal constraint."""
    config = config or SolverConfig()
    x = _integrate(_system(problem, config), config, problem.q0, lam0, nu, record=False)
    return np.array([x[i] - target for i, target in problem.terminal], dtype=float)


@dataclass
class Extremal:
    nu: float
    lambda0: np.ndarray
    trajectory: Trajectory
    residual: np.ndarray
    cost: float
    nontrivial: bool
    iterations: int = 0
    start: tuple = ()
    report: "ShootingReport | None" = None

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    @property
    def nu_class(self) -> str:
        return "abnormal" if self.nu == 0 else "normal"

    def scaled(self, c: float) -> "Extremal":
        """The same extremal with (lam, nu) multiplied by ``c > 0``."""
        if not c > 0:
            raise ValueError("scale must be positive")
        tr = self.trajectory
        scaled = Trajectory(t=tr.t, q=tr.q, lam=c * tr.lam, u=tr.u, f=tr.f, fprime=tr.fprime,
                            e=tr.e, eprime=c * tr.eprime, y=tr.y, I=tr.I)
        return Extremal(self.nu * c, c * self.lambda0, scaled, self.residual, self.cost,
                        self.nontrivial, self.iterations, self.start)


@dataclass
class StartResult:
    nu: float
    start: tuple
    lambda0: tuple
    converged: bool
    residual_norm: float
    iterations: int
    reason: str = ""
    cost: float = math.nan


@dataclass
class ShootingReport:
    starts: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def best_residuals(self) -> list:
        return [(s.nu, s.start, s.residual_norm) for s in self.starts]

    def to_text(self) -> str:
        lines = list(self.messages)
        for s in self.starts:
            status = "converged" if s.converged else "failed"
            cls = "normal" if s.nu else "abnormal"
            start = ",".join(f"{v:g}" for v in s.start)
            line = f"{cls} start ({start}): {status}, best residual {s.residual_norm:.3e}, {s.iterations} iterations"
            if s.reason:
                line += f" [{s.reason}]"
            lines.append(line)
        return "\n".join(lines)


class SolverFailedError(RuntimeError):
    def __init__(self, message: str, report: ShootingReport):
        self.report = report
        super().__init__(message + "\n" + report.to_text())


def _norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if r.size else 0.0


def _newton(residual, x0: np.ndarray, config: SolverConfig) -> tuple:
    """Damped Newton with a forward-difference Jacobian.

    Returns (x, residual norm, iterations, converged, reason).
    """
    x = np.array(x0, dtype=float)
    try:
        r = residual(x)
    except (IntegrationError, ArithmeticError, ValueError) as exc:
        return x, math.inf, 0, False, _reason(exc)
    best = _norm(r)
    for it in range(config.max_iter + 1):
        if best <= config.tol:
            return x, best, it, True, ""
        if it == config.max_iter:
            break
        jac = np.empty((r.size, x.size))
        try:
            for i in range(x.size):
                delta = config.fd_step * max(1.0, abs(x[i]))
                xp = x.copy()
                xp[i] += delta
                jac[:, i] = (residual(xp) - r) / delta
        except (IntegrationError, ArithmeticError, ValueError) as exc:
            return x, best, it, False, _reason(exc)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        alpha = 1.0
        failure = "line search failed"
        for _ in range(config.max_halvings + 1):
            trial = x + alpha * step
            try:
                rt = residual(trial)
            except (IntegrationError, ArithmeticError, ValueError) as exc:
                failure = _reason(exc)
                alpha *= 0.5
                continue
            if _norm(rt) < best:
                x, r, best = trial, rt, _norm(rt)
                break
            alpha *= 0.5
        else:
            return x, best, it + 1, False, failure
    return x, best, config.max_iter, False, "iteration limit reached"


def _reason(exc: Exception) -> str:
    cause = getattr(exc, "cause", None) or exc
    if isinstance(cause, UnboundedHamiltonianError):
        return f"unbounded Hamiltonian ({cause})"
    return f"{type(cause).__name__}: {cause}"


def _starts(n: int, seeds: Sequence) -> list:
    out = [tuple(float(v) for v in s) for s in seeds]
    for s in out:
        if len(s) != n:
            raise ValueError(f"seed {s} does not have {n} components")
    out.append((0.0,) * n)
    for i in range(n):
        for sign in (1.0, -1.0):
            v = [0.0] * n
            v[i] = sign
            out.append(tuple(v))
    return out


def _attempt(problem, config, nu, report) -> list:
    """Run every start for one multiplier class; return converged extremals."""
    system = _system(problem, config)

    def residual(lam0):
        x = _integrate(system, config, problem.q0, lam0, nu, record=False)
        return np.array([x[i] - target for i, target in problem.terminal], dtype=float)

    found = []
    for start in _starts(problem.n, config.seeds):
        x, norm, iters, ok, reason = _newton(residual, np.array(start), config)
        result = StartResult(nu, start, tuple(x), ok, norm, iters, reason)
        if ok:
            try:
                traj = _integrate(system, config, problem.q0, x, nu)
            except IntegrationError as exc:
                result.converged, result.reason = False, _reason(exc)
            else:
                lam_max = float(np.max(np.abs(traj.lam))) if traj.lam.size else 0.0
                nontrivial = lam_max > NONTRIVIAL_THRESHOLD
                if nu == 0 and not nontrivial:
                    result.converged = False
                    result.reason = "nontriviality violated: lambda is identically zero"
                else:
                    result.cost = float(traj.y[-1])
                    res = np.array([traj.q[-1, i] - target for i, target in problem.terminal], dtype=float)
                    found.append(Extremal(nu, np.array(x), traj, res, result.cost, nontrivial, iters, start))
        report.starts.append(result)
    return found


def solve(problem: ControlProblem, config: SolverConfig | None = None) -> Extremal:
    """Normal (nu=-1) shooting first, then abnormal (nu=0) unless ``config.nu`` fixes the class.

    Every start is run; the converged extremal with the lowest cost wins.
    Raises :class:`SolverFailedError` with per-start residuals otherwise.
    """
    problem = check_problem(problem)
    config = config or SolverConfig()
    report = ShootingReport()
    classes = {"auto": (-1.0, 0.0), "normal": (-1.0,), "abnormal": (0.0,)}[config.nu]
    for nu in classes:
        found = _attempt(problem, config, nu, report)
        if found:
            best = min(found, key=lambda ex: ex.cost)
            best.report = report
            return best
        if nu == 0:
            reasons = sorted({s.reason for s in report.starts if s.nu == 0 and s.reason})
            report.messages.append(
                "abnormal case (nu=0) rejected: " + ("; ".join(reasons) if reasons else "no start converged")
            )
        else:
            report.messages.append("normal case (nu=-1): no start converged")
    raise SolverFailedError("shooting failed from every start", report)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class CertificateCheck:
    name: str
    passed: bool | None  # None: not applicable
    value: float
    threshold: float
    detail: str = ""


@dataclass
class CertificateReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name: str) -> CertificateCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        out = []
        for c in self.checks:
            status = {True: "pass", False: "FAIL", None: "n/a"}[c.passed]
            out.append(f"{c.name}: {status} (value {c.value:.3e}, threshold {c.threshold:.1e}){' ' + c.detail if c.detail else ''}")
        return "\n".join(out)


def _is_autonomous(problem: ControlProblem) -> bool:
    from .expr import symbols

    if problem.k:
        return False
    return "t" not in symbols(problem.running_cost) and not any("t" in symbols(e) for e in problem.dynamics)


def check_certificate(extremal: Extremal, problem: ControlProblem, *, probes: int = 100,
                      seed: int = 0, config: SolverConfig | None = None,
                      max_tol: float = 1e-7, adjoint_tol: float = 1e-6,
                      constancy_tol: float = 1e-4) -> CertificateReport:
    """Post-hoc check of the necessary conditions along a solved extremal.

    * nontriviality: ``min_t ||lam(t)||_inf`` above a threshold;
    * maximality: the stored control is no worse than ``probes`` random
      admissible controls at random grid times, and no worse than the
      recomputed argmax at every grid node (both within ``max_tol``);
    * ``nu <= 0``;
    * adjoint defect: re-integrating from ``lambda0`` reproduces the stored
      state and costate;
    * Hamiltonian constancy for autonomous port-free problems.
    """
    config = config or SolverConfig(steps=extremal.trajectory.steps)
    tr = extremal.trajectory
    nu = float(extremal.nu)
    system = system_for(problem, problem.t1 / tr.steps)
    maximizer = HamiltonianMaximizer(system, config)
    rng = np.random.default_rng(seed)
    checks = []

    lam_norms = np.max(np.abs(tr.lam), axis=1) if tr.lam.size else np.zeros(len(tr.t))
    checks.append(CertificateCheck("nontriviality", bool(lam_norms.min() > NONTRIVIAL_THRESHOLD),
                                   float(lam_norms.min()), NONTRIVIAL_THRESHOLD))

    def value(i, u):
        t = float(tr.t[i])
        f, fp = system.signals(t)
        return system.objective(t, tr.q[i], tr.lam[i], u, f, fp, nu) + float(tr.I[i])

    worst = 0.0
    bounds = maximizer.bounds
    for _ in range(probes):
        i = int(rng.integers(len(tr.t)))
        u_star = tr.u[i]
        probe = []
        for j, (lo, hi) in enumerate(bounds):
            if math.isfinite(lo) and math.isfinite(hi):
                probe.append(float(rng.uniform(lo, hi)))
            else:
                radius = 10.0 * (1.0 + abs(u_star[j]))
                probe.append(float(np.clip(u_star[j] + rng.uniform(-radius, radius), lo, hi)))
        worst = max(worst, value(i, probe) - value(i, u_star))
    bad_nodes = []
    node_gap = 0.0
    node_error = ""
    for i in range(len(tr.t)):
        t = float(tr.t[i])
        f, fp = system.signals(t)
        try:
            u_max = maximizer(t, list(tr.q[i]), list(tr.lam[i]), f, fp, nu)
        except (ArithmeticError, ValueError) as exc:
            node_error = str(exc)
            bad_nodes.append(i)
            continue
        gap = value(i, u_max) - value(i, tr.u[i])
        node_gap = max(node_gap, gap)
        if gap > max_tol:
            bad_nodes.append(i)
    detail = f"failing nodes {bad_nodes[:10]}" if bad_nodes else ""
    if node_error:
        detail += f" ({node_error})"
    checks.append(CertificateCheck("maximality", worst <= max_tol and not bad_nodes,
                                   max(worst, node_gap), max_tol, detail))
    checks.append(CertificateCheck("nu_nonpositive", nu <= 0, nu, 0.0))

    try:
        again = _integrate(system, config, problem.q0, extremal.lambda0, nu)
        defect = max(float(np.max(np.abs(again.lam - tr.lam))), float(np.max(np.abs(again.q - tr.q))))
    except IntegrationError as exc:
        defect = math.inf
        checks.append(CertificateCheck("adjoint", False, defect, adjoint_tol, str(exc)))
    else:
        checks.append(CertificateCheck("adjoint", defect <= adjoint_tol, defect, adjoint_tol))

    if _is_autonomous(problem):
        hvals = [system.objective(float(tr.t[i]), tr.q[i], tr.lam[i], tr.u[i], (), (), nu)
                 for i in range(len(tr.t))]
        variation = float(np.max(hvals) - np.min(hvals))
        checks.append(CertificateCheck("hamiltonian_constancy", variation < constancy_tol, variation, constancy_tol))
    else:
        checks.append(CertificateCheck("hamiltonian_constancy", None, math.nan, constancy_tol,
                                       "not an autonomous port-free problem"))
    return CertificateReport(checks)


# ---------------------------------------------------------------------------
# estimator


class IndirectShootingSolver(BaseEstimator):
    """Estimator-style wrapper around :func:`solve`.

    ``fit(problem)`` solves the problem; ``predict(t)`` returns the optimal
    control at the requested times (linear interpolation on the grid).
    """

    def __init__(self, steps=1000, tol=1e-9, max_iter=50, fd_step=1e-6, grid_size=64,
                 refine_iter=30, nu="auto", seeds=None):
        self.steps = steps
        self.tol = tol
        self.max_iter = max_iter
        self.fd_step = fd_step
        self.grid_size = grid_size
        self.refine_iter = refine_iter
        self.nu = nu
        self.seeds = seeds

    def config(self) -> SolverConfig:
        return SolverConfig(
            steps=int(self.steps), tol=float(self.tol), max_iter=int(self.max_iter),
            fd_step=float(self.fd_step), grid_size=int(self.grid_size),
            refine_iter=int(self.refine_iter), nu=self.nu,
            seeds=tuple(tuple(s) for s in (self.seeds or ())),
        )

    def fit(self, problem, y=None):
        problem = check_problem(problem)
        extremal = solve(problem, self.config())
        self.problem_ = problem
        self.extremal_ = extremal
        self.trajectory_ = extremal.trajectory
        self.lambda0_ = extremal.lambda0
        self.nu_ = extremal.nu
        self.cost_ = extremal.cost
        self.residual_ = extremal.residual
        self.report_ = extremal.report
        return self

    def predict(self, t) -> np.ndarray:
        check_is_fitted(self, "extremal_")
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tr = self.trajectory_
        return np.column_stack([np.interp(t, tr.t, tr.u[:, j]) for j in range(tr.u.shape[1])])

    def certificate(self, **kwargs) -> CertificateReport:
        check_is_fitted(self, "extremal_")
        return check_certificate(self.extremal_, self.problem_, config=self.config(), **kwargs)

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from helpers import CLASSIC, PORTED, zero_motion_problem
from portpmp.bench import classic_problem, ported_problem
from portpmp.direct import (
    DirectTranscriptionSolver, PENALTY_SCHEDULE, compare, optimize, transcribe,
)
from portpmp.indirect import Extremal, integrate_extremal, solve, shooting_residual

CLASSIC_P = classic_problem(CLASSIC)


@pytest.fixture(scope="module")
def classic_direct():
    return optimize(transcribe(CLASSIC_P, 50))


def midpoints(n):
    return (np.arange(n) + 0.5) / n


def test_transcribed_objective_at_sampled_optimum():
    ob = transcribe(CLASSIC_P, 50)
    u = -6 * midpoints(50) + 2
    value = ob(u)
    defect = ob.defect(u)
    assert np.max(np.abs(defect)) < 1e-3
    assert abs(value - 4) < 2e-3
    assert value == pytest.approx(ob.cost(u) + ob.rho * np.sum(defect ** 2), rel=1e-14)


def test_zero_motion_objective():
    ob = transcribe(zero_motion_problem(), 20)
    assert ob(np.zeros(20)) == 0.0


def test_needs_two_intervals():
    with pytest.raises(ValueError):
        transcribe(CLASSIC_P, 1)


def test_batch_matches_single_rollouts():
    ob = transcribe(ported_problem(PORTED), 10)
    rng = np.random.default_rng(0)
    U = rng.normal(size=(5, 10))
    assert np.allclose(ob.batch(U), [ob(u) for u in U], rtol=1e-15, atol=0)


def test_penalty_schedule():
    assert PENALTY_SCHEDULE == (1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8)


def test_benchmark_direct_solution(classic_direct):
    s = classic_direct
    assert 4 <= s.cost <= 4.05
    assert s.defect_norm < 1e-3
    assert s.converged
    assert s.controls.shape == (50, 1)
    assert np.max(np.abs(s.controls[:, 0] - (-6 * midpoints(50) + 2))) < 0.05


def test_convex_quadratic_vertex():
    s = optimize(lambda x: 3.0 * (x[0] - 1.25) ** 2 + 0.5, dims=1)
    assert abs(s.x[0] - 1.25) < 1e-8
    assert s.converged


def test_quadratic_with_active_bound():
    s = optimize(lambda x: (x[0] - 2.0) ** 2 + (x[1] + 1.0) ** 2, dims=2, bounds=[(0, 1), (-5, 5)])
    assert np.allclose(s.x, [1.0, -1.0], atol=1e-8)


def test_degenerate_bounds():
    calls = []

    def f(x):
        calls.append(1)
        return float(x[0] ** 2 + 1)

    s = optimize(f, dims=1, bounds=[(0, 0)])
    assert s.x[0] == 0 and s.iterations == 0 and s.converged


def test_bad_dimensions():
    with pytest.raises(ValueError):
        optimize(lambda x: 0.0, dims=513)
    with pytest.raises(ValueError):
        optimize(lambda x: 0.0, dims=2, bounds=[(0, 1)])
    with pytest.raises(ValueError):
        optimize(lambda x: 0.0, dims=1, bounds=[(1, 0)])


def test_iteration_cap_flags_non_convergence():
    s = optimize(lambda x: float(np.sum((x - np.arange(4)) ** 4)), dims=4, max_iter=3)
    assert not s.converged and s.iterations == 3


def test_compare_benchmark(classic_direct):
    report = compare(solve(CLASSIC_P), classic_direct, 0.02)
    assert report.passed
    assert report.relative_gap < 0.02
    assert report.control_rms < 0.05
    assert "pass" in report.to_text()


def test_compare_zero_motion():
    p = zero_motion_problem()
    report = compare(solve(p), optimize(transcribe(p, 20)), 0.02)
    assert report.j_indirect == report.j_direct == 0
    assert report.relative_gap == 0 and report.passed


def test_compare_wrong_costate_fails(classic_direct):
    lam0 = np.array([0.0, 0.0])
    tr = integrate_extremal(CLASSIC_P, lam0)
    wrong = Extremal(-1.0, lam0, tr, shooting_residual(CLASSIC_P, lam0), float(tr.y[-1]), False)
    report = compare(wrong, classic_direct, 0.02)
    assert not report.passed
    assert report.relative_gap > 0.5


def test_compare_strict_tolerance_fails(classic_direct):
    assert not compare(solve(CLASSIC_P), classic_direct, 0.0).passed


def test_refinement_monotonicity():
    coarse = optimize(transcribe(CLASSIC_P, 25)).cost
    fine = optimize(transcribe(CLASSIC_P, 100)).cost
    assert fine <= coarse + 1e-6


def test_estimator_api():
    est = DirectTranscriptionSolver(intervals=20)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.predict([0.0])
    est.fit(CLASSIC_P)
    assert est.converged_ and 4 <= est.cost_ < 4.1
    assert est.predict([0.0, 0.99]).shape == (2, 1)
    assert est.predict([0.01])[0, 0] == est.controls_[0, 0]

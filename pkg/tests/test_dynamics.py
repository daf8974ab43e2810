import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import CLASSIC, make_problem, padded_classic
from portpmp.bench import classic_problem, ported_problem, CheapestStopParams
from portpmp.dynamics import (
    IntegrationError, adjoint_rhs, extended_hamiltonian, hamiltonian, output_e,
    output_eprime, rk4_integrate, system_for, vector_field,
)
from portpmp.expr import diff, evaluate

CLASSIC_P = classic_problem(CLASSIC)


def one_port(A=("1", "0"), B=("0", "1"), f="0", fprime="0", cost="u1^2"):
    return make_problem(n=2, dynamics=("q2", "u1"), k=1, A=A, B=B, cost=cost, q0=(0, 1),
                        signals=(f"f1 = {f}", f"fprime1 = {fprime}"))


def open_loop(fn):
    return lambda t, q, lam, f, fp: (fn(t),)


# point evaluations ---------------------------------------------------------------


def test_vector_field_examples():
    assert np.array_equal(vector_field(CLASSIC_P, (0, 1), (2,)), [1, 2])
    assert np.array_equal(vector_field(one_port(), (0, 1), (2,), fprime=(0.5,)), [1, 2.5])
    linear = make_problem(n=2, dynamics=("q2 - q1", "-q2 + u1"))
    assert np.array_equal(vector_field(linear, (0, 0), (0,)), [0, 0])


def test_output_e_examples():
    assert np.array_equal(output_e(one_port(A=("0", "0")), (0, 3), (1,)), [0])
    assert np.array_equal(output_e(one_port(), (0, 3), (5,)), [3])
    identity = make_problem(n=2, dynamics=("q2", "u1"), k=2, A=("1", "0", "0", "1"), B=("0", "0", "0", "0"),
                            signals=("f1 = 0", "f2 = 0", "fprime1 = 0", "fprime2 = 0"))
    assert np.array_equal(output_e(identity, (0.25, 3), (5,)), vector_field(identity, (0.25, 3), (5,)))


def test_output_eprime_examples():
    assert np.array_equal(output_eprime(one_port(B=("0", "0")), (0, 1), (12, 4), (1,)), [0])
    # dh/dq = (0, lam1) for h = lam1*x2 + lam2*u
    assert np.array_equal(output_eprime(one_port(), (0, 1), (12, 4), (1,)), [12])
    assert np.array_equal(output_eprime(one_port(), (0, 1), (0, 0), (1,)), [0])


def test_hamiltonian_examples():
    for lam, q, u in [((1.5, -2.0), (0.3, 0.7), 0.9), ((0.0, 1.0), (1.0, 2.0), -3.0)]:
        assert hamiltonian(CLASSIC_P, lam, q, (u,)) == lam[0] * q[1] + lam[1] * u
    assert hamiltonian(CLASSIC_P, (0, 0), (5, 6), (7,)) == 0
    assert hamiltonian(CLASSIC_P, (1, 2), (0, 3), (4,)) == 11


def test_extended_hamiltonian_examples():
    lam, q, u = (1.5, -2.0), (0.3, 0.7), (0.9,)
    assert extended_hamiltonian(CLASSIC_P, lam, q, u, nu=0.0) == hamiltonian(CLASSIC_P, lam, q, u)
    assert extended_hamiltonian(CLASSIC_P, (1, 0), (0, 3), (2,), nu=-1.0, I=0.5) == -0.5
    # normal case of the ported benchmark: xi1*x2 + xi2*u - (u^2 + (e1 + e2) f)
    ported = ported_problem(CheapestStopParams(f="0.1*t", fprime="0.1"))
    t = 0.4
    x2, uu = 0.7, 0.9
    e1, e2, f = x2, uu, 0.1 * t
    expected = 1.5 * x2 + (-2.0) * uu - (uu ** 2 + (e1 + e2) * f)
    assert extended_hamiltonian(ported, lam, (0.3, x2), (uu,), t=t) == pytest.approx(expected, rel=1e-15)


def test_adjoint_rhs_examples():
    assert np.array_equal(adjoint_rhs(CLASSIC_P, (12, 4), (0, 1), (2,)), [0, -12])
    assert np.array_equal(adjoint_rhs(CLASSIC_P, (0, 0), (3, 1), (2,)), [0, 0])
    assert np.array_equal(adjoint_rhs(one_port(), (0, 0), (0, 1), (2,), f=(2,)), [2, 0])


def test_adjoint_includes_state_cost_gradient():
    p = make_problem(n=2, dynamics=("q2", "u1"), cost="q1^2 + u1^2")
    # -nu * dphi/dq1 = 2*q1 for nu = -1
    assert np.array_equal(adjoint_rhs(p, (0, 0), (1.5, 0), (0,)), [3.0, 0])
    assert np.array_equal(adjoint_rhs(p, (0, 0), (1.5, 0), (0,), nu=0.0), [0, 0])


def test_max_sense_negates_cost_in_adjoint_only():
    p = make_problem(n=1, dynamics=("u1",), cost="q1*u1")
    q = p.replace(sense="max")
    assert adjoint_rhs(p, (0,), (1,), (2,))[0] == -adjoint_rhs(q, (0,), (1,), (2,))[0]


st_vec = st.tuples(st.floats(-5, 5), st.floats(-5, 5))


@given(st_vec, st_vec, st.floats(-3, 3), st.floats(-3, 3), st_vec)
@settings(max_examples=100, deadline=None)
def test_adjoint_linearity(l1, l2, a, b, q):
    p = make_problem(n=2, dynamics=("sin(q1)*q2", "q1^2 - u1*q2"), cost="q1^2 + u1^2")
    combo = a * np.array(l1) + b * np.array(l2)
    lhs = adjoint_rhs(p, combo, q, (0.3,), nu=0.0)
    rhs = a * adjoint_rhs(p, l1, q, (0.3,), nu=0.0) + b * adjoint_rhs(p, l2, q, (0.3,), nu=0.0)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_symbolic_jacobian_matches_finite_differences():
    p = make_problem(n=3, l=2, dynamics=("q2*cos(q3)", "exp(-q1^2) + u1*q3", "q1*q2 - u2^3"))
    system = system_for(p)
    rng = np.random.default_rng(3)
    for _ in range(50):
        q = rng.uniform(-2, 2, 3)
        u = rng.uniform(-2, 2, 2)
        env = dict(zip(p.state_names, q)) | dict(zip(p.control_names, u)) | {"t": 0.0}
        for m in range(3):
            for i in range(3):
                exact = evaluate(system.exprs["jac"][m][i], env)
                h = 1e-6
                dq = np.eye(3)[i] * h
                fd = (vector_field(p, q + dq, u)[m] - vector_field(p, q - dq, u)[m]) / (2 * h)
                assert abs(exact - fd) <= 1e-6 * (1 + abs(fd))
                assert exact == evaluate(diff(p.dynamics[m], p.state_names[i]), env)


def test_zero_port_quantities_vanish():
    p = padded_classic()
    tr = rk4_integrate(p, p.q0, (12.0, 4.0), control=open_loop(lambda t: -6 * t + 2), steps=100)
    assert np.all(tr.e == 0) and np.all(tr.eprime == 0) and np.all(tr.I == 0)
    ref = rk4_integrate(CLASSIC_P, CLASSIC_P.q0, (12.0, 4.0), control=open_loop(lambda t: -6 * t + 2), steps=100)
    assert tr.max_difference(ref) == 0.0


# integration ----------------------------------------------------------------------


def exp_problem():
    return make_problem(n=1, dynamics=("q1",), cost="u1^2", q0=(1,))


def test_constant_field():
    p = make_problem(n=2, dynamics=("0", "0"), cost="u1^2", q0=(1.5, -2))
    tr = rk4_integrate(p, p.q0, control=open_loop(lambda t: 0.0), steps=10)
    assert np.all(tr.q == [1.5, -2])


def test_exponential():
    p = exp_problem()
    tr = rk4_integrate(p, p.q0, control=open_loop(lambda t: 0.0), steps=100)
    assert abs(tr.q[-1, 0] - math.e) < 1e-8


def rk4_order_ratio():
    p = exp_problem()
    errors = [abs(rk4_integrate(p, p.q0, control=open_loop(lambda t: 0.0), steps=n).q[-1, 0] - math.e)
              for n in (20, 40)]
    return errors[0] / errors[1]


def test_rk4_order():
    assert 12 <= rk4_order_ratio() <= 20


def test_cheapest_stop_open_loop():
    tr = rk4_integrate(CLASSIC_P, CLASSIC_P.q0, control=open_loop(lambda t: -6 * t + 2), steps=1000)
    assert np.max(np.abs(tr.q[-1] - [1, 0])) < 1e-8
    # y accumulates the running cost: integral of (2 - 6t)^2 over [0, 1] is 4
    assert abs(tr.y[-1] - 4) < 1e-10


def test_trajectory_invariants():
    tr = rk4_integrate(CLASSIC_P, CLASSIC_P.q0, control=open_loop(lambda t: -6 * t + 2), steps=400)
    assert tr.t[0] == 0 and tr.t[-1] == CLASSIC_P.t1
    assert np.all(np.diff(tr.t) > 0)
    assert np.max(np.abs(np.diff(tr.t) - 1 / 400)) <= 4 * np.finfo(float).eps
    assert tr.y[0] == 0 and tr.I[0] == 0
    assert np.all(np.diff(tr.y) >= 0)
    assert tr.columns(CLASSIC_P) == ["t", "x1", "x2", "lambda1", "lambda2", "u1", "y", "I"]
    assert tr.as_array().shape == (401, 8)


def test_port_integral_accumulates():
    p = one_port(f="1", fprime="0")
    # e1 = x2 = 1 + t under u = 1, so I(1) = integral of (1 + t) = 1.5
    tr = rk4_integrate(p, p.q0, control=open_loop(lambda t: 1.0), steps=50)
    assert abs(tr.I[-1] - 1.5) < 1e-12
    assert np.allclose(tr.e[:, 0], tr.q[:, 1])


def test_non_finite_aborts_with_step():
    p = make_problem(n=1, dynamics=("q1^2",), cost="u1^2", q0=(1,), t1=2.0)
    with pytest.raises(IntegrationError) as err:
        rk4_integrate(p, p.q0, control=open_loop(lambda t: 0.0), steps=1000)
    assert err.value.step > 0 and 0 < err.value.time <= 2.0


def test_domain_error_carries_time():
    p = make_problem(n=1, dynamics=("-1",), cost="log(q1)*u1^2", q0=(0.5,))
    with pytest.raises(IntegrationError, match="log") as err:
        rk4_integrate(p, p.q0, control=open_loop(lambda t: 1.0), steps=100)
    assert 0.4 < err.value.time < 0.6


def test_needs_two_steps():
    with pytest.raises(ValueError):
        rk4_integrate(CLASSIC_P, CLASSIC_P.q0, control=open_loop(lambda t: 0.0), steps=1)


def test_linked_signal_is_derivative():
    p = make_problem(n=2, dynamics=("q2", "u1"), k=1, A=("1", "0"), B=("0", "1"), q0=(0, 1),
                     signals=("f1 = sin(t)", "fprime1 = linked"))
    system = system_for(p, 1e-3)
    f, fp = system.signals(0.3)
    assert f[0] == pytest.approx(math.sin(0.3))
    assert fp[0] == pytest.approx(math.cos(0.3), abs=1e-6)

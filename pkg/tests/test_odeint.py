import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from coldchain.errors import OutOfSpan, SingularRHS, StepUnderflow
from coldchain.odeint import (
    BLOW_UP, EVENT, REACHED_END, STEP_UNDERFLOW, EventSpec, IvpProblem, Tolerances, integrate,
)


def oscillator(y, p=()):
    return np.array([y[1], -y[0]])


@pytest.fixture(scope="module")
def orbit():
    return integrate(IvpProblem(oscillator, [1.0, 0.0], 0.0, 2 * math.pi))


def test_oscillator_full_turn(orbit):
    assert orbit.termination == REACHED_END
    assert orbit.y_end[0] == pytest.approx(1.0, abs=1e-8)
    assert orbit.t_end == 2 * math.pi


def test_dense_output(orbit):
    assert orbit(math.pi)[0] == pytest.approx(-1.0, abs=1e-7)
    ts = np.linspace(0, 2 * math.pi, 97)
    ys = np.array([orbit(t) for t in ts])
    np.testing.assert_allclose(ys[:, 0], np.cos(ts), atol=1e-8)


def test_dense_output_at_nodes_is_exact(orbit):
    for j in (0, 3, len(orbit.t) // 2, len(orbit.t) - 1):
        np.testing.assert_array_equal(orbit(orbit.t[j]), orbit.y[j])


def test_out_of_span(orbit):
    with pytest.raises(OutOfSpan):
        orbit(7.0)
    with pytest.raises(OutOfSpan):
        orbit(-0.1)


def test_blow_up_location():
    tr = integrate(IvpProblem(lambda y, p: y * y, [1.0], 0.0, 2.0), (), Tolerances(blowup=1e8))
    assert tr.termination == BLOW_UP
    assert tr.blowup_time == pytest.approx(1 - 1e-8, abs=1e-6)
    assert abs(tr.y_end[0]) > 1e8


def test_event_on_oscillator():
    ev = EventSpec(lambda y: y[0], direction=-1, terminal=True, name="x0")
    tr = integrate(IvpProblem(oscillator, [1.0, 0.0], 0.0, 10.0), [ev])
    assert tr.termination == EVENT
    assert tr.events[0].t == pytest.approx(math.pi / 2, abs=1e-9)
    assert tr.t_end == tr.events[0].t


def test_non_terminal_events_record_every_crossing():
    ev = EventSpec(lambda y: y[0], name="x0")
    tr = integrate(IvpProblem(oscillator, [1.0, 0.0], 0.0, 10.0), [ev])
    np.testing.assert_allclose([e.t for e in tr.events], [math.pi / 2, 3 * math.pi / 2, 5 * math.pi / 2],
                               atol=1e-9)


def test_reverse_time():
    tr = integrate(IvpProblem(oscillator, [1.0, 0.0], 0.0, -math.pi / 2))
    np.testing.assert_allclose(tr.y_end, [0.0, 1.0], atol=1e-9)
    assert tr(-0.5)[0] == pytest.approx(math.cos(0.5), abs=1e-9)


def test_singular_rhs_is_rejected_step():
    def rhs(y, p):
        if y[0] >= 1.0:
            raise SingularRHS("wall")
        return np.array([1.0])

    tr = integrate(IvpProblem(rhs, [0.0], 0.0, 2.0), (), Tolerances(on_underflow="return"))
    assert tr.termination == STEP_UNDERFLOW
    assert tr.y_end[0] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(StepUnderflow) as exc:
        integrate(IvpProblem(rhs, [0.0], 0.0, 2.0))
    assert exc.value.trajectory is not None


def lotka(y, p):
    a, b = p
    return np.array([a * y[0] - y[0] * y[1], y[0] * y[1] - b * y[1]])


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 2), st.floats(0.5, 2), st.floats(0.3, 3), st.floats(0.3, 3))
def test_matches_scipy_oracle(a, b, x0, y0):
    tr = integrate(IvpProblem(lotka, [x0, y0], 0.0, 5.0, (a, b)))
    ref = solve_ivp(lambda t, y: lotka(y, (a, b)), (0, 5.0), [x0, y0], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    np.testing.assert_allclose(tr.y_end, ref.y[:, -1], rtol=1e-7)
    mid = 2.345
    np.testing.assert_allclose(tr(mid), ref.sol(mid), rtol=1e-7)


def test_problem_validation():
    with pytest.raises(ValueError):
        IvpProblem(oscillator, [1.0, 0.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        IvpProblem(oscillator, [], 0.0, 1.0)

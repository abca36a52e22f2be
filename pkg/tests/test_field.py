import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coldchain import _field_kernels as fk
from coldchain import field as fv
from coldchain._accel import NUMBA_AVAILABLE, kernel_pair
from coldchain.errors import ZeroM1

TWO_PI = 2 * math.pi


def random_state(rng, nvar, n):
    return np.vstack([rng.normal(size=n), 1 + rng.random(n), 0.2 + rng.random(n),
                      0.5 + rng.random(n)][:nvar])


@pytest.mark.parametrize("nvar", [3, 4])
@pytest.mark.parametrize("periodic", [True, False])
def test_numpy_and_loop_kernels_agree(nvar, periodic):
    u = random_state(np.random.default_rng(nvar), nvar, 50)
    a = fk.llf_numpy(u, 0.1, 0.01, periodic)
    b = fk._llf_loop(u, 0.1, 0.01, periodic)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)
    assert fk._max_speed_numpy(u) == pytest.approx(fk._max_speed_loop(u))


@pytest.mark.skipif(not NUMBA_AVAILABLE, reason="numba not installed")
def test_compiled_kernel_matches_python():
    u = random_state(np.random.default_rng(7), 4, 64)
    py, nb = kernel_pair(fk._llf_loop)
    np.testing.assert_allclose(nb(u, 0.1, 0.01, True), py(u, 0.1, 0.01, True), rtol=1e-14)


def test_flux_and_source_examples():
    f, s = fv.flux_and_source(np.array([0.0, 1.0, 0.0]), 1)
    assert not f.any() and not s.any()
    f, s = fv.flux_and_source(np.array([0.0, 1.0, 1.0, 1.0]), 2)
    np.testing.assert_array_equal(f, [0, 1, 1, 1])
    np.testing.assert_array_equal(s, [1, 0, 0, 0])
    with pytest.raises(ZeroM1):
        fv.flux_and_source(np.array([0.0, 1.0, 0.0, 1.0]), 2, cell=3)


def test_rest_state_is_stationary():
    g = fv.Grid1D(32, 0.0, TWO_PI)
    init = fv.initial_field(1, g, lambda x: 0 * x, lambda x: 0 * x)
    r = fv.run(init, 1.0)
    np.testing.assert_array_equal(r.field.u, init.u)
    ph = fv.derive_physical(r.field)
    assert np.all(ph.E == 0) and np.all(ph.n == 1) and np.all(ph.U1 == 0)


@pytest.mark.parametrize("closure", [1, 2])
def test_uniform_state_matches_rotation(closure):
    g = fv.Grid1D(8, 0.0, 1e4)
    u0 = [0.3, 1.0, 0.5] + ([0.7] if closure == 2 else [])
    init = fv.MomentField(closure, g, np.tile(np.array(u0)[:, None], (1, 8)))
    t_end = 2.0
    r = fv.run(init, t_end, dt_max=1e-3, limits=None)
    exact = fv.uniform_solution(0.3, 1.0, 0.5, t_end, 0.7 if closure == 2 else None)
    np.testing.assert_allclose(r.field.u, np.tile(exact[:, None], (1, 8)), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(0.2, 3), st.floats(-1, 1), st.floats(-2, 2), st.floats(0, 7))
def test_uniform_solution_solves_source_system(e, m0, m1, m2, t):
    # central difference of the closed form against the source terms
    h = 1e-6
    u = fv.uniform_solution(e, m0, m1, t, m2)
    du = (fv.uniform_solution(e, m0, m1, t + h, m2) - fv.uniform_solution(e, m0, m1, t - h, m2)) / (2 * h)
    np.testing.assert_allclose(du, [u[2], 0.0, -u[0], -2 * u[0] / m0 * u[2]], atol=1e-6)
    np.testing.assert_allclose(fv.uniform_solution(e, m0, m1, 0.0, m2), [e, m0, m1, m2], atol=1e-12)


def test_source_step_is_exact():
    u = random_state(np.random.default_rng(1), 4, 10)
    half = fv.source_exact(fv.source_exact(u, 0.3), 0.4)
    np.testing.assert_allclose(half, fv.source_exact(u, 0.7), rtol=1e-13)


@pytest.mark.parametrize("closure", [1, 2])
def test_mass_conserved(closure):
    g = fv.Grid1D(256, 0.0, TWO_PI)
    # M_1 rotates into zero after about a quarter period, which ends closure-2 runs
    init = fv.initial_field(closure, g, lambda x: 0.3 * np.sin(x), lambda x: 0.2 * np.cos(x) + 2.0,
                            (lambda x: 0.2 * np.cos(x) + 2.5) if closure == 2 else None)
    r = fv.run(init, 1.0, report_every=10)
    assert r.termination == "reached_end"
    assert max(abs(q.mass_drift) for q in r.reports) < 1e-12
    assert r.reports[0].mass == pytest.approx(TWO_PI, rel=1e-12)


def test_initial_density_matches_field_slope():
    g = fv.Grid1D(512, 0.0, TWO_PI)
    init = fv.initial_field(1, g, lambda x: 0.3 * np.sin(x), lambda x: 0 * x)
    ph = fv.derive_physical(init)
    assert np.max(ph.consistency) < 1e-4


def test_smooth_data_finish():
    g = fv.Grid1D(512, 0.0, TWO_PI)
    init = fv.initial_field(1, g, lambda x: 0.3 * np.sin(x), lambda x: 0 * x)
    assert fv.run(init, 4 * math.pi).termination == "reached_end"


def test_supercritical_data_blow_up():
    g = fv.Grid1D(1024, 0.0, TWO_PI)
    init = fv.initial_field(1, g, lambda x: 0.7 * np.sin(x), lambda x: 0 * x)
    r = fv.run(init, 4 * math.pi)
    assert r.termination == "cell_blow_up" and r.field.t < TWO_PI


def test_zero_m1_ends_closure2_run():
    g = fv.Grid1D(16, 0.0, TWO_PI)
    init = fv.initial_field(2, g, lambda x: 0.2 * np.sin(x), lambda x: 0 * x + 0.3,
                            lambda x: 0 * x + 0.6)
    r = fv.run(init, 10.0)
    assert r.termination == "zero_m1"
    assert isinstance(r.events[0], ZeroM1)


def test_derive_physical_flags_undefined_u2():
    g = fv.Grid1D(8, 0.0, 1.0)
    u = np.tile(np.array([[0.0], [1.0], [0.5], [1.0]]), (1, 8))
    u[2, 3] = 0.0
    ph = fv.derive_physical(fv.MomentField(2, g, u))
    assert ph.u2_undefined[3] and np.isnan(ph.U2[3])
    assert ph.U2[0] == 2.0


def test_outflow_boundary_runs():
    g = fv.Grid1D(64, -5.0, 5.0, "outflow")
    init = fv.initial_field(1, g, lambda x: 0.2 * np.exp(-x * x), lambda x: 0 * x)
    r = fv.run(init, 2.0)
    assert r.termination == "reached_end"


def test_positive_only_mode_validation():
    g = fv.Grid1D(8, 0.0, 1.0)
    init = fv.initial_field(1, g, lambda x: 0 * x, lambda x: 0 * x)
    with pytest.raises(ValueError):
        fv.run(init, 1.0, positive_only=True)


def test_grid_validation():
    with pytest.raises(ValueError):
        fv.Grid1D(4, 0.0, 1.0)
    with pytest.raises(ValueError):
        fv.Grid1D(16, 1.0, 0.0)

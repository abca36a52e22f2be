import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from coldchain import twave as tw
from coldchain.errors import InsufficientTail, NoSmoothWave, SingularManifold


@pytest.mark.parametrize("w, i0", [(1, 0.5), (2, 1), (3, 2.9)])
def test_wave1_period(w, i0):
    assert tw.wave1_period(tw.WaveParams(w, i0)) == pytest.approx(2 * math.pi * w, abs=1e-6)


def test_wave1_no_smooth_wave():
    with pytest.raises(NoSmoothWave):
        tw.wave1_profile(tw.WaveParams(1, 1.2), [0.0])


def test_wave1_zero_amplitude():
    e, u = tw.wave1_profile(tw.WaveParams(1, 0.0), np.linspace(0, 5, 7))
    assert np.all(e == 0) and np.all(u == 0)


def test_wave1_profile_solves_ode():
    params = tw.WaveParams(2.0, 1.3)
    xi = np.linspace(-3, 3, 61)
    e, u = tw.wave1_profile(params, xi, u10=0.4)
    ref = solve_ivp(lambda x, s: tw.rhs_wave1(s, 2.0), (0, 3), [e[30], u[30]], method="DOP853",
                    rtol=1e-12, atol=1e-14, t_eval=xi[30:])
    np.testing.assert_allclose(ref.y[0], e[30:], atol=1e-8)
    np.testing.assert_allclose(ref.y[1], u[30:], atol=1e-8)
    np.testing.assert_allclose(e * e + u * u, 1.3 ** 2, rtol=1e-12)


def test_wave1_branch_has_finite_support_when_not_smooth():
    xi = np.linspace(-1, 1, 201)
    e, u = tw.wave1_branch(tw.WaveParams(1.0, 1.5), xi, 1.5)
    ok = np.isfinite(u)
    assert 0 < ok.sum() < xi.size
    assert np.all(u[ok] >= 1.0 - 1e-9)


def test_rhs_wave2_turning_point_and_singular():
    d = tw.rhs_wave2(np.array([0.0, 0.3, 0.8]), 1.0)
    assert d[1] == 0 and d[2] == 0
    assert d[0] == pytest.approx(0.3 / (0.3 - 1.0))
    with pytest.raises(SingularManifold) as exc:
        tw.rhs_wave2(np.array([0.5, 0.3, 1.0]), 1.0)
    assert exc.value.which == "U2_eq_w"


@pytest.mark.parametrize("w", [1.0, 2.0])
def test_singular_points(w):
    pts = tw.singular_points(w)
    coords = sorted((p.u1, p.u2) for p in pts.points)
    expected = sorted((w * a, w * b) for a, b in [(0, 0), (0, 1), (1, 1), (1, 2), (0.5, 1)])
    np.testing.assert_allclose(coords, expected)


@pytest.mark.parametrize("u1, u2, region", [
    (0.6, 0.7, tw.Region.REGION1),
    (0.2, 1.7, tw.Region.REGION2),
    (1.5, 2.0, tw.Region.REGION3),
    (0.7, 0.6, tw.Region.INVALID),
])
def test_classify_region(u1, u2, region):
    assert tw.classify_region(u1, u2, 1.0) is region


def test_figure5_data_satisfy_region1_inequalities():
    # w > U2 > U1 > 0 holds for (0.2, 0.7) with w = 1
    assert tw.classify_region(0.2, 0.7, 1.0) is tw.Region.REGION1


@pytest.fixture(scope="module")
def region1():
    return tw.wave2_profile(tw.WaveState(0.0, 0.6, 0.7), 1.0)


@pytest.fixture(scope="module")
def region2():
    return tw.wave2_profile(tw.WaveState(0.0, 0.2, 1.7), 1.0)


@pytest.fixture(scope="module")
def region3():
    return tw.wave2_profile(tw.WaveState(0.0, 1.5, 2.0), 1.0)


def test_region1_endpoints(region1):
    assert region1.plus.reason == "A5" and region1.minus.reason == "A5"
    assert region1.plus.distance < 1e-4
    lo, hi = region1.support
    assert lo < 0 < hi and hi == pytest.approx(-lo, rel=1e-6)
    assert region1.plus.behaviour["E"] == "bounded"
    xi, y = region1.samples()
    assert np.all(np.diff(y[:, 0]) <= 1e-12)  # E decreasing


def test_region1_quadratic_law(region1):
    fit = tw.asymptotics_check(region1)
    assert fit.ok_quantity == pytest.approx(2.0, rel=0.2)


def test_region2_endpoints(region2):
    for end in (region2.plus, region2.minus):
        assert end.reason == "A4"
        assert end.distance < 1e-4
        assert abs(end.state[0]) > 1e3
        assert end.behaviour["dU1"] == "vanishing" and end.behaviour["dU2"] == "vanishing"


def test_region3_endpoints(region3):
    for end in (region3.plus, region3.minus):
        assert end.reason == "A3" and end.distance < 1e-4
        assert end.behaviour["E"] == "bounded"
        assert end.behaviour["dU1"] == "unbounded" and end.behaviour["dU2"] == "unbounded"
    fit = tw.asymptotics_check(region3)
    assert fit.ok_quantity < 0.05


def test_density_signatures(region1, region3):
    assert tw.density_signature(region1)[0] == tw.PHYSICAL_PERIODIC
    assert tw.density_signature(region3)[0] == tw.NEGATIVE_DELTA_DENSITY


def test_profile_matches_scipy_inside_support(region3):
    y0 = region3.init.as_array()
    ref = solve_ivp(lambda x, s: tw.rhs_wave2(s, 1.0), (0, 0.5), y0, method="DOP853",
                    rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(region3.forward(0.5), ref.y[:, -1], rtol=1e-7)


def test_asymptotics_requires_terminal_point(region1):
    with pytest.raises(ValueError):
        tw.asymptotics_check(region1, tw.Region.REGION2)
    with pytest.raises(InsufficientTail):
        tw.asymptotics_check(region1, radius=1e-9)


def test_wave2_rejects_invalid_start():
    with pytest.raises(ValueError):
        tw.wave2_profile(tw.WaveState(0.0, 0.7, 0.6), 1.0)

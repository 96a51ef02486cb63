import numpy as np
import pytest
from scipy.integrate import quad

from cgoplanes.cutoffs import (SupportError, default_chi0, make_chi0, make_chi0_holomorphic, make_chi1, make_chi3,
                               make_psi1, smoothstep)
from cgoplanes.fields import axis_coords


def grid_norm(delta, N, L=2.5):
    x = axis_coords(N, L)
    return np.sqrt(np.sum(make_chi1(delta)(x) ** 2) * (2 * L / N))


def test_psi1_unit_norm_and_support():
    psi = make_psi1()
    val, _ = quad(lambda t: psi(t) ** 2, -1, 1)
    assert np.isclose(val, 1.0, rtol=1e-10)
    assert psi(np.array([-1.0, 1.0, 1.5])).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("delta", [0.15, 0.3, 0.6])
def test_chi1_grid_normalization(delta):
    e128 = abs(grid_norm(delta, 128) - 1)
    e64 = abs(grid_norm(delta, 64) - 1)
    assert e128 <= 5e-3
    assert e128 < e64


def test_chi1_second_derivative_matches_finite_differences():
    c = make_chi1(0.3, 0.1)
    t = np.linspace(-0.15, 0.35, 11)
    h = 1e-4
    fd = (c(t + h) - 2 * c(t) + c(t - h)) / h**2
    assert np.allclose(c.second_derivative(t), fd, rtol=1e-4, atol=1e-3)


def test_chi3_is_one_on_chi1_support():
    d = 0.4
    c1, c3 = make_chi1(d, 0.2), make_chi3(d, 0.2)
    t = np.linspace(-2, 2, 2001)
    assert np.all(c3(t)[c1(t) > 0] == 1.0)
    assert np.all(c3(t)[np.abs(t - 0.2) >= 2 * d] == 0.0)


def test_support_errors():
    with pytest.raises(SupportError):
        make_chi1(0.5, 2.2, L=2.5)
    with pytest.raises(ValueError):
        make_chi0(0.9, 0.3, R_omega=1.0)


def test_chi0_profile_and_norm():
    c = make_chi0(1.1, 0.3, 1.0, 2.5)
    assert c(0.5, 0.5) == 1.0 and c(1.5, 0.0) == 0.0
    val, _ = quad(lambda r: c.radial(r) ** 2 * 2 * np.pi * r, 0, 1.4, points=[1.1])
    assert np.isclose(c.C0, np.sqrt(val), rtol=1e-8)
    assert default_chi0(1.0).R_cut == pytest.approx(1.1)
    h = make_chi0_holomorphic((0.0, 1.0), 1.1, 0.3, 1.0)
    assert h.holomorphic and np.isclose(h(0.3, 0.4), 0.3 + 0.4j)


def test_smoothstep_monotone():
    t = np.linspace(-0.5, 1.5, 401)
    s = smoothstep(t)
    assert np.all(np.diff(s) >= 0) and s[0] == 0 and s[-1] == 1

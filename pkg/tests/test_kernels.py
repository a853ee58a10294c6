import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from plasmoheat import kernels as K
from plasmoheat import oracles

coord = st.floats(-5, 5, allow_nan=False)
point = st.tuples(coord, coord, coord).map(np.array)


def test_heat_kernel_unit_value():
    x = np.zeros(3)
    assert K.heat_kernel(x, 1.0, x, 0.0, 4 * np.pi) == pytest.approx(1.0, abs=1e-15)


def test_heat_kernel_causal():
    assert K.heat_kernel([1, 2, 3], 0.0, [0, 0, 0], 0.5, 1.0) == 0.0
    assert K.heat_kernel([0, 0, 0], 1.0, [0, 0, 0], 1.0, 1.0) == 0.0


@pytest.mark.parametrize("kappa", [0.5, 1.0, 4 * np.pi])
@pytest.mark.parametrize("t", [0.01, 0.3, 2.0])
def test_gaussian_mass_is_one(kappa, t):
    # analytic: (kappa/(4 pi t))^{3/2} (pi / a)^{3/2} with a = kappa/(4t)
    a = kappa / (4 * t)
    assert (kappa / (4 * np.pi * t)) ** 1.5 * (np.pi / a) ** 1.5 == pytest.approx(1.0, rel=1e-14)
    assert oracles.gaussian_mass(K.heat_kernel, kappa, t) == pytest.approx(1.0, abs=1e-8)


def test_heat_kernel_dt_matches_finite_difference():
    x, y = np.array([1.0, 0, 0]), np.zeros(3)
    t, h = 0.3, 1e-5
    fd = (K.heat_kernel(x, t + h, y, 0, 1.0) - K.heat_kernel(x, t - h, y, 0, 1.0)) / (2 * h)
    assert K.heat_kernel_dt(x, t, y, 0.0, 1.0) == pytest.approx(fd, rel=1e-6)


def test_heat_kernel_dt_vanishes_at_coincident_times():
    x, y = np.array([0.5, 0, 0]), np.zeros(3)
    vals = [abs(K.heat_kernel_dt(x, s, y, 0.0, 1.0)) for s in (1e-2, 1e-3, 1e-4)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-200


def test_heat_kernel_dt_domain_error():
    with pytest.raises(K.KernelDomainError):
        K.heat_kernel_dt(np.zeros(3), 0.0, np.zeros(3), 0.0, 1.0)


@pytest.mark.parametrize("r,s,kappa", [(0.3, 0.05, 1.0), (1.0, 2.0, 4.0), (0.1, 1e-3, 0.5)])
def test_time_integral_closed_form(r, s, kappa):
    ref, _ = integrate.quad(lambda u: K.heat_kernel_r(r, u, kappa), 0, s, epsabs=0, epsrel=1e-12, limit=200)
    assert K.heat_kernel_time_integral_r(r, s, kappa) == pytest.approx(ref, rel=1e-9)


def test_cube_average_against_cubature():
    off = np.array([0.3, -0.1, 0.05])
    a, s, kappa = 0.2, 0.04, 2.0
    val = K.heat_kernel_cube_average(off, a, s, kappa)
    ref, _ = integrate.tplquad(
        lambda z, y, x: K.heat_kernel_r(np.sqrt((off[0] - x) ** 2 + (off[1] - y) ** 2 + (off[2] - z) ** 2), s, kappa),
        -a, a, -a, a, -a, a, epsabs=1e-12, epsrel=1e-10)
    assert val == pytest.approx(ref, rel=1e-7)


def test_helmholtz_examples():
    x, y = np.zeros(3), np.array([1.0, 0, 0])
    assert K.helmholtz_green(0.0, x, y) == pytest.approx(1 / (4 * np.pi), rel=1e-15)
    assert K.helmholtz_green(np.pi, x, y) == pytest.approx(-1 / (4 * np.pi), rel=1e-14)
    assert np.imag(K.helmholtz_green(0.0, x, [0, 3, 1])) == 0.0


def test_helmholtz_fd_residual():
    k, y = 1.7, np.zeros(3)
    x = np.array([2.0, 0.0, 0.0])
    g = lambda p: K.helmholtz_green(k, p, y)
    res = oracles.fd_laplacian(g, x, 1e-3) + k * k * g(x)
    assert abs(res) < 1e-4 * abs(g(x))


def test_helmholtz_singular():
    with pytest.raises(K.KernelDomainError):
        K.helmholtz_green(1.0, [1, 1, 1], [1, 1, 1])
    with pytest.raises(K.KernelDomainError):
        K.dyadic_green(1.0, [1, 1, 1], [1, 1, 1])


def test_dyadic_static_axis():
    got = K.dyadic_green(0.0, [1, 0, 0], [0, 0, 0])
    np.testing.assert_allclose(got, np.diag([2.0, -1.0, -1.0]) / (4 * np.pi), atol=1e-15)


def test_dyadic_matches_fd_hessian_random_pairs():
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.uniform(-1, 1, 3)
        y = x + rng.normal(size=3) * 0.7
        k = rng.uniform(0, 3)
        g = lambda p: K.helmholtz_green(k, p, y)
        H = oracles.fd_hessian(g, x, 2e-4)
        ref = H + k * k * g(x) * np.eye(3)
        got = K.dyadic_green(k, x, y)
        assert np.max(np.abs(got - ref)) <= 1e-6 * np.max(np.abs(ref))


@settings(max_examples=60, deadline=None)
@given(point, point, st.floats(0, 5))
def test_dyadic_symmetric_and_trace(x, y, k):
    if np.linalg.norm(x - y) < 1e-2:
        return
    U = K.dyadic_green(k, x, y)
    np.testing.assert_allclose(U, U.T, rtol=0, atol=1e-14 * np.max(np.abs(U)))
    np.testing.assert_allclose(U, K.dyadic_green(k, y, x), rtol=1e-13, atol=0)
    g = K.helmholtz_green(k, x, y)
    assert abs(np.trace(U) - 2 * k * k * g) <= 1e-8 * max(1.0, np.max(np.abs(U)))


@settings(max_examples=60, deadline=None)
@given(point, point, point, st.floats(0.01, 3), st.floats(0.1, 10))
def test_translation_invariance(x, y, shift, s, kappa):
    assert K.heat_kernel(x + shift, s, y + shift, 0.0, kappa) == pytest.approx(
        K.heat_kernel(x, s, y, 0.0, kappa), rel=1e-9, abs=1e-300)
    if np.linalg.norm(x - y) > 1e-2:
        np.testing.assert_allclose(K.dyadic_green(1.3, x + shift, y + shift),
                                   K.dyadic_green(1.3, x, y), rtol=1e-8, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(point, point, st.floats(-3, 3), st.floats(0.1, 10))
def test_heat_kernel_nonnegative(x, y, s, kappa):
    v = K.heat_kernel(x, s, y, 0.0, kappa)
    assert v >= 0.0
    if s <= 0:
        assert v == 0.0


def test_heat_kernel_finite_at_tiny_lags():
    for s in (1e-300, 1e-310):
        assert K.heat_kernel_r(0.1, s, 1.0) == 0.0
    assert K.heat_kernel_r(0.0, 1e-310, 1.0) == np.inf

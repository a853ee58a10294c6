import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from plasmoheat.materials import (
    MaterialParams,
    Modulation,
    NoResonanceError,
    derived_contrasts,
    drude_permittivity,
    modulation_f,
    resonance_gap,
    resonance_offset_slope,
    resonant_frequency,
    validate_regime,
)

GOLD = MaterialParams(eps_inf=1.0, eps0_drude=9.84, k_p=9.096, zeta=0.072, eps_m=1.0)


def test_drude_undamped_is_real():
    p = MaterialParams(zeta=0.0)
    v = drude_permittivity(2.0, p)
    assert v.imag == 0.0
    assert v.real == pytest.approx(9.84 - 9.096**2 / 4.0, rel=1e-15)


def test_drude_high_frequency_limit():
    v = drude_permittivity(1e6 * GOLD.k_p, GOLD)
    assert abs(v - GOLD.eps_inf * GOLD.eps0_drude) <= 1e-9 * abs(GOLD.eps_inf * GOLD.eps0_drude)


def test_drude_gold_extended_precision():
    mpmath.mp.dps = 50
    k = mpmath.mpf(2)
    ref = 1 * (mpmath.mpf("9.84") - mpmath.mpf("9.096") ** 2 / (k * k + 1j * mpmath.mpf("0.072") * k))
    got = drude_permittivity(2.0, GOLD)
    assert abs(got - complex(ref)) <= 1e-14 * abs(complex(ref))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(0, 5))
def test_drude_absorbing(k, zeta):
    assert drude_permittivity(k, GOLD, zeta).imag >= 0


def test_resonance_real_background_has_zero_damping():
    _, z = resonant_frequency(1 / 3, GOLD)
    assert z == 0.0


def test_resonance_matches_dispersion_root():
    k0, _ = resonant_frequency(1 / 3, GOLD)
    root = brentq(lambda k: (1 + (drude_permittivity(k, GOLD, 0.0) - 1.0) / 3).real, 0.5, 8.0, xtol=1e-15)
    assert k0 == pytest.approx(root, rel=1e-12)
    assert k0 == pytest.approx(2.643, abs=1e-3)


def test_resonance_domain_error():
    bad = MaterialParams(eps_inf=1.0, eps0_drude=0.5, eps_m=10.0)
    with pytest.raises(NoResonanceError, match="no real resonance"):
        resonant_frequency(1 / 3, bad)


def test_gap_vanishes_at_resonance():
    k0, z0 = resonant_frequency(1 / 3, GOLD)
    assert resonance_gap(k0, z0, 1 / 3, GOLD) < 1e-10


def test_gap_unit_for_zero_eigenvalue():
    np.testing.assert_array_equal(resonance_gap(np.linspace(0.5, 5, 7), 0.1, 0.0, GOLD), 1.0)


def test_gap_scales_like_delta_h():
    h = 1.9
    k0, z0 = resonant_frequency(1 / 3, GOLD)
    deltas = np.array([0.1, 0.05, 0.025])
    gaps = [resonance_gap(k0 * (1 + d**h), z0 + d**h, 1 / 3, GOLD) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(gaps), 1)[0]
    assert abs(slope - h) <= 0.25


def test_gap_argmin_on_grid():
    k0, _ = resonant_frequency(1 / 3, GOLD)
    ks = np.arange(2.0, 3.3, 0.005)
    kmin = ks[np.argmin(resonance_gap(ks, GOLD.zeta, 1 / 3, GOLD))]
    assert abs(kmin - k0) <= 0.005


def test_offset_slope_linearisation():
    eta0, g = resonance_offset_slope(1 / 3, GOLD, 2.0, 3.0)
    assert eta0 == pytest.approx(-3.0, abs=1e-12)
    k0, z0 = resonant_frequency(1 / 3, GOLD)
    for s in (1e-3, 1e-4):
        exact = 1 + contrast_at(k0 + 2 * s, z0 + 3 * s) / 3
        assert abs(exact - g * s) <= 10 * abs(g) * s * s


def contrast_at(k, z):
    return drude_permittivity(k, GOLD, z) - GOLD.eps_m


def test_derived_contrasts_consistency():
    p = MaterialParams(gamma_p=40.0, gamma_m=1.0, kappa_m=2.0, delta=0.05, beta=1.9, h=1.9)
    c = derived_contrasts(2.5, p, 4 * np.pi / 3)
    assert c.b_i == c.b_bar * p.delta ** (3 - p.beta)
    assert c.alpha_bar == pytest.approx(c.alpha * p.delta**p.beta)
    assert c.b_i == pytest.approx(c.alpha / p.kappa_m * p.delta**3 * 4 * np.pi / 3, rel=1e-13)
    eps_bar = drude_permittivity(2.5, p).imag * p.delta ** (-p.h)
    assert c.a_bar == pytest.approx(p.gamma_m / p.gamma_p_bar * 2.5 * eps_bar / (2 * np.pi * p.kappa_m))
    # eta is recomputed for a new k
    assert derived_contrasts(2.6, p, 1.0).eta != c.eta


def test_modulation_examples():
    m = Modulation(r=2, ell=1.0, T=2.0)
    assert modulation_f(-1.0, m) == 0.0
    assert modulation_f(0.25, m) == pytest.approx(0.0625, rel=1e-15)
    assert modulation_f(1.0, m) == 0.0
    assert modulation_f(1.7, m) == 0.0


@pytest.mark.parametrize("r", [1, 2, 3])
def test_modulation_low_derivatives_vanish_at_zero(r):
    m = Modulation(r=r, ell=1.0, T=1.0)
    h = 1e-3
    # forward differences of order n at t=0 approximate the n-th derivative
    for n in range(r):
        vals = [modulation_f(j * h, m) for j in range(n + 1)]
        deriv = sum((-1) ** (n - j) * math.comb(n, j) * vals[j] for j in range(n + 1)) / h**n
        assert abs(deriv) < 1e-6 * max(1.0, math.factorial(n)) + 10 * h ** (r - n)


def test_modulation_smooth_and_monotone():
    m = Modulation(r=2, ell=1.0, T=1.0)
    t = np.linspace(0, 0.5, 501)
    assert np.all(np.diff(modulation_f(t, m)) >= 0)
    tt = np.linspace(0.45, 1.05, 6001)
    f = modulation_f(tt, m)
    d1 = np.diff(f) / np.diff(tt)
    assert np.max(np.abs(np.diff(d1))) < 1e-2  # no kinks at the joins


def test_regime_nominal_passes():
    delta, beta = 0.05, 1.9
    d = delta ** (1 - beta / 3)
    M = math.floor(d**-3)
    p = MaterialParams(h=1.9, beta=beta, delta=delta, gamma_p=1.0 / delta**beta)
    rep = validate_regime(p, {"M": M, "d": d, "effective": True})
    assert rep.all_pass, rep.checks


def test_regime_warns_on_h():
    p = MaterialParams(h=1.0, gamma_p=1.0 / 0.05**1.9)
    rep = validate_regime(p, {"M": 27, "d": 1 / 3})
    assert any("outside (9/5,2)" in w for w in rep.warnings())


def test_regime_single_particle():
    p = MaterialParams(gamma_p=1.0 / 0.05**1.9)
    rep = validate_regime(p, {"M": 1, "d": 1.0})
    assert any("single particle" in w for w in rep.warnings())

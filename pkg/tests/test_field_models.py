import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from clr_magcount.errors import ConfigError, DomainError
from clr_magcount.field_models import (
    build_ground_state, compact_bump_field, custom_field, field_from_json, flux, gaussian_field,
    gaussian_with_flux, integer_flux, m_alpha, zero_field,
)


def test_flux_examples():
    assert flux(gaussian_field(2.0)) == pytest.approx(1.0, rel=1e-9)
    assert flux(zero_field()) == 0.0
    assert flux(gaussian_field(5.0)) == pytest.approx(2.5, rel=1e-9)


def test_flux_by_quadrature_matches_closed_form():
    # custom profile: no closed-form partial flux, so the table is used
    fm = custom_field(lambda r: 3.0 * np.exp(-r ** 2), eps=2.0, r_support=10.0)
    ref = integrate.quad(lambda r: 3.0 * math.exp(-r * r) * r, 0, np.inf)[0]
    assert fm.alpha == pytest.approx(ref, rel=1e-9)
    assert fm.alpha == pytest.approx(1.5, rel=1e-9)


def test_compact_bump_flux():
    fm = compact_bump_field(6.0, 1.0)
    ref = integrate.quad(lambda r: float(fm.B(r)) * r, 0, 1.0)[0]
    assert fm.alpha == pytest.approx(ref, rel=1e-9)


def test_decay_envelope_enforced():
    with pytest.raises(DomainError):
        custom_field(lambda r: 1.0 / (1 + r ** 2), eps=2.0, r_support=10.0)


def test_zero_field_ground_state():
    gs = build_ground_state(zero_field())
    r = np.geomspace(1e-4, 1e4, 9)
    assert np.allclose(gs.h(r), 0.0)
    for v in gs.constants().values():
        assert v == pytest.approx(1.0, abs=1e-12)


def test_h_prime_gaussian():
    gs = build_ground_state(gaussian_field(2.0))
    r = np.geomspace(1e-3, 30, 25)
    expect = (1 - np.exp(-r ** 2)) / r
    assert np.allclose(gs.h_prime(r), expect, rtol=1e-9, atol=1e-14)


def test_h_derivative_from_table():
    # finite differences of h against phi/r for a tabulated field
    fm = custom_field(lambda r: 2.0 * np.exp(-r ** 2), eps=2.0, r_support=10.0)
    gs = build_ground_state(fm)
    for r in (0.1, 0.8, 2.0, 6.0):
        t, dt = math.log(r), 1e-4
        d = (gs.h_t(np.array([t + dt]))[0] - gs.h_t(np.array([t - dt]))[0]) / (2 * dt)
        assert d == pytest.approx(1 - math.exp(-r * r), rel=1e-6, abs=1e-9)


def test_ground_state_constants_gaussian():
    gs = build_ground_state(gaussian_field(2.0))
    c = gs.constants()
    assert 0 < c["mu_plus"] <= c["m_plus"] < math.inf
    assert 0 < c["mu_minus"] <= c["m_minus"] < math.inf
    assert c["M_plus"] >= 1 and c["M_minus"] >= 1
    # oracle: the extremes of h - alpha log(1+r) on a dense grid
    r = np.geomspace(1e-8, 1e8, 400001)
    d = gs.h(r) - np.log1p(r)
    assert c["M_plus"] == pytest.approx(math.exp(d.max() - min(d.min(), 0.0)), rel=1e-6)


def test_h_normalisation_and_growth():
    gs = build_ground_state(gaussian_with_flux(1.5))
    r = np.array([1e3, 1e5])
    # beyond the field h = alpha log r exactly, and log(1+r) - log r ~ 1/r
    assert np.allclose(gs.h(r), 1.5 * np.log(r), rtol=0, atol=1e-7)
    assert np.all(np.abs(gs.h(r) - 1.5 * np.log1p(r)) <= 1.5 / r)


def test_m_alpha_examples():
    assert m_alpha(0) == 2
    assert m_alpha(1.5) == 2
    assert m_alpha(3) == 4
    with pytest.raises(DomainError):
        m_alpha(-0.5)


@given(st.integers(1, 40), st.floats(0.0, 0.999))
def test_m_alpha_piecewise_constant(k, frac):
    assert m_alpha(k + frac) == m_alpha(k)
    if k >= 2:
        assert m_alpha(k) - m_alpha(k - 1e-6) == 1


def test_integer_flux_tolerance():
    assert integer_flux(2.0 + 5e-10)
    assert not integer_flux(2.3)
    with pytest.warns(RuntimeWarning):
        assert not integer_flux(2.0 + 1e-7)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integer_flux(2.0 + 1e-3)


@pytest.mark.parametrize("fm", [gaussian_field(2.0), gaussian_field(0.6, 2.0), compact_bump_field(6.0)])
def test_phi_monotone_and_limit(fm):
    gs = build_ground_state(fm)
    r = np.geomspace(1e-6, 1e6, 2001)
    phi = gs.phi(r)
    assert np.all(np.diff(phi) >= -1e-14)
    assert phi[-1] == pytest.approx(fm.alpha, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.2, 3.0))
def test_scaling_invariance(amp, c):
    a = build_ground_state(gaussian_field(amp))
    b = build_ground_state(gaussian_field(c * amp))
    assert b.alpha == pytest.approx(c * a.alpha, rel=1e-9)
    r = np.geomspace(1e-3, 1e3, 13)
    assert np.allclose(b.h(r), c * a.h(r), rtol=1e-7, atol=1e-9)


def test_field_json():
    fm = field_from_json({"type": "gaussian", "amplitude": 2.0, "width": 1.0})
    assert fm.alpha == pytest.approx(1.0)
    assert field_from_json("gaussian:alpha=0.3").alpha == pytest.approx(0.3)
    assert field_from_json('{"type": "compact_bump", "alpha": 1.0}').alpha == pytest.approx(1.0, rel=1e-9)
    with pytest.raises(ConfigError):
        field_from_json({"type": "dipole"})
    with pytest.raises(ConfigError):
        field_from_json({"type": "gaussian"})

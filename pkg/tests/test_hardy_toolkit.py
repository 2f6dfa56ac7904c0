import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clr_magcount.errors import DomainError
from clr_magcount.field_models import gaussian_with_flux
from clr_magcount.functionals import hardy_weight
from clr_magcount.hardy_toolkit import (
    HardyCase, form_sides, hardy_weight_potential, muckenhoupt_constant, operator_hardy_check,
    verify_hardy,
)


def classical():
    return HardyCase(U=lambda t: np.ones_like(t), W=lambda t: 0.25 / t ** 2, variant="origin_side")


def power_case(a, c):
    return HardyCase(log_U=lambda t: a * np.log(t), log_W=lambda t: math.log(c) + (a - 2) * np.log(t),
                     variant="origin_side")


def test_classical_constant():
    C = muckenhoupt_constant(classical())
    assert not C.divergent
    assert float(C) == pytest.approx(1.0, abs=1e-6)


def test_zero_weight():
    case = HardyCase(U=lambda t: np.ones_like(t), W=lambda t: np.zeros_like(t))
    assert float(muckenhoupt_constant(case)) == 0.0


@pytest.mark.xfail(strict=True, raises=DomainError,
                   reason="int_0^s U^-1 diverges for U = t^(1+2m), so the cap_at_R hypothesis fails")
@pytest.mark.parametrize("m", [1, 2])
def test_cap_example_literal(m):
    case = HardyCase(U=lambda t: t ** (1 + 2 * m), W=lambda t: t ** (2 * m - 1), variant="cap_at_R", R=1.0)
    assert math.isfinite(float(muckenhoupt_constant(case)))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_cap_example_in_log_variable(m):
    # the same channel weights written in tau = -log r, vanishing at r = 1
    case = HardyCase(log_U=lambda t: -2 * m * t, log_W=lambda t: -2 * m * t, variant="origin_side")
    assert float(muckenhoupt_constant(case)) == pytest.approx(1 / m ** 2, rel=1e-8)


def test_infinity_and_tail_variants():
    U = lambda t: t ** 2
    W = lambda t: np.ones_like(t)
    assert float(muckenhoupt_constant(HardyCase(U=U, W=W, variant="infinity_side"))) == pytest.approx(4.0, rel=1e-6)
    assert float(muckenhoupt_constant(HardyCase(U=U, W=W, variant="tail_from_R", R=2.0))) == pytest.approx(4.0, rel=1e-6)


def test_divergent_constant_flagged():
    # W decays too slowly for U = 1: the product grows without bound
    case = HardyCase(U=lambda t: np.ones_like(t), W=lambda t: 1 / (1 + t))
    assert muckenhoupt_constant(case).divergent


def test_variant_validation():
    with pytest.raises(DomainError):
        HardyCase(U=np.ones_like, W=np.ones_like, variant="both_sides")
    with pytest.raises(DomainError):
        HardyCase(U=np.ones_like, W=np.ones_like, variant="cap_at_R")


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.0, 0.8), st.floats(0.01, 100.0))
def test_power_weights_closed_form(a, c):
    assert float(muckenhoupt_constant(power_case(a, c))) == pytest.approx(4 * c / (1 - a) ** 2, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0))
def test_scaling(c, d):
    base = classical()
    C = float(muckenhoupt_constant(base))
    assert float(muckenhoupt_constant(base.scaled(c, c))) == pytest.approx(C, rel=1e-10)
    assert float(muckenhoupt_constant(base.scaled(1.0, d))) == pytest.approx(d * C, rel=1e-10)


def test_classical_trials():
    rep = verify_hardy(classical(), trials=100)
    assert rep.passed and rep.violations == 0
    assert rep.max_ratio <= 1.0 + 1e-9
    assert rep.trials == 100


@settings(max_examples=8, deadline=None)
@given(st.floats(-2.0, 0.5), st.floats(0.1, 10.0), st.integers(0, 2 ** 31))
def test_random_functions_never_beat_constant(a, c, seed):
    rep = verify_hardy(power_case(a, c), trials=20, seed=seed)
    assert rep.violations == 0
    assert rep.max_ratio <= float(rep.constant) + 1e-9


def test_trials_are_seeded():
    a = verify_hardy(classical(), trials=10, seed=7)
    b = verify_hardy(classical(), trials=10, seed=7)
    assert a.max_ratio == b.max_ratio
    assert verify_hardy(classical(), trials=10, seed=7, threads=3).max_ratio == a.max_ratio


def test_form_sides_trivial_cases():
    case = classical()
    t = np.geomspace(0.1, 10, 9)
    assert form_sides(case, t, np.zeros(9)) == (0.0, 0.0)
    # U = W with f and f' supported where W = 0
    bump = HardyCase(U=lambda s: (s > 2).astype(float), W=lambda s: (s > 2).astype(float))
    lhs, rhs = form_sides(bump, [0.5, 1.0, 1.5], [0.0, 1.0, 0.0])
    assert lhs == 0.0 and rhs == 0.0


def test_form_sides_linear_ramp():
    # f = t on (0, 1), then constant 1: lhs = int_0^1 1/4 dt + int_1^inf 1/(4t^2) dt, rhs = 1
    lhs, rhs = form_sides(classical(), [1e-12, 1.0], [1e-12, 1.0])
    assert lhs == pytest.approx(0.5, rel=1e-9)
    assert rhs == pytest.approx(1.0, rel=1e-9)


def test_hardy_weight_potential_matches_functional():
    pm = hardy_weight_potential()
    r = np.geomspace(1e-8, 1e8, 33)
    assert np.allclose(pm.v_bar(r), hardy_weight(r), rtol=1e-12)
    t = np.array([-700.0, -50.0, 0.0, 50.0, 1e20])
    with np.errstate(over="ignore", divide="ignore"):
        direct = np.log(hardy_weight(np.exp(np.clip(t, -700, 700)))) + 2 * np.clip(t, -700, 700)
    assert np.all(np.isfinite(pm.log_r2v(t)))
    assert np.allclose(pm.log_r2v(t[:4]), direct[:4], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5])
def test_operator_level_hardy(alpha):
    res = operator_hardy_check(gaussian_with_flux(alpha), spins=("minus", "plus"))
    assert len(res) == 2 * 2 * (math.ceil(alpha) + 1)
    for r in res:
        assert r.negative_inertia == 0, r
        assert r.c > 0

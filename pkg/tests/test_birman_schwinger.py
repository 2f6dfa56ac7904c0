import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clr_magcount.birman_schwinger import (
    KAPPA_LADDER, KernelSpec, bs_count, bs_trace, build_bs_operator, check_positive_definite,
    dirichlet_limit, dirichlet_resolvent, kernel_eval, kernel_spec_from_string, log_exterior,
    log_interior, min_power, resolvent_kernel, resolvent_limit, t0_limit, t_alpha_limit,
)
from clr_magcount.errors import DomainError
from clr_magcount.field_models import zero_field
from clr_magcount.potential_models import (
    disk_potential, gaussian_potential, potential_from_json, zero_potential,
)
from clr_magcount.radial_spectra import RadialGrid, build_channel, count_negative

pos = st.floats(math.log(1e-4), math.log(1e4))
unit = st.floats(math.log(1e-6), 0.0)
outside = st.floats(0.0, math.log(1e6))


def _all_kinds(alpha):
    return [log_interior(), log_exterior(), min_power(alpha), t0_limit(alpha), t_alpha_limit(alpha)]


def _mp_resolvent(m, alpha, kappa, r, rp):
    """Independent mpmath evaluation of the matched Green's function."""
    r, rp = sorted((mpmath.mpf(r), mpmath.mpf(rp)))
    nu = abs(alpha - m)
    I, K = mpmath.besseli, mpmath.besselk
    dI = lambda n, z: mpmath.diff(lambda x: I(n, x), z)
    dK = lambda n, z: mpmath.diff(lambda x: K(n, x), z)
    k = kappa
    A = k * dI(m, k) * K(nu, k) + alpha * I(m, k) * K(nu, k) - k * I(m, k) * dK(nu, k)
    B = -k * dI(m, k) * I(nu, k) - alpha * I(m, k) * I(nu, k) + k * I(m, k) * dI(nu, k)
    D = -k * dK(m, k) * K(nu, k) - alpha * K(m, k) * K(nu, k) + k * K(m, k) * dK(nu, k)
    root = mpmath.sqrt(r * rp)
    if rp <= 1:
        return float(root * (I(m, k * r) * K(m, k * rp) + D / A * I(m, k * r) * I(m, k * rp)))
    if r > 1:
        return float(root * (I(nu, k * r) * K(nu, k * rp) + B / A * K(nu, k * r) * K(nu, k * rp)))
    return float(root * I(m, k * r) * K(nu, k * rp) / A)


def test_kernel_examples():
    assert kernel_eval(t0_limit(1), 0.5, 0.5) == pytest.approx(0.5 * (0.5 - math.log(0.5)), rel=1e-14)
    assert kernel_eval(t0_limit(1), 0.5, 0.5) == pytest.approx(0.5965736, abs=1e-7)
    assert kernel_eval(t0_limit(1), 0.5, 2.0) == pytest.approx(0.25, rel=1e-14)
    for r in (1e-5, 0.3, 0.99):
        assert kernel_eval(log_interior(), r, 1.0) == 0.0
    ta = t_alpha_limit(2)
    assert kernel_eval(ta, 1.0, 1.0) == pytest.approx(0.25, rel=1e-14)
    assert kernel_eval(ta, 1.0 - 1e-12, 1.0 - 1e-12) == pytest.approx(0.25, rel=1e-9)
    assert kernel_eval(ta, 1.0 + 1e-12, 1.0 + 1e-12) == pytest.approx(0.25, rel=1e-9)


def test_kernel_domain_errors():
    with pytest.raises(DomainError):
        kernel_eval(log_interior(), 2.0, 0.5)
    with pytest.raises(DomainError):
        kernel_eval(log_exterior(), 0.5, 2.0)
    with pytest.raises(DomainError):
        kernel_eval(min_power(1), -1.0, 1.0)
    with pytest.raises(DomainError):
        KernelSpec("min_power")
    with pytest.raises(DomainError):
        KernelSpec("resolvent", 1.0, 0, 1e-8)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["min_power", "t0_limit", "t_alpha_limit"]), st.floats(0.1, 5.0), pos, pos)
def test_symmetric_and_nonnegative(kind, alpha, a, b):
    spec = KernelSpec(kind, alpha)
    r, rp = math.exp(a), math.exp(b)
    k1, k2 = kernel_eval(spec, r, rp), kernel_eval(spec, rp, r)
    assert k1 == k2
    assert k1 >= 0


@given(unit, unit)
def test_log_interior_symmetric_nonnegative(a, b):
    r, rp = math.exp(a), math.exp(b)
    assert kernel_eval(log_interior(), r, rp) == kernel_eval(log_interior(), rp, r) >= 0


@given(outside, outside)
def test_log_exterior_symmetric_nonnegative(a, b):
    r, rp = math.exp(a), math.exp(b)
    assert kernel_eval(log_exterior(), r, rp) == kernel_eval(log_exterior(), rp, r) >= 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 4.0), pos, pos)
def test_inversion_relation(alpha, a, b):
    # K_alpha(r, r') = r r' K_0(1/r, 1/r')
    r, rp = math.exp(a), math.exp(b)
    lhs = kernel_eval(t_alpha_limit(alpha), r, rp)
    rhs = r * rp * kernel_eval(t0_limit(alpha), 1 / r, 1 / rp)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("m,alpha,kappa,r,rp", [
    (0, 1.0, 1e-2, 0.5, 0.5), (0, 0.5, 0.3, 0.2, 3.0), (2, 2.0, 1e-3, 2.0, 3.0),
    (1, 2.5, 0.7, 0.4, 0.9), (3, 1.2, 5.0, 1.5, 2.5), (0, 1.0, 1e-4, 0.5, 2.0),
])
def test_resolvent_against_mpmath(m, alpha, kappa, r, rp):
    mpmath.mp.dps = 30
    assert resolvent_kernel(m, alpha, kappa, r, rp) == pytest.approx(_mp_resolvent(m, alpha, kappa, r, rp), rel=1e-9)


def test_resolvent_examples():
    assert resolvent_limit(0, 1.0, 0.5, 0.5) == pytest.approx(0.5965736, rel=1e-3)
    assert resolvent_limit(2, 2.0, 2.0, 3.0) == pytest.approx(math.sqrt(6) * (0.25 + math.log(2)), rel=1e-3)
    for m, alpha, kappa in ((0, 1.0, 1e-4), (2, 2.0, 1.0), (5, 0.3, 50.0), (1, 3.5, 1e-6)):
        a = resolvent_kernel(m, alpha, kappa, 0.3, 1.7)
        b = resolvent_kernel(m, alpha, kappa, 1.7, 0.3)
        assert a == pytest.approx(b, rel=1e-12)


def test_resolvent_errors():
    with pytest.raises(DomainError):
        resolvent_kernel(0, 1.0, 1e-7, 1.0, 1.0)
    with pytest.raises(DomainError):
        resolvent_kernel(-1, 1.0, 1e-3, 1.0, 1.0)
    with pytest.raises(DomainError):
        resolvent_kernel(0, 0.0, 1e-3, 1.0, 1.0)


@pytest.mark.parametrize("m,alpha,limit", [(0, 1.0, t0_limit(1.0)), (0, 2.5, t0_limit(2.5)),
                                           (1, 1.0, t_alpha_limit(1.0)), (2, 2.0, t_alpha_limit(2.0))])
def test_kappa_gap_shrinks(m, alpha, limit):
    kappas = [1e-2 / 2 ** j for j in range(0, 10)]
    for r, rp in ((0.3, 0.6), (0.5, 2.0), (1.5, 4.0)):
        ref = kernel_eval(limit, r, rp)
        gaps = [abs(resolvent_kernel(m, alpha, k, r, rp) - ref) for k in kappas]
        assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))


def test_dirichlet_resolvent_limits():
    for kind, pts in (("log_interior", [(0.2, 0.5), (0.05, 0.9)]), ("log_exterior", [(2.0, 5.0), (1.5, 20.0)])):
        spec = KernelSpec(kind)
        for r, rp in pts:
            assert dirichlet_limit(kind, r, rp) == pytest.approx(kernel_eval(spec, r, rp), rel=1e-3)
    with pytest.raises(DomainError):
        dirichlet_resolvent("log_interior", 1e-3, 0.5, 2.0)


def test_trace_examples():
    assert float(bs_trace(min_power(1), disk_potential())) == pytest.approx(0.25, rel=1e-9)
    assert float(bs_trace(log_interior(), disk_potential())) == pytest.approx(0.25, rel=1e-9)
    for spec in _all_kinds(1.0):
        assert float(bs_trace(spec, zero_potential())) == 0.0


def test_trace_against_quadrature():
    V = gaussian_potential(1.0, 0.7)
    for spec in (t0_limit(1.5), t_alpha_limit(0.5)):
        ref = float(mpmath.quad(lambda r: mpmath.exp(-(r / 0.7) ** 2) * kernel_eval(spec, float(r), float(r)),
                                [0, 1, 10, mpmath.inf]))
        assert float(bs_trace(spec, V)) == pytest.approx(ref, rel=1e-8)


def test_trace_of_resolvent_kind():
    spec = KernelSpec("resolvent", 1.0, 0, 0.5)
    V = disk_potential()
    ref = float(mpmath.quad(lambda r: resolvent_kernel(0, 1.0, 0.5, float(r), float(r)), [1e-10, 1e-3, 1]))
    assert float(bs_trace(spec, V)) == pytest.approx(ref, rel=1e-7)


def test_count_examples():
    assert bs_count(min_power(1), disk_potential(), 0.0) == 0
    tr = float(bs_trace(log_interior(), disk_potential()))
    assert bs_count(log_interior(), disk_potential(), 0.99 / tr) == 0
    for lam in (1.0, 10.0, 100.0):
        assert bs_count(log_interior(), disk_potential(), lam) <= lam * 0.25


def test_operator_symmetric_and_psd():
    op = build_bs_operator(t0_limit(1.0), gaussian_potential(), 256)
    M = op.matrix
    assert np.max(np.abs(M - M.T)) <= 1e-12 * np.max(np.abs(M))
    ev = op.eigenvalues()
    assert ev.min() >= -1e-10 * np.linalg.norm(M, 2)
    assert op.trace() == pytest.approx(float(bs_trace(t0_limit(1.0), gaussian_potential())), rel=1e-3)


@pytest.mark.parametrize("spec", _all_kinds(1.0) + _all_kinds(2.5))
def test_trace_dominates_count(spec):
    V = potential_from_json({"type": "gaussian", "width": 3.0})
    tr = float(bs_trace(spec, V))
    for lam in (0.1, 1.0, 10.0, 100.0):
        assert bs_count(spec, V, lam) <= lam * tr


def test_bs_count_matches_inertia():
    grid = RadialGrid(N=6000)
    V = disk_potential()
    lams = np.geomspace(1.0, 1000.0, 20)
    op = build_channel(zero_field(), 1, "schrodinger", grid, V, float(lams[-1]))
    for lam in lams:
        assert abs(bs_count(min_power(1), V, lam) - count_negative(op, lam)) <= 1


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.5])
def test_psd_all_kinds(alpha):
    V = gaussian_potential(1.0, 2.0)
    for spec in _all_kinds(alpha):
        rep = check_positive_definite(spec, V, 256)
        assert rep.passed, rep


def test_psd_single_point_and_inverted_samples():
    rep = check_positive_definite(t0_limit(1.0), disk_potential(), 1)
    assert rep.min_eigenvalue >= 0
    r = np.geomspace(1e-3, 1e3, 64)
    a = check_positive_definite(t_alpha_limit(1.5), gaussian_potential(), points=r)
    b = check_positive_definite(t0_limit(1.5), gaussian_potential(), points=1 / r)
    assert a.passed and b.passed


def test_psd_deterministic():
    a = check_positive_definite(min_power(0.5), gaussian_potential(), 128)
    b = check_positive_definite(min_power(0.5), gaussian_potential(), 128)
    assert a == b
    with pytest.raises(DomainError):
        check_positive_definite(min_power(0.5), gaussian_potential(), 513)


def test_kernel_spec_parsing():
    s = kernel_spec_from_string("resolvent:alpha=2,m=1,kappa=0.01")
    assert (s.kind, s.alpha, s.m, s.kappa) == ("resolvent", 2.0, 1, 0.01)
    assert kernel_spec_from_string("t0_limit:alpha=1") == t0_limit(1.0)
    assert len(KAPPA_LADDER) == 3

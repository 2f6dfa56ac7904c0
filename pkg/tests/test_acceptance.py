"""Acceptance suite.

Each test records its verdict through the ``criterion`` fixture; the
terminal summary then prints one PASS/FAIL line per criterion.  Failures
are real: tolerances below are the acceptance tolerances, unchanged.
"""

import math

import mpmath
import numpy as np
import pytest

from clr_magcount.birman_schwinger import (
    bs_count, bs_trace, check_positive_definite, kernel_eval, log_exterior, log_interior, min_power,
    resolvent_limit, t0_limit, t_alpha_limit,
)
from clr_magcount.bound_suite import (
    STABILITY_RTOL, assemble_case, comparison_inequality, counterexample_growth, ratio_stability,
    standard_panel, verify_strong_coupling, verify_weak_coupling,
)
from clr_magcount.field_models import gaussian_with_flux, m_alpha, zero_field
from clr_magcount.functionals import bl_constant, weyl_rhs
from clr_magcount.hardy_toolkit import HardyCase, muckenhoupt_constant, operator_hardy_check, verify_hardy
from clr_magcount.potential_models import (
    disk_potential, gaussian_potential, v_sigma_potential, w_sigma_potential,
)
from clr_magcount.radial_spectra import RadialGrid, build_channel, count_negative
from clr_magcount.special_functions import NU_MAX, Z_MAX, Z_MIN, wronskian_residual

WEAK_LAMBDA = 1e-4
WEYL_RTOL = 0.10
WEYL_MIN_COUNT = 200
WEYL_EXPONENT_TOL = 0.05
BL_EXPONENT_TOL = 0.15
BL_MIN_COUNT = 100
BL_PREFACTOR_FACTOR = 2.0
W_EXPONENT_TOL = 0.2
KERNEL_RTOL = 1e-3
WRONSKIAN_TOL = 1e-10
TRACE_RTOL = 1e-6
PSD_RTOL = 1e-10
PSD_SAMPLES = 256
HARDY_TOL = 1e-6
HARDY_TRIALS = 100

pytestmark = pytest.mark.slow

GRID = RadialGrid()


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5, 3.0])
def test_c01_weak_coupling(alpha, criterion):
    want = m_alpha(alpha)
    runs = [verify_weak_coupling(gaussian_with_flux(alpha), disk_potential(), [WEAK_LAMBDA], g)
            for g in (GRID, GRID.refined())]
    pauli = [v.pauli_counts[0] for v in runs]
    schr = [v.schrodinger_counts[0] for v in runs]
    ok = pauli == [want, want] and schr == [0, 0]
    criterion(1, ok, f"alpha={alpha}: pauli {pauli} want {want}, schrodinger {schr}")
    assert ok


def _weyl():
    lams = list(np.geomspace(20.0, 2000.0, 9))
    return verify_strong_coupling(zero_field(), disk_potential(), lams, operator="schrodinger",
                                  grid=GRID, window=1.0, min_count=WEYL_MIN_COUNT)


def test_c02_weyl_exponent(criterion):
    v = _weyl()
    ok = v.fitted_exponent is not None and abs(v.fitted_exponent - 1.0) <= WEYL_EXPONENT_TOL
    criterion(2, ok, f"exponent {v.fitted_exponent:.4f} (1 +- {WEYL_EXPONENT_TOL})")
    assert ok


def test_c02_weyl_prefactor(criterion):
    v = _weyl()
    target = float(weyl_rhs(disk_potential()))
    assert v.counts == sorted(v.counts)
    ok = v.prefactor is not None and abs(v.prefactor - target) <= WEYL_RTOL * target
    criterion(2, ok, f"N/lambda {v.prefactor} at lambda {v.prefactor_lambda:g} vs {target} (10%)")
    assert ok


def _bl():
    lams = list(np.geomspace(1.0, 100.0, 9))
    return verify_strong_coupling(zero_field(), v_sigma_potential(2.0), lams, operator="schrodinger",
                                  grid=GRID, window=2.0, min_count=BL_MIN_COUNT)


def test_c03_v2_exponent(criterion):
    v = _bl()
    span = math.log10(v.lambdas[-1] / v.lambdas[0])
    ok = (span >= 2 and max(v.counts) >= BL_MIN_COUNT
          and abs(v.fitted_exponent - 2.0) <= BL_EXPONENT_TOL)
    criterion(3, ok, f"V_2 exponent {v.fitted_exponent:.4f} over {span:g} decades, N up to {max(v.counts)}")
    assert ok


def test_c03_v2_prefactor(criterion):
    v = _bl()
    ref = bl_constant(2.0)
    ok = v.prefactor is not None and ref / BL_PREFACTOR_FACTOR <= v.prefactor <= ref * BL_PREFACTOR_FACTOR
    criterion(3, ok, f"V_2 prefactor {v.prefactor:.4f} vs {ref} (factor {BL_PREFACTOR_FACTOR:g})")
    assert ok


def test_c03_w2_pauli_exponent(criterion):
    lams = list(np.geomspace(1.0, 100.0, 9))
    v = verify_strong_coupling(gaussian_with_flux(1.0), w_sigma_potential(2.0), lams, operator="pauli",
                               grid=GRID, window=2.0)
    ok = v.fitted_exponent is not None and abs(v.fitted_exponent - 2.0) <= W_EXPONENT_TOL
    criterion(3, ok, f"W_2 Pauli exponent {v.fitted_exponent:.4f} (2 +- {W_EXPONENT_TOL})")
    assert ok


def test_c04_kernel_limits(criterion):
    rs = np.geomspace(0.1, 10.0, 10)
    worst = 0.0
    for m, alpha, spec in ((0, 1.0, t0_limit(1.0)), (0, 2.5, t0_limit(2.5)), (0, 0.5, t0_limit(0.5)),
                           (1, 1.0, t_alpha_limit(1.0)), (2, 2.0, t_alpha_limit(2.0))):
        for r in rs:
            for rp in rs:
                ref = kernel_eval(spec, r, rp)
                worst = max(worst, abs(resolvent_limit(m, alpha, r, rp) - ref) / abs(ref))
    ok = worst <= KERNEL_RTOL
    criterion(4, ok, f"limit kernels worst rel {worst:.2e} (<= {KERNEL_RTOL:g})")
    assert ok


def test_c04_wronskian(criterion):
    rng = np.random.default_rng(4)
    nus = rng.uniform(0.0, NU_MAX - 1.0, 100)
    zs = np.exp(rng.uniform(math.log(Z_MIN), math.log(Z_MAX), 100))
    worst = max(wronskian_residual(float(n), float(z)) for n, z in zip(nus, zs))
    ok = worst <= WRONSKIAN_TOL
    criterion(4, ok, f"Wronskian worst {worst:.2e} on 100 samples (<= {WRONSKIAN_TOL:g})")
    assert ok


def _quad(f, pts):
    return float(mpmath.quad(lambda r: f(float(r)), pts))


def test_c05_traces(criterion):
    pots = (disk_potential(0.8), gaussian_potential(1.0, 0.7), gaussian_potential(2.0, 1.5))
    worst = 0.0
    for V in pots:
        for alpha in (1.0, 2.5):
            ref = _quad(lambda r: V.v_bar(r) * r, [0, 0.8, 1, 10, mpmath.inf]) / (2 * alpha)
            worst = max(worst, abs(float(bs_trace(min_power(alpha), V)) / ref - 1))
        ref = _quad(lambda r: V.v_bar(r) * abs(math.log(r)) * r, [0, 0.8, 1])
        worst = max(worst, abs(float(bs_trace(log_interior(), V)) / ref - 1))
    ok = worst <= TRACE_RTOL
    criterion(5, ok, f"trace worst rel {worst:.2e} over 3 potentials (<= {TRACE_RTOL:g})")
    assert ok


def test_c06_bs_vs_inertia(criterion):
    V = disk_potential()
    lams = np.geomspace(1.0, 1000.0, 20)
    op = build_channel(zero_field(), 1, "schrodinger", GRID, V, float(lams[-1]))
    diffs = [bs_count(min_power(1), V, float(lam)) - count_negative(op, float(lam)) for lam in lams]
    off = [d for d in diffs if d]
    ok = len(off) <= 1 and all(abs(d) <= 1 for d in off)
    criterion(6, ok, f"{len(off)} disagreement(s) over 20 couplings, max |diff| {max(map(abs, diffs))}")
    assert ok


def test_c07_positive_definite(criterion):
    V = gaussian_potential(1.0, 2.0)
    worst = math.inf
    deterministic = True
    for alpha in (0.5, 1.0, 2.5):
        for spec in (log_interior(), log_exterior(), min_power(alpha), t0_limit(alpha), t_alpha_limit(alpha)):
            a = check_positive_definite(spec, V, PSD_SAMPLES)
            b = check_positive_definite(spec, V, PSD_SAMPLES)
            deterministic &= a.min_eigenvalue == b.min_eigenvalue
            worst = min(worst, a.min_eigenvalue / a.max_diagonal)
    ok = worst >= -PSD_RTOL and deterministic
    criterion(7, ok, f"min eig / max diag {worst:.2e} (>= -{PSD_RTOL:g}), deterministic {deterministic}")
    assert ok


def test_c08_hardy(criterion):
    case = HardyCase(U=lambda t: np.ones_like(t), W=lambda t: 0.25 / t ** 2, variant="origin_side")
    C = float(muckenhoupt_constant(case))
    rep = verify_hardy(case, trials=HARDY_TRIALS)
    neg = 0
    chans = 0
    for alpha in (0.3, 1.0, 2.5):
        res = operator_hardy_check(gaussian_with_flux(alpha), spins=("minus", "plus"), grid=GRID)
        chans += len(res)
        neg += sum(r.negative_inertia for r in res)
    ok = abs(C - 1.0) <= HARDY_TOL and rep.violations == 0 and neg == 0
    criterion(8, ok, f"classical C = {C:.12f}, {rep.violations} violations in {HARDY_TRIALS} trials, "
                     f"negative inertia {neg} over {chans} channel checks")
    assert ok


@pytest.mark.parametrize("row", range(len(standard_panel())))
def test_c09_ratio_stability(row, criterion):
    field, V, thm, lams = standard_panel()[row]
    case = assemble_case(field, V, thm)
    v = ratio_stability(case, lams, GRID)
    criterion(9, v.stable, f"{thm}[{V.name}, alpha={case.alpha}] ext {v.extension_change:.3f} "
                           f"ref {v.refinement_change:.3f}")
    assert v.stable
    assert v.extension_change < STABILITY_RTOL and v.refinement_change < STABILITY_RTOL


def test_c09_counterexample(criterion):
    v = counterexample_growth(gaussian_with_flux(0.3), v_sigma_potential(2.0),
                              list(np.geomspace(1.0, 100.0, 7)), grid=GRID)
    # successive ratios keep rising: no plateau at the top of the sweep
    tail = v.ratios[-1] / v.ratios[-2]
    ok = v.monotone and tail > 1 + STABILITY_RTOL
    criterion(9, ok, f"weakened rhs ratio grows x{v.growth:.1f}, last step x{tail:.2f}")
    assert ok


def test_c10_comparison(criterion):
    seen = set()
    bad = 0
    for field, V, _, lams in standard_panel():
        key = (field.alpha, repr(V.to_json()))
        if key in seen:
            continue
        seen.add(key)
        v = comparison_inequality(field, V, lams, GRID)
        bad += len(v.channel_violations)
    ok = bad == 0
    criterion(10, ok, f"{bad} violations over {len(seen)} panel field/potential pairs")
    assert ok

"""Right-hand sides of the CLR-type bounds and sweeps of the counting oracle against them.

The constants in the bounds are existential, so a bound is "verified" by
showing that ``(N(lam) - m_alpha_term) / rhs_shape(lam)`` stays bounded and
stabilises as the sweep grows and the grid is refined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .field_models import GroundStateData, build_ground_state, integer_flux, m_alpha
from .functionals import FunctionalReport, bl_constant, functional_report, weyl_rhs
from .potential_models import PotentialModel
from .radial_spectra import RadialGrid, sweep_lambda

THEOREMS = ("pauli_nonint", "pauli_int", "radial_nonint", "radial_int",
            "schrodinger_nonint", "schrodinger_int", "long_range")
STABILITY_RTOL = 0.10

# (linear terms, uses [V]_a) per theorem; names index FunctionalReport
_RHS = {
    "pauli_nonint": (("mixed_norm", "log_local"), False),
    "pauli_int": (("mixed_norm", "log_global"), False),
    "radial_nonint": (("l1_norm", "log_local"), False),
    "radial_int": (("l1_norm", "log_global"), False),
    "schrodinger_nonint": (("mixed_norm", "log_local"), False),
    "schrodinger_int": (("mixed_norm", "log_global"), False),
    "long_range": (("mixed_norm",), True),
}


def _gs(field_model) -> GroundStateData:
    if isinstance(field_model, GroundStateData):
        return field_model
    return build_ground_state(field_model)


@dataclass
class BoundCase:
    theorem: str
    p: float
    a: float | None
    functional_values: FunctionalReport
    m_alpha_term: int
    alpha: float
    applicable: bool = True
    reason: str = ""
    weakened: bool = False
    open_question: bool = False
    terms: tuple = ()
    uses_bracket: bool = False
    field_model: object = field(default=None, repr=False, compare=False)
    potential: PotentialModel | None = field(default=None, repr=False, compare=False)

    @property
    def operator(self) -> str:
        return "schrodinger" if self.theorem.startswith("schrodinger") else "pauli"

    def rhs_shape(self, lam: float) -> float:
        """Functional combination at coupling ``lam`` with unit constants."""
        fv = self.functional_values
        lin = sum(float(getattr(fv, t)) for t in self.terms)
        out = lam * lin
        if self.uses_bracket:
            out += lam ** (1.0 + self.a) * float(fv.bracket_a)
        return out

    def constants_table(self) -> dict:
        """Factors of the proofs, listed for reference; the oracle uses exact weights."""
        n = math.floor(self.alpha + 1e-12)
        return {"c_n": 1 + n * (n + 1) / 2, "n": n,
                "weight_factor_plus": 4.0 ** self.alpha,
                "weight_factor_minus": 4.0 ** (-self.alpha)}

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem, "p": self.p, "a": self.a, "alpha": self.alpha,
            "m_alpha_term": self.m_alpha_term, "applicable": self.applicable,
            "reason": self.reason, "weakened": self.weakened,
            "open_question": self.open_question, "terms": list(self.terms),
            "uses_bracket": self.uses_bracket,
            "functionals": self.functional_values.to_dict(),
            "constants": self.constants_table(),
        }


def assemble_case(field_model, V: PotentialModel, theorem: str, p: float = 2.0,
                  a: float | None = None, weaken: bool = False,
                  report: FunctionalReport | None = None) -> BoundCase:
    """Build the case for ``theorem``; inapplicable when a required functional diverges.

    ``weaken`` replaces the logarithmic term by the plain ``L^1`` norm, a
    deliberately wrong right-hand side used as a counterexample.
    """
    if theorem not in THEOREMS:
        raise DomainError(f"unknown theorem {theorem!r}")
    if not p > 1:
        raise DomainError("p must exceed 1")
    gs = _gs(field_model)
    alpha = gs.alpha
    is_int = integer_flux(alpha)
    if theorem.endswith("_nonint") and is_int:
        raise DomainError(f"{theorem} needs a non-integer flux (alpha = {alpha})")
    if theorem.endswith("_int") and not is_int:
        raise DomainError(f"{theorem} needs an integer flux (alpha = {alpha})")
    if theorem == "long_range":
        if not (is_int and alpha > 0.5):
            raise DomainError("long_range needs a positive integer flux")
        a = 1.0 if a is None else float(a)
        if not a > 0:
            raise DomainError("a must be positive")
    if theorem.startswith("radial") and V.kind != "radial":
        raise DomainError("radial_* theorems need a radial potential")
    fv = report or functional_report(V, p, a if a is not None else 1.0)
    terms, bracket = _RHS[theorem]
    if weaken:
        terms = tuple("l1_norm" if t.startswith("log") else t for t in terms)
    mterm = 0 if theorem.startswith("schrodinger") else m_alpha(alpha)
    needed = list(terms) + (["bracket_a"] if bracket else [])
    bad = [t for t in needed if getattr(fv, t).divergent or not math.isfinite(getattr(fv, t))]
    reason = f"divergent functional(s): {', '.join(bad)}" if bad else ""
    oq = theorem.startswith("schrodinger") and abs(alpha) < 1e-12
    return BoundCase(theorem, float(p), a, fv, mterm, alpha, not bad, reason, weaken, oq,
                     tuple(terms), bracket, gs, V)


@dataclass
class SweepVerdict:
    theorem: str
    lambdas: list
    counts: list
    rhs_shape: list
    empirical_constant: float
    lambda_at_sup: float | None
    fitted_exponent: float | None
    grid_N: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fit_exponent(lambdas, counts, window: float = 1.0):
    """Least-squares slope of ``log N`` vs ``log lam`` over the top ``window`` decades."""
    lam = np.asarray(lambdas, dtype=float)
    n = np.asarray(counts, dtype=float)
    if lam.size == 0:
        return None
    sel = (lam >= lam.max() / 10.0 ** window) & (n > 0)
    if np.count_nonzero(sel) < 2:
        return None
    slope, _ = np.polyfit(np.log(lam[sel]), np.log(n[sel]), 1)
    return float(slope)


def _sup_ratio(case: BoundCase, lambdas, counts):
    best, at = 0.0, None
    shapes = []
    for lam, n in zip(lambdas, counts):
        s = case.rhs_shape(lam)
        shapes.append(s)
        if s > 0:
            q = (n - case.m_alpha_term) / s
            if q > best:
                best, at = q, lam
    return best, at, shapes


def run_sweep(case: BoundCase, lambdas, grid: RadialGrid | None = None,
              threads: int | None = None, window: float = 1.0) -> SweepVerdict:
    """Counts over ``lambdas`` and the empirical constant of ``case``."""
    if not case.applicable:
        raise DomainError(f"case {case.theorem} is inapplicable: {case.reason}")
    grid = grid or RadialGrid()
    lambdas = [float(x) for x in lambdas]
    reps = sweep_lambda(case.field_model, case.potential, case.operator, lambdas, grid,
                        threads=threads)
    counts = [r.total for r in reps]
    best, at, shapes = _sup_ratio(case, lambdas, counts)
    return SweepVerdict(case.theorem, lambdas, counts, shapes, best, at,
                        fit_exponent(lambdas, counts, window), grid.N)


def estimate_constants(cases, sweeps, grid: RadialGrid | None = None,
                       threads: int | None = None) -> list[dict]:
    """Empirical constant per case; ``sweeps`` holds verdicts or lambda lists."""
    if len(cases) != len(sweeps):
        raise DomainError("one sweep per case is required")
    rows = []
    for case, sw in zip(cases, sweeps):
        if not case.applicable:
            raise DomainError(f"case {case.theorem} is inapplicable: {case.reason}")
        if not isinstance(sw, SweepVerdict):
            sw = run_sweep(case, sw, grid, threads)
        rows.append({
            "theorem": case.theorem, "alpha": case.alpha,
            "potential": case.potential.name if case.potential is not None else None,
            "empirical_constant": sw.empirical_constant, "lambda_at_sup": sw.lambda_at_sup,
            "m_alpha_term": case.m_alpha_term, "open_question": case.open_question,
            "constants": case.constants_table(),
        })
    return rows


# -- stability of the empirical constant --------------------------------------

def _rel_change(x, y) -> float:
    top = max(abs(x), abs(y))
    return 0.0 if top == 0 else abs(x - y) / top


@dataclass
class StabilityVerdict:
    theorem: str
    base: float
    extended: float
    refined: float
    extension_change: float
    refinement_change: float
    stable: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ratio_stability(case: BoundCase, lambdas, grid: RadialGrid | None = None,
                    threads: int | None = None) -> StabilityVerdict:
    """Empirical constant on ``lambdas``, on ``lambdas`` plus one decade, and on a doubled grid."""
    grid = grid or RadialGrid()
    lam = sorted(float(x) for x in lambdas)
    if len(lam) < 2:
        raise DomainError("need at least two couplings")
    step = lam[-1] / lam[-2]
    n_extra = max(int(round(math.log(10.0) / math.log(step))), 1)
    extra = [lam[-1] * step ** k for k in range(1, n_extra + 1)]
    ext = run_sweep(case, lam + extra, grid, threads)
    base_c, _, _ = _sup_ratio(case, lam, ext.counts[: len(lam)])
    fine = run_sweep(case, lam, grid.refined(), threads)
    e1 = _rel_change(base_c, ext.empirical_constant)
    e2 = _rel_change(base_c, fine.empirical_constant)
    return StabilityVerdict(case.theorem, base_c, ext.empirical_constant, fine.empirical_constant,
                            e1, e2, e1 < STABILITY_RTOL and e2 < STABILITY_RTOL)


@dataclass
class CounterexampleVerdict:
    lambdas: list
    counts: list
    ratios: list
    monotone: bool
    growth: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def counterexample_growth(field_model, V: PotentialModel, lambdas, theorem: str = "pauli_nonint",
                          grid: RadialGrid | None = None, threads: int | None = None):
    """Running empirical constant for the weakened right-hand side (log term -> L^1)."""
    case = assemble_case(field_model, V, theorem, weaken=True)
    sw = run_sweep(case, lambdas, grid, threads)
    run, ratios = 0.0, []
    for lam, n, s in zip(sw.lambdas, sw.counts, sw.rhs_shape):
        if s > 0:
            run = max(run, (n - case.m_alpha_term) / s)
        ratios.append(run)
    pos = [r for r in ratios if r > 0]
    mono = len(pos) >= 2 and all(b > a for a, b in zip(pos, pos[1:]))
    growth = pos[-1] / pos[0] if len(pos) >= 2 else 1.0
    return CounterexampleVerdict(sw.lambdas, sw.counts, ratios, mono, growth)


# -- weak and strong coupling --------------------------------------------------

@dataclass
class WeakVerdict:
    alpha: float
    lambdas: list
    pauli_counts: list
    schrodinger_counts: list
    m_alpha: int
    pauli_matches: bool
    schrodinger_zero: bool

    @property
    def passed(self) -> bool:
        return self.pauli_matches and self.schrodinger_zero

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def verify_weak_coupling(field_model, V: PotentialModel, lambdas_small,
                         grid: RadialGrid | None = None, threads: int | None = None) -> WeakVerdict:
    """Pauli and Schrodinger counts at small couplings against ``m(alpha)`` and 0."""
    if V.singular_at_origin or V.decay_class not in ("compact",) or not math.isfinite(V.support[1]):
        raise DomainError("weak coupling needs a bounded compactly supported potential")
    gs = _gs(field_model)
    lams = [float(x) for x in lambdas_small]
    if not lams:
        raise DomainError("no couplings given")
    grid = grid or RadialGrid()
    pc = [r.total for r in sweep_lambda(gs, V, "pauli", lams, grid, threads=threads)]
    sc = [r.total for r in sweep_lambda(gs, V, "schrodinger", lams, grid, threads=threads)]
    i = int(np.argmin([x if x > 0 else math.inf for x in lams])) if any(x > 0 for x in lams) else 0
    ma = m_alpha(gs.alpha)
    return WeakVerdict(gs.alpha, lams, pc, sc, ma, pc[i] == ma, sc[i] == 0)


@dataclass
class StrongVerdict:
    operator: str
    lambdas: list
    counts: list
    fitted_exponent: float | None
    expected_exponent: float | None
    prefactor: float | None
    prefactor_lambda: float | None
    reference_prefactor: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def expected_growth(V: PotentialModel, alpha: float):
    """``(exponent, reference prefactor per spin block)``; ``None`` where no law is asserted."""
    if V.decay_class == "V_sigma":
        return V.sigma, bl_constant(V.sigma) * V.scale
    if V.decay_class == "W_sigma":
        return (V.sigma if integer_flux(alpha) else None), None
    return 1.0, float(weyl_rhs(V))


def verify_strong_coupling(field_model, V: PotentialModel, lambdas_large, operator: str | None = None,
                           grid: RadialGrid | None = None, threads: int | None = None,
                           window: float = 1.0, min_count: int = 0) -> StrongVerdict:
    """Exponent fit on the top ``window`` decades; prefactor ``N / lam^exponent`` at the
    largest coupling with ``N >= min_count``."""
    lams = sorted(float(x) for x in lambdas_large)
    if len(lams) < 2 or lams[0] <= 0 or lams[-1] / lams[0] < 100 * (1 - 1e-12):
        raise DomainError("strong-coupling sweeps must span at least two decades")
    gs = _gs(field_model)
    if operator is None:
        operator = "schrodinger" if gs.field.kind == "zero" else "pauli"
    reps = sweep_lambda(gs, V, operator, lams, grid or RadialGrid(), threads=threads)
    counts = [r.total for r in reps]
    expo, ref = expected_growth(V, gs.alpha)
    if ref is not None and operator == "pauli":
        ref = 2.0 * ref
    pre, at = None, None
    if expo is not None:
        for lam, n in zip(lams, counts):
            if n >= max(min_count, 1):
                pre, at = n / lam ** expo, lam
    return StrongVerdict(operator, lams, counts, fit_exponent(lams, counts, window),
                         expo, pre, at, ref)


# -- comparison ----------------------------------------------------------------

@dataclass
class ComparisonVerdict:
    lambdas: list
    schrodinger_counts: list
    h_plus_counts: list
    channel_violations: list
    holds: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def comparison_inequality(field_model, V: PotentialModel, lambdas,
                          grid: RadialGrid | None = None, threads: int | None = None) -> ComparisonVerdict:
    """``N((i grad + A)^2 - lam V) <= N(H_+ - 2 lam V)`` per channel and in total.

    Schrodinger channel ``k`` is compared with the ``H_+`` channel of the
    same angular momentum (index ``-k``).
    """
    gs = _gs(field_model)
    lams = [float(x) for x in lambdas]
    grid = grid or RadialGrid()
    s_reps = sweep_lambda(gs, V, "schrodinger", lams, grid, threads=threads)
    p_reps = sweep_lambda(gs, V, "h_plus", [2 * x for x in lams], grid, threads=threads)
    bad = []
    for lam, sr, pr in zip(lams, s_reps, p_reps):
        plus = {m: c for _, m, c in pr.per_channel}
        for _, k, c in sr.per_channel:
            if c > plus.get(-k, 0):
                bad.append({"lambda": lam, "k": k, "schrodinger": c, "h_plus": plus.get(-k, 0)})
        if sr.total > pr.total:
            bad.append({"lambda": lam, "k": None, "schrodinger": sr.total, "h_plus": pr.total})
    return ComparisonVerdict(lams, [r.total for r in s_reps], [r.total for r in p_reps], bad, not bad)


def additivity(field_model, V: PotentialModel, lambdas, grid: RadialGrid | None = None,
               threads: int | None = None) -> bool:
    """Pauli count equals the ``H_+`` plus ``H_-`` counts at every coupling."""
    gs = _gs(field_model)
    grid = grid or RadialGrid()
    tot = [r.total for r in sweep_lambda(gs, V, "pauli", lambdas, grid, threads=threads)]
    hp = [r.total for r in sweep_lambda(gs, V, "h_plus", lambdas, grid, threads=threads)]
    hm = [r.total for r in sweep_lambda(gs, V, "h_minus", lambdas, grid, threads=threads)]
    return all(t == a + b for t, a, b in zip(tot, hp, hm))


# -- standard panel --------------------------------------------------------------

def standard_panel():
    """``(field, potential, theorem, lambdas)`` rows used by the ratio-boundedness checks."""
    from .field_models import gaussian_with_flux
    from .potential_models import disk_potential, gaussian_potential, w_sigma_potential

    disk = disk_potential(1.0)
    gpot = gaussian_potential(1.0, 1.0)
    lam = list(np.geomspace(1e-2, 1e2, 9))
    lam_lr = list(np.geomspace(1e-2, 1e1, 7))
    f03 = gaussian_with_flux(0.3)
    f1 = gaussian_with_flux(1.0)
    f25 = gaussian_with_flux(2.5)
    return [
        (f03, disk, "pauli_nonint", lam),
        (f03, disk, "schrodinger_nonint", lam),
        (f03, disk, "radial_nonint", lam),
        (f1, disk, "pauli_int", lam),
        (f1, disk, "schrodinger_int", lam),
        (f1, gpot, "radial_int", lam),
        (f25, gpot, "pauli_nonint", lam),
        (f1, w_sigma_potential(2.0), "long_range", lam_lr),
    ]

"""Weighted one-dimensional Hardy inequalities.

For a pair ``(U, W)`` on an interval and a vanishing end, the Muckenhoupt
bound ``C <= 4 sup_s (int U^-1)(int W)`` is estimated by a geometric scan in
``s``.  All integrals are carried as logarithms, so weights like
``exp(-2m tau)`` over ``tau`` up to ``1e10`` are harmless.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .field_models import GroundStateData, build_ground_state
from .functionals import DIVERGENCE_CAP, FunctionalValue
from .potential_models import PotentialModel
from .radial_spectra import RadialGrid, _threads, build_channel

VARIANTS = ("infinity_side", "origin_side", "tail_from_R", "cap_at_R")
DEFAULT_SEED = 0x5EED
SCAN_POINTS = 2000
KNOTS = 64

_GX, _GW = np.polynomial.legendre.leggauss(16)
_LOG_GW = np.log(_GW)
_X_SPAN = 25.0
_X_FINITE = 40.0
_X_LIMIT = 700.0
_TAIL_RTOL = 1e-13


def _lse(a, axis=-1):
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    ms = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.log(np.sum(np.exp(a - ms), axis=axis)) + np.squeeze(ms, axis=axis)
    mq = np.squeeze(m, axis=axis)
    return np.where(np.isfinite(mq), out, mq)


def _safe_log(fn):
    def lf(t):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = np.asarray(fn(t), dtype=float)
            out = np.log(np.where(v > 0, v, 1.0))
        return np.where(v > 0, out, -np.inf)

    return lf


@dataclass
class HardyCase:
    """A weight pair with its variant.

    ``U`` and ``W`` (or their logarithms ``log_U``, ``log_W``) are vectorised
    functions of the interval variable.  ``infinity_side`` and ``origin_side``
    live on ``(0, inf)``; ``tail_from_R`` on ``(R, inf)``; ``cap_at_R`` on
    ``(0, R)``.
    """

    U: Callable | None = None
    W: Callable | None = None
    variant: str = "origin_side"
    R: float | None = None
    log_U: Callable | None = None
    log_W: Callable | None = None
    name: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown Hardy variant {self.variant!r}")
        if self.variant in ("tail_from_R", "cap_at_R"):
            if self.R is None or not self.R > 0 or not math.isfinite(self.R):
                raise DomainError(f"{self.variant} needs a split point R > 0")
        if self.log_U is None:
            if self.U is None:
                raise DomainError("HardyCase needs U or log_U")
            self.log_U = _safe_log(self.U)
        if self.log_W is None:
            if self.W is None:
                raise DomainError("HardyCase needs W or log_W")
            self.log_W = _safe_log(self.W)

    @property
    def interval(self) -> tuple[float, float]:
        if self.variant == "tail_from_R":
            return (self.R, math.inf)
        if self.variant == "cap_at_R":
            return (0.0, self.R)
        return (0.0, math.inf)

    @property
    def vanishing_end(self) -> str:
        """``left`` or ``right``: the end where admissible ``f`` vanish."""
        return "left" if self.variant in ("origin_side", "cap_at_R") else "right"

    def scaled(self, cu: float = 1.0, cw: float = 1.0) -> "HardyCase":
        lu, lw = self.log_U, self.log_W
        au, aw = math.log(cu), math.log(cw)
        return HardyCase(variant=self.variant, R=self.R, name=self.name,
                         log_U=lambda t: lu(t) + au, log_W=lambda t: lw(t) + aw)

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "name": self.name}
        if self.R is not None:
            d["R"] = self.R
        return d


# -- log-space integration in x = log(u), u = distance from the left end ---

class _Scan:
    def __init__(self, case: HardyCase, points: int = SCAN_POINTS):
        self.case = case
        a, b = case.interval
        self.a = a
        self.b_rel = b - a
        if math.isfinite(self.b_rel):
            hi = math.log(self.b_rel)
            self.x_lo, self.x_hi = hi - _X_FINITE, hi
        else:
            c = math.log(a) if a > 0 else 0.0
            self.x_lo, self.x_hi = c - _X_SPAN, c + _X_SPAN
        self.x = np.linspace(self.x_lo, self.x_hi, points)

    def _t(self, x):
        with np.errstate(over="ignore"):
            return self.a + np.exp(x)

    def log_integrand(self, which, x):
        t = self._t(x)
        with np.errstate(invalid="ignore", over="ignore"):
            if which == "Uinv":
                v = -self.case.log_U(t)
            else:
                v = self.case.log_W(t)
        v = np.where(np.isnan(v), -np.inf, v)
        return v + x

    def panel_logs(self, which, xa, xb):
        """``log int_{xa}^{xb}`` per panel, vectorised over panel arrays."""
        xa = np.atleast_1d(np.asarray(xa, dtype=float))
        xb = np.atleast_1d(np.asarray(xb, dtype=float))
        half = 0.5 * (xb - xa)
        xq = 0.5 * (xa + xb)[:, None] + half[:, None] * _GX[None, :]
        with np.errstate(divide="ignore"):
            lh = np.log(np.abs(half))[:, None]
        return _lse(self.log_integrand(which, xq) + _LOG_GW[None, :] + lh, axis=1)

    def tail(self, which, side):
        """``(log value, converged)`` of the integral beyond the scan grid."""
        if side == "right" and math.isfinite(self.b_rel):
            return -math.inf, True
        start = self.x_lo if side == "left" else self.x_hi
        sgn = -1.0 if side == "left" else 1.0
        total = -math.inf
        step = 1.0
        pos = start
        while abs(pos) < _X_LIMIT:
            nxt = pos + sgn * step
            if abs(nxt) > _X_LIMIT:
                nxt = sgn * _X_LIMIT
            seg = self._segment(which, min(pos, nxt), max(pos, nxt))
            total = np.logaddexp(total, seg)
            if seg == math.inf or total > math.log(DIVERGENCE_CAP) + 50:
                return math.inf, False
            if total == -math.inf and step > 64:
                return -math.inf, True
            if seg < total + math.log(_TAIL_RTOL) and step > 2:
                return float(total), True
            pos = nxt
            step *= 2.0
        return float(total), False

    def _segment(self, which, xa, xb):
        n = max(int(math.ceil((xb - xa) / 0.25)), 1)
        e = np.linspace(xa, xb, n + 1)
        return float(_lse(self.panel_logs(which, e[:-1], e[1:])))


def _log_sub(la, lb):
    """``log(e^la - e^lb)`` for ``la >= lb``; -inf when they agree."""
    la = np.asarray(la, dtype=float)
    lb = np.asarray(lb, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        d = lb - la
        out = la + np.log(-np.expm1(np.minimum(d, 0.0)))
    return np.where(np.isinf(la) & (la < 0), -np.inf, np.where(d >= 0, -np.inf, out))


@dataclass
class HardyConstant:
    value: FunctionalValue
    argmax: float
    integrable: bool

    def to_dict(self) -> dict:
        return {"constant": float(self.value), "divergent": self.value.divergent,
                "argmax": self.argmax, "integrable": self.integrable}


def _right_cumulative(scan: _Scan, which):
    """``log int`` from each grid point to the right end (summed from the right)."""
    x = scan.x
    panels = scan.panel_logs(which, x[:-1], x[1:])
    rt, ok = scan.tail(which, "right")
    rev = np.logaddexp.accumulate(np.concatenate([[rt], panels[::-1]]))
    return rev[::-1], ok


def _left_cumulative(scan: _Scan, which):
    x = scan.x
    panels = scan.panel_logs(which, x[:-1], x[1:])
    lt, ok = scan.tail(which, "left")
    return np.logaddexp.accumulate(np.concatenate([[lt], panels])), ok


def _profile(case: HardyCase, points: int = SCAN_POINTS):
    """Scan object plus ``log A``, ``log B`` on the grid and integrability flags."""
    scan = _Scan(case, points)
    if case.vanishing_end == "left":
        la, ok_a = _left_cumulative(scan, "Uinv")
        lb, ok_b = _right_cumulative(scan, "W")
    else:
        la, ok_a = _right_cumulative(scan, "Uinv")
        lb, ok_b = _left_cumulative(scan, "W")
    return scan, la, lb, ok_a, ok_b


def _point_logs(scan: _Scan, case: HardyCase, i: int, x: float, la, lb):
    """``log A``, ``log B`` at an off-grid ``x`` inside panel ``i``."""
    du = float(scan.panel_logs("Uinv", [scan.x[i]], [x])[0])
    dw = float(scan.panel_logs("W", [scan.x[i]], [x])[0])
    if case.vanishing_end == "left":
        return float(np.logaddexp(la[i], du)), float(_log_sub(lb[i], dw))
    return float(_log_sub(la[i], du)), float(np.logaddexp(lb[i], dw))


def muckenhoupt_constant(case: HardyCase, points: int = SCAN_POINTS, detail: bool = False):
    """``4 sup_s (int U^-1)(int W)`` in the orientation of ``case.variant``.

    The sup is taken on a geometric grid of ``points`` values of ``s`` and
    refined by trisection around the best grid point.  Raises ``DomainError``
    when the ``U^-1`` integral towards the vanishing end diverges; an
    unbounded product is returned with ``divergent`` set.
    """
    scan, la, lb, ok_a, ok_b = _profile(case, points)
    if not ok_a or not np.all(np.isfinite(la) | (la < 0)):
        raise DomainError(
            f"{case.variant}: int U^-1 towards the vanishing end diverges for this pair"
        )
    with np.errstate(invalid="ignore"):
        lp = la + lb
    lp = np.where(np.isnan(lp), -np.inf, lp)
    if not np.any(np.isfinite(lp)) and not np.any(lp == math.inf):
        out = HardyConstant(FunctionalValue(0.0), math.nan, True)
        return out if detail else out.value
    cap = math.log(DIVERGENCE_CAP / 4.0)
    i = int(np.argmax(lp))
    best = float(lp[i])
    xbest = float(scan.x[i])
    divergent = not ok_b or best > cap
    if not divergent:
        # a sup still rising at an open end of the scan is unbounded
        n = len(lp)
        k = min(200, n - 1)
        for end, back in ((n - 1, n - 1 - k), (0, k)):
            open_end = end == 0 or not math.isfinite(scan.b_rel)
            if i == end and open_end and np.isfinite(lp[back]) and lp[end] - lp[back] > 1e-3:
                divergent = True
    if not divergent and 0 < i < len(lp) - 1:
        best, xbest = _trisect(scan, case, la, lb, i, best, xbest)
    if divergent:
        val = FunctionalValue(max(4.0 * math.exp(min(best, 700.0)), DIVERGENCE_CAP),
                              0.0, True)
    else:
        val = FunctionalValue(4.0 * math.exp(best), 4.0 * math.exp(best) * 1e-9)
    out = HardyConstant(val, float(scan.a + math.exp(xbest)), True)
    return out if detail else out.value


def _trisect(scan, case, la, lb, i, best, xbest):
    lo, hi = float(scan.x[i - 1]), float(scan.x[i + 1])

    def f(x):
        j = i - 1 if x < scan.x[i] else i
        a, b = _point_logs(scan, case, j, x, la, lb)
        return a + b

    for _ in range(80):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
        if hi - lo < 1e-12:
            break
    xm = 0.5 * (lo + hi)
    v = f(xm)
    if v > best:
        return v, xm
    return best, xbest


# -- randomized verification -----------------------------------------------

@dataclass
class HardyReport:
    variant: str
    constant: float
    trials: int
    seed: int
    max_ratio: float
    violations: int
    skipped: int
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _knots(scan: _Scan, case: HardyCase, xc: float, rng, n: int):
    lo = max(scan.x_lo, xc - 6.0)
    hi = min(scan.x_hi, xc + 6.0)
    x = np.sort(rng.uniform(lo, hi, n))
    return scan.a + np.exp(x)


def _trial_sides(scan: _Scan, case: HardyCase, t, f):
    """``int W f^2`` and ``int U f'^2`` for the piecewise-linear ``f`` on knots ``t``."""
    a = scan.a
    xk = np.log(t - a)
    xa, xb = xk[:-1], xk[1:]
    half = 0.5 * (xb - xa)
    xq = 0.5 * (xa + xb)[:, None] + half[:, None] * _GX[None, :]
    tq = a + np.exp(xq)
    slope = np.diff(f) / np.diff(t)
    fq = f[:-1, None] + slope[:, None] * (tq - t[:-1, None])
    jac = np.exp(xq) * half[:, None] * _GW[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.exp(case.log_W(tq))
        u = np.exp(case.log_U(tq))
    w = np.where(np.isnan(w), 0.0, w)
    lhs = float(np.sum(w * fq * fq * jac))
    rhs = float(np.sum(u * (slope[:, None] ** 2) * jac))
    # constant continuation beyond the knots (only on the non-vanishing side)
    if case.vanishing_end == "left":
        end_val = f[-1]
        if end_val != 0.0:
            lw = _tail_from(scan, "W", xk[-1], "right")
            lhs += end_val * end_val * math.exp(lw) if lw > -math.inf else 0.0
    else:
        end_val = f[0]
        if end_val != 0.0:
            lw = _tail_from(scan, "W", xk[0], "left")
            lhs += end_val * end_val * math.exp(lw) if lw > -math.inf else 0.0
    return lhs, rhs


def _tail_from(scan: _Scan, which, x0, side):
    """``log int`` of ``which`` from ``x0`` to the end on ``side``."""
    if side == "right":
        if math.isfinite(scan.b_rel):
            return scan._segment(which, x0, scan.x_hi)
        seg = scan._segment(which, x0, scan.x_hi) if x0 < scan.x_hi else -math.inf
        rt, _ = scan.tail(which, "right")
        return float(np.logaddexp(seg, rt))
    seg = scan._segment(which, scan.x_lo, x0) if x0 > scan.x_lo else -math.inf
    lt, _ = scan.tail(which, "left")
    return float(np.logaddexp(seg, lt))


def form_sides(case: HardyCase, t, f) -> tuple[float, float]:
    """``(int W f^2, int U f'^2)`` for the piecewise-linear ``f`` with values ``f`` at knots ``t``.

    ``f`` continues as a constant beyond the last knot on the non-vanishing side.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.shape != f.shape or t.size < 2 or np.any(np.diff(t) <= 0):
        raise DomainError("knots must be increasing and match the values")
    scan = _Scan(case)
    if np.any(t <= scan.a) or (math.isfinite(scan.b_rel) and np.any(t - scan.a > scan.b_rel)):
        raise DomainError("knots must lie inside the interval")
    return _trial_sides(scan, case, t, f)


def random_trial(case: HardyCase, scan: _Scan, xc: float, seed: int, knots: int = KNOTS):
    """One admissible piecewise-linear test function: ``(lhs, rhs)``."""
    rng = np.random.default_rng(seed)
    t = _knots(scan, case, xc, rng, knots)
    f = rng.standard_normal(knots)
    if case.vanishing_end == "left":
        f[0] = 0.0
    else:
        f[-1] = 0.0
    return _trial_sides(scan, case, t, f)


def verify_hardy(case: HardyCase, trials: int = 100, seed: int = DEFAULT_SEED,
                 knots: int = KNOTS, threads: int | None = None,
                 constant: float | None = None) -> HardyReport:
    """Check ``int W f^2 <= C int U f'^2`` on seeded random admissible ``f``."""
    if trials < 0:
        raise DomainError("trials must be nonnegative")
    if knots < 2:
        raise DomainError("need at least two knots")
    hc = muckenhoupt_constant(case, detail=True)
    C = float(hc.value) if constant is None else float(constant)
    if hc.value.divergent and constant is None:
        raise DomainError("the Muckenhoupt constant is not finite for this pair")
    scan = _Scan(case)
    xc = math.log(hc.argmax - scan.a) if math.isfinite(hc.argmax) else 0.5 * (scan.x_lo + scan.x_hi)
    seeds = np.random.SeedSequence(seed).spawn(trials)

    def one(ss):
        return random_trial(case, scan, xc, ss, knots)

    n = _threads(threads)
    if n > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            res = list(ex.map(one, seeds))
    else:
        res = [one(s) for s in seeds]
    max_ratio = 0.0
    bad = 0
    skipped = 0
    for lhs, rhs in res:
        if rhs <= 1e-14:
            skipped += 1
            continue
        q = lhs / rhs
        max_ratio = max(max_ratio, q)
        if q > C + 1e-9:
            bad += 1
    return HardyReport(case.variant, C, int(trials), int(seed), float(max_ratio), bad, skipped, bad == 0)


# -- channel-level checks ---------------------------------------------------

def _log_r2w(t):
    """``log(r^2 w(r))`` at ``t = log r``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lt = np.log(np.abs(t))
        # for t > 0 the form -log(e^-2t + t^2) avoids cancelling two huge terms
        out = np.where(t > 0, -np.logaddexp(-2 * t, 2 * lt),
                       2 * t - np.logaddexp(0.0, 2 * t + 2 * lt))
    return out


def hardy_weight_potential(scale: float = 1.0) -> PotentialModel:
    """The radial potential ``w(r) = 1/(1 + r^2 log^2 r)``."""
    from .functionals import hardy_weight

    return PotentialModel(
        "radial", "hardy_weight", {}, hardy_weight, decay_class="integrable",
        scale=float(scale), _log_r2v_fn=_log_r2w,
    )


def channel_case(gs: GroundStateData, m: int, spin: str, side: str) -> HardyCase:
    """The Hardy pair of channel ``(spin, m)`` on one side of ``r = 1``.

    In ``tau = |log r|`` the channel form is ``int e^g |f'|^2`` and the
    weighted mass ``int e^g r^2 w |f|^2``; ``f`` vanishes at ``tau = 0``.
    """
    sgn = -1.0 if side == "inner" else 1.0

    def lu(tau):
        with np.errstate(over="ignore", invalid="ignore"):
            return gs.log_weight(sgn * np.asarray(tau, dtype=float), m, spin)

    def lw(tau):
        t = sgn * np.asarray(tau, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return gs.log_weight(t, m, spin) + _log_r2w(t)

    return HardyCase(variant="origin_side", log_U=lu, log_W=lw, name=f"{spin}:{m}:{side}")


def _channel_constant(gs, m, spin, side):
    case = channel_case(gs, m, spin, side)
    try:
        C = muckenhoupt_constant(case)
        if not C.divergent:
            return case, C
    except DomainError:
        pass
    # the weight forces decay at the far end: vanish there instead
    case = HardyCase(variant="infinity_side", log_U=case.log_U, log_W=case.log_W,
                     name=case.name)
    return case, muckenhoupt_constant(case)


@dataclass
class ChannelHardy:
    spin: str
    m: int
    side: str
    variant: str
    constant: float
    c: float
    negative_inertia: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def operator_hardy_check(field_model, spins=("minus",), channels=None,
                         grid: RadialGrid | None = None) -> list[ChannelHardy]:
    """Inertia of ``h_channel - c w`` with Dirichlet at ``r = 1`` and ``c = 1/C``.

    ``C`` is the Muckenhoupt estimate of the channel pair, oriented at
    ``r = 1`` when that is finite and at the far end otherwise.  Zero
    negative inertia means the weighted Hardy bound holds on the grid.
    """
    gs = field_model if isinstance(field_model, GroundStateData) else build_ground_state(field_model)
    grid = grid or RadialGrid()
    if channels is None:
        channels = range(0, math.ceil(gs.alpha - 1e-12) + 1)
    pot = hardy_weight_potential()
    out = []
    for spin in spins:
        for m in channels:
            for side in ("inner", "outer"):
                case, C = _channel_constant(gs, m, spin, side)
                c = 1.0 / float(C) if not C.divergent else 0.0
                bnd = "dirichlet_at_1_inner" if side == "inner" else "dirichlet_at_1_outer"
                op = build_channel(gs, m, spin, grid, pot, c, boundary=bnd)
                neg = int(op.count(c)[0])
                out.append(ChannelHardy(spin, int(m), side, case.variant, float(C), c, neg))
    return out

"""Right-hand-side functionals: mixed norm, log-weighted integrals, ``[V]_a``.

Radial integrals are done in ``t = log r``.  A potential of the ``V_sigma``
(inner) or ``W_sigma`` (outer) class lives on the scale ``log|log r|``; on
that side the integral continues in ``s = log|t|`` so that divergence can be
seen directly instead of being hidden by a finite ``r_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError
from .potential_models import PotentialModel, _periodic_lp
from .special_functions import gamma_fn

DIVERGENCE_CAP = 1e12
_T_CORE = 512.0
_S_END = 1e300
_X0 = 8.0
_LOG_X0 = math.log(_X0)
_INNER_S_MAX = 700.0


class FunctionalValue(float):
    """A nonnegative functional value with an absolute error bar.

    If ``divergent`` is set, the number is the partial value at which the
    divergence cap was crossed.  It stays finite so reports serialize, but
    it is not the value of the functional.
    """

    def __new__(cls, value, error=0.0, divergent=False):
        obj = super().__new__(cls, value)
        obj.error = float(error)
        obj.divergent = bool(divergent)
        return obj

    def __repr__(self):
        tag = ", divergent" if self.divergent else ""
        return f"FunctionalValue({float(self)!r}, error={self.error:.3g}{tag})"

    def __reduce__(self):
        return (FunctionalValue, (float(self), self.error, self.divergent))


def is_divergent(x) -> bool:
    return bool(getattr(x, "divergent", False))


# -- radial integration -----------------------------------------------------

def _quad(f, a, b, points=()):
    pts = [p for p in points if a < p < b]
    val, err = integrate.quad(f, a, b, points=pts or None, epsabs=0.0, epsrel=1e-11, limit=400)
    return val, err


def _t_breaks(V: PotentialModel):
    out = []
    for r in V.breakpoints:
        if r > 0 and math.isfinite(r):
            out.append(math.log(r))
    for r in V.support:
        if r > 0 and math.isfinite(r):
            out.append(math.log(r))
    return sorted(set(out))


def _side_integral(V: PotentialModel, log_core, k: float, side: str):
    """``int exp(log_core(t)) dt`` over ``t < 0`` (inner) or ``t > 0`` (outer).

    ``log_core`` is the log-integrand in ``t``; ``k`` is the power of ``|t|``
    it carries, used for the ``s``-space continuation on zone sides.
    Returns ``(value, error, divergent)``.
    """
    sgn = -1.0 if side == "inner" else 1.0
    brk = [abs(b) for b in _t_breaks(V) if sgn * b > 0]
    last_brk = max(brk, default=0.0)

    def f(t):
        return float(np.exp(log_core(np.array([sgn * t]))[0]))

    total, err = 0.0, 0.0
    lo, hi = 0.0, 1.0
    converged = False
    while lo < _T_CORE:
        val, e = _quad(f, lo, hi, brk)
        total += val
        err += e
        if total > DIVERGENCE_CAP:
            return total, err, True
        if hi > last_brk and val <= 1e-15 * total + 1e-300 and not V.has_zone(side):
            converged = True
            break
        lo, hi = hi, 2 * hi
    if converged:
        return total, err, False
    if not V.has_zone(side):
        # slowly decaying but not of zone type: last segment is the tail estimate
        return total, err + val, False

    def g(s):
        return float(np.exp(V.log_t2r2v_s(np.array([s]), side)[0] + (k - 1.0) * s))

    lo = math.log(_T_CORE)
    hi = lo + 1.0
    while lo < _S_END:
        val, e = _quad(g, lo, hi)
        total += val
        err += e
        if total > DIVERGENCE_CAP:
            return total, err, True
        if val <= 1e-15 * total:
            return total, err + val, False
        lo, hi = hi, 2 * hi
    return total, err, True


def _radial_integral(V: PotentialModel, k: float, region: str = "plane") -> FunctionalValue:
    """``2 pi int Vbar(r) |log r|^k r dr`` over the region."""
    if V.is_zero:
        return FunctionalValue(0.0)

    def log_core(t):
        with np.errstate(divide="ignore"):
            extra = k * np.log(np.abs(t)) if k else 0.0
        return V.log_r2v(t) + extra

    sides = ("inner",) if region == "ball1" else ("inner", "outer")
    tot, err, div = 0.0, 0.0, False
    for side in sides:
        v, e, d = _side_integral(V, log_core, k, side)
        tot += v
        err += e
        div = div or d
    c = 2 * math.pi
    return FunctionalValue(c * tot, c * err, div)


# -- public functionals -----------------------------------------------------

def l1_norm(V: PotentialModel) -> FunctionalValue:
    """``int V dx``."""
    return _radial_integral(V, 0.0)


def weyl_rhs(V: PotentialModel) -> FunctionalValue:
    """``(1/2 pi) int V dx``."""
    v = l1_norm(V)
    return FunctionalValue(float(v) / (2 * math.pi), v.error / (2 * math.pi), v.divergent)


def log_weighted_integral(V: PotentialModel, region: str = "ball1") -> FunctionalValue:
    """``int_region V |log|x|| dx`` for ``region`` in ``{"ball1", "plane"}``."""
    if region not in ("ball1", "plane"):
        raise DomainError(f"region must be 'ball1' or 'plane', got {region!r}")
    return _radial_integral(V, 1.0, region)


def mixed_norm(V: PotentialModel, p: float) -> FunctionalValue:
    """``int_0^inf (int_0^2pi V(r, theta)^p dtheta)^(1/p) r dr``."""
    p = float(p)
    if not p > 1.0:
        raise DomainError(f"mixed_norm needs p > 1, got {p!r}")
    if V.is_zero:
        return FunctionalValue(0.0)
    if V.kind == "polar":
        lo, hi = V.support
        if not math.isfinite(hi):
            raise DomainError("polar potentials must have bounded support")

        def f(r):
            return float(V.angular_lp(np.array([r]), p)[0]) * r

        pts = sorted(b for b in V.breakpoints if lo < b < hi)
        val, err = _quad(f, lo, hi, pts)
        return FunctionalValue(val, err)
    # radial and separable: the angular L^p norm is a fixed multiple of Vbar
    if V.kind == "radial":
        factor = (2 * math.pi) ** (1.0 / p)
    else:
        factor = _periodic_lp(V.angular_part, p)
    base = _radial_integral(V, 0.0)
    s = factor / (2 * math.pi)
    return FunctionalValue(s * float(base), s * base.error, base.divergent)


def hardy_weight(r):
    """``w(r) = 1 / (1 + r^2 (log r)^2)``."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("hardy_weight needs r > 0")
    with np.errstate(over="ignore", invalid="ignore"):
        lr = np.log(r)
        x = r * lr
        out = 1.0 / (1.0 + x * x)
    out = np.where(np.isfinite(x), out, 0.0)
    return out if out.ndim else float(out)


def bl_constant(sigma: float) -> float:
    """``Gamma(sigma - 1/2) / (2 sqrt(pi) Gamma(sigma))``."""
    sigma = float(sigma)
    if not sigma > 1.0:
        raise DomainError(f"bl_constant needs sigma > 1, got {sigma!r}")
    return gamma_fn(sigma - 0.5) / (2.0 * math.sqrt(math.pi) * gamma_fn(sigma))


# -- [V]_a ------------------------------------------------------------------
# Global coordinate x: u = log r = x for |x| <= X0, and
# |u| = X0 exp(|x| - X0) beyond, so s = log|u| grows linearly in x.

def _x_profile(V: PotentialModel, x):
    """``(log q, log rho)`` with ``q = Vbar / w`` and ``rho dx = w (1+|u|) r dr``."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    core = ax <= _X0
    s = np.where(core, np.log(np.maximum(ax, 1e-300)), _LOG_X0 + ax - _X0)
    sgn = np.sign(x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        u = np.where(core, x, sgn * np.exp(s))
        # ex = log(u^2 r^2 Vbar), computed without the 2s cancellation in the zones
        ex = np.full_like(x, -np.inf)
        fin = np.isfinite(u)
        inner = x < 0
        for side, sel in (("inner", inner), ("outer", ~inner)):
            z = sel & ~core & V.has_zone(side)
            if np.any(z):
                ex[z] = V.log_t2r2v_s(s[z], side)
            plain = sel & ~z & fin
            if np.any(plain):
                ex[plain] = V.log_r2v(u[plain]) + 2 * s[plain]
        ex = np.where(np.isnan(ex), -np.inf, ex)
        # log(u^2 r^2 w) = -log(1 + e^{-2u} / u^2)
        lw2 = -np.logaddexp(-2 * u - 2 * s, 0.0)
        logq = ex - lw2
        # rho = w (1+|u|) r^2 |du/dx|, and |du/dx| = |u| off the core
        logrho = np.where(core, lw2 - 2 * s + np.log1p(ax), lw2 + np.log1p(np.exp(-s)))
        logrho = np.where(core & (x == 0), 0.0, logrho)
    return logq, logrho


def _x_range(V: PotentialModel):
    def end(side):
        if V.has_zone(side):
            s_max = _INNER_S_MAX if side == "inner" else _S_END
        else:
            s_max = math.log(700.0)
        return _X0 + s_max - _LOG_X0

    return -end("inner"), end("outer")


def _x_grid(V: PotentialModel):
    xa, xb = _x_range(V)
    mid = _X0 + 50.0
    parts = [np.arange(-min(mid, -xa), min(mid, xb), 0.005)]
    if -xa > mid:
        parts.append(-np.geomspace(mid, -xa, 4000))
    if xb > mid:
        parts.append(np.geomspace(mid, xb, 4000))
    for b in _t_breaks(V):
        if abs(b) <= _X0:
            parts.append(np.array([b - 1e-9, b + 1e-9]))
    return np.unique(np.concatenate(parts))


def _x_splits(xa, xb):
    pts = [-_X0 - 50.0, -_X0, _X0, _X0 + 50.0]
    v = _X0 + 50.0
    while v < max(-xa, xb):
        v *= 1e3
        pts.extend([v, -v])
    return sorted(p for p in pts if xa < p < xb)


class _Bracket:
    def __init__(self, V: PotentialModel, a: float):
        self.V = V
        self.a = a
        self.x = _x_grid(V)
        self.lq, self.lr = _x_profile(V, self.x)
        self.xa, self.xb = self.x[0], self.x[-1]

    def _lq1(self, x):
        return float(_x_profile(self.V, np.array([x]))[0][0])

    def _rho1(self, x):
        return float(np.exp(_x_profile(self.V, np.array([x]))[1][0]))

    def log_measure(self, L):
        """``log`` of the rho-measure of ``{log q > L}``, endpoints located exactly."""
        above = self.lq > L
        if not np.any(above):
            return -np.inf
        edges = np.flatnonzero(np.diff(above.astype(np.int8)))
        cuts = []
        for i in edges:
            x0, x1 = self.x[i], self.x[i + 1]
            try:
                c = optimize.brentq(lambda y: self._lq1(y) - L, x0, x1, xtol=1e-13, rtol=1e-15)
            except ValueError:
                c = 0.5 * (x0 + x1)
            cuts.append(c)
        bounds = [self.xa] + cuts + [self.xb]
        state = bool(above[0])
        total = 0.0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if state and hi > lo:
                total += _quad(self._rho1, lo, hi, _x_splits(lo, hi))[0]
            state = not state
        return math.log(total) if total > 0 else -np.inf

    def G(self, L):
        return (1.0 + self.a) * L + self.log_measure(L)

    def evaluate(self):
        fin = np.isfinite(self.lq)
        if not np.any(fin):
            return FunctionalValue(0.0)
        w = np.zeros_like(self.x)
        dx = np.diff(self.x)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        with np.errstate(divide="ignore"):
            lw = self.lr + np.log(w)
        lq, lw = self.lq[fin], lw[fin]
        order = np.argsort(-lq, kind="stable")
        lq, lw = lq[order], lw[order]
        cum = np.logaddexp.accumulate(lw)
        Gs = (1.0 + self.a) * lq + cum
        j = int(np.argmax(Gs))
        g_max = Gs[j]
        log_cap = math.log(DIVERGENCE_CAP)
        if g_max > log_cap:
            return FunctionalValue(DIVERGENCE_CAP, 0.0, True)

        # envelope check: at a scan end where the potential is still alive,
        # the sup must not keep growing towards that end
        pos = np.empty(len(order), dtype=int)
        pos[order] = np.arange(len(order))
        idx_fin = np.flatnonzero(fin)
        for end, back in ((idx_fin[0], idx_fin[min(200, len(idx_fin) - 1)]),
                          (idx_fin[-1], idx_fin[max(len(idx_fin) - 201, 0)])):
            if end not in (0, len(self.x) - 1):
                continue
            e_rank = pos[np.searchsorted(idx_fin, end)]
            b_rank = pos[np.searchsorted(idx_fin, back)]
            dL = lq[e_rank] - lq[b_rank]
            if abs(dL) > 1e-3 and (Gs[e_rank] - Gs[b_rank]) > 1e-3 * abs(dL):
                return FunctionalValue(DIVERGENCE_CAP, 0.0, True)

        # refine: Brent in log(tau) over the near-maximal band of the scan
        near = np.flatnonzero(Gs >= g_max - 1e-2)
        j_lo = max(int(near.min()) - 2, 0)
        j_hi = min(int(near.max()) + 2, len(lq) - 1)
        Lb, La = lq[j_lo], lq[j_hi]
        cands = [lq[j] - 1e-12 * max(1.0, abs(lq[j]))]
        if Lb > La:
            res = optimize.minimize_scalar(lambda L: -self.G(L), bounds=(La, Lb), method="bounded",
                                           options={"xatol": 1e-12})
            cands.append(float(res.x))
        best = max(self.G(L) for L in cands)
        if best > log_cap:
            return FunctionalValue(DIVERGENCE_CAP, 0.0, True)
        # quad at 1e-11 and Brent at 1e-12 in log(tau)
        return FunctionalValue(math.exp(best), 1e-9 * math.exp(best))


def bracket_a(V: PotentialModel, a: float) -> FunctionalValue:
    """``sup_t t^(1+a) int_{Vbar/w > t} w(r) (1 + |log r|) r dr``."""
    a = float(a)
    if not a > 0:
        raise DomainError(f"bracket_a needs a > 0, got {a!r}")
    if V.is_zero:
        return FunctionalValue(0.0)
    return _Bracket(V, a).evaluate()


# -- report -----------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalReport:
    mixed_norm: FunctionalValue
    log_local: FunctionalValue
    log_global: FunctionalValue
    bracket_a: FunctionalValue
    l1_norm: FunctionalValue
    weyl: FunctionalValue
    p: float = 2.0
    a: float = 1.0

    def to_dict(self) -> dict:
        out = {"p": self.p, "a": self.a}
        for name in ("mixed_norm", "log_local", "log_global", "bracket_a", "l1_norm", "weyl"):
            v = getattr(self, name)
            out[name] = float(v)
            out[f"{name}_error"] = v.error
            out[f"{name}_divergent"] = v.divergent
        return out


def functional_report(V: PotentialModel, p: float = 2.0, a: float = 1.0) -> FunctionalReport:
    l1 = l1_norm(V)
    w = FunctionalValue(float(l1) / (2 * math.pi), l1.error / (2 * math.pi), l1.divergent)
    return FunctionalReport(
        mixed_norm(V, p), log_weighted_integral(V, "ball1"), log_weighted_integral(V, "plane"),
        bracket_a(V, a), l1, w, float(p), float(a),
    )

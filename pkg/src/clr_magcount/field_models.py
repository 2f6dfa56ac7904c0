"""Radial magnetic fields and their ground-state data.

Everything downstream works in the logarithmic variable ``t = log r``.  In
that variable ``dh/dt = phi`` and the potential ``h`` splits as

    h(t) = alpha * t + eta(t),   eta(t) = int_t^inf (alpha - phi) dtau,   t >= 0
    h(t) = h0 + zeta(t),         zeta(t) = int_-inf^t phi dtau,           t <  0

so that large-|t| evaluations never subtract nearly equal numbers.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigError, DomainError, IntegrationError

INTEGER_TOL = 1e-9
NEAR_INTEGER_WARN = 1e-6

_T_TABLE = 40.0
_DT_TABLE = 0.01
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _as_array(r):
    return np.asarray(r, dtype=float)


@dataclass(frozen=True)
class FieldModel:
    """A radial field ``B(r)``.

    ``phi_fn`` and ``tail_fn`` (``alpha - phi``) are optional closed forms;
    without them the partial flux is tabulated by quadrature.
    """

    kind: str
    params: dict
    profile: Callable = field(repr=False, compare=False)
    eps: float = 2.0
    r_support: float = 10.0
    decay_bound: float = 1.0
    phi_fn: Callable | None = field(default=None, repr=False, compare=False)
    tail_fn: Callable | None = field(default=None, repr=False, compare=False)
    alpha_exact: float | None = None

    def __post_init__(self):
        rs = np.geomspace(self.r_support, 1e6, 64)
        vals = np.abs(self.profile(rs)) * rs ** (2.0 + self.eps)
        if not np.all(vals <= self.decay_bound * (1 + 1e-12)):
            raise DomainError(
                f"field {self.kind} violates the decay envelope |B| r^(2+eps) <= "
                f"{self.decay_bound} beyond r = {self.r_support}"
            )

    def B(self, r):
        return self.profile(_as_array(r))

    @property
    def alpha(self) -> float:
        if self.alpha_exact is not None:
            return self.alpha_exact
        return flux(self)

    @property
    def is_integer_alpha(self) -> bool:
        return integer_flux(self.alpha)

    def to_json(self) -> dict:
        return {"type": self.kind, **self.params}


def integer_flux(alpha: float) -> bool:
    """Integer-flux detection with tolerance ``INTEGER_TOL``."""
    gap = abs(alpha - round(alpha))
    if INTEGER_TOL < gap <= NEAR_INTEGER_WARN:
        warnings.warn(
            f"flux {alpha!r} is within {gap:.1e} of an integer; treated as non-integer",
            RuntimeWarning,
            stacklevel=2,
        )
    return gap <= INTEGER_TOL


def gaussian_field(amplitude: float, width: float = 1.0) -> FieldModel:
    """``B(r) = amplitude * exp(-r^2 / width^2)``; flux ``amplitude * width^2 / 2``."""
    a = float(amplitude)
    w = float(width)
    if w <= 0:
        raise DomainError("width must be positive")
    alpha = a * w * w / 2.0

    def prof(r):
        with np.errstate(over="ignore"):
            return a * np.exp(-(r / w) ** 2)

    def phi(r):
        with np.errstate(over="ignore"):
            return -alpha * np.expm1(-(r / w) ** 2)

    def tail(r):
        with np.errstate(over="ignore"):
            return alpha * np.exp(-(r / w) ** 2)

    r_sup = w * 12.0
    return FieldModel(
        "gaussian",
        {"amplitude": a, "width": w},
        prof,
        eps=2.0,
        r_support=r_sup,
        decay_bound=max(1.0, abs(a)),
        phi_fn=phi,
        tail_fn=tail,
        alpha_exact=alpha,
    )


def gaussian_with_flux(alpha: float, width: float = 1.0) -> FieldModel:
    return gaussian_field(2.0 * alpha / (width * width), width)


def compact_bump_field(amplitude: float, radius: float = 1.0) -> FieldModel:
    """``B(r) = amplitude * (1 - r^2/R^2)^2`` on ``r < R``; flux ``amplitude R^2 / 6``."""
    a = float(amplitude)
    R = float(radius)
    if R <= 0:
        raise DomainError("radius must be positive")
    alpha = a * R * R / 6.0

    def prof(r):
        x = np.clip(1.0 - (r / R) ** 2, 0.0, None)
        return a * x * x

    def phi(r):
        rr = np.minimum(r, R) ** 2
        return a * rr * (0.5 - rr / (2 * R * R) + rr * rr / (6 * R**4))

    def tail(r):
        x = np.clip(1.0 - (r / R) ** 2, 0.0, None)
        return alpha * x**3

    return FieldModel(
        "compact_bump",
        {"amplitude": a, "radius": R},
        prof,
        eps=2.0,
        r_support=R,
        decay_bound=1.0,
        phi_fn=phi,
        tail_fn=tail,
        alpha_exact=alpha,
    )


def zero_field() -> FieldModel:
    def prof(r):
        return np.zeros_like(r)

    return FieldModel(
        "zero", {}, prof, r_support=1.0, phi_fn=prof, tail_fn=prof, alpha_exact=0.0
    )


def custom_field(profile: Callable, eps: float = 2.0, r_support: float = 10.0,
                 decay_bound: float = 1.0) -> FieldModel:
    """Field from an arbitrary vectorised profile; flux and phi by quadrature."""
    return FieldModel("custom", {}, profile, eps=eps, r_support=r_support,
                      decay_bound=decay_bound)


def flux(fm: FieldModel) -> float:
    """``int_0^inf B(r) r dr`` by adaptive quadrature in ``t = log r`` (rtol 1e-9)."""

    def integrand(t):
        r = math.exp(t)
        return float(fm.profile(np.array([r]))[0]) * r * r

    # split at t = 0 and at the support radius so quad sees the bulk
    pts = sorted({-60.0, 0.0, math.log(fm.r_support), 60.0})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, err = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-11, limit=400)
        if not math.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300) + 1e-14:
            raise IntegrationError(f"flux quadrature failed on [{a}, {b}] (err={err})")
        total += val
    return total


def field_from_json(doc) -> FieldModel:
    """Build a field from ``{"type": ...}`` or the inline form ``gaussian:alpha=0.3``."""
    if isinstance(doc, str):
        s = doc.strip()
        if s.startswith("{"):
            doc = json.loads(s)
        else:
            doc = _parse_inline(s)
    if not isinstance(doc, dict) or "type" not in doc:
        raise ConfigError(f"field spec must carry a 'type': {doc!r}")
    kind = doc["type"]
    p = {k: v for k, v in doc.items() if k != "type"}
    try:
        if kind == "gaussian":
            w = float(p.get("width", 1.0))
            if "alpha" in p:
                return gaussian_with_flux(float(p["alpha"]), w)
            return gaussian_field(float(p["amplitude"]), w)
        if kind == "compact_bump":
            R = float(p.get("radius", 1.0))
            if "alpha" in p:
                return compact_bump_field(6.0 * float(p["alpha"]) / (R * R), R)
            return compact_bump_field(float(p["amplitude"]), R)
        if kind in ("zero", "none"):
            return zero_field()
    except KeyError as exc:
        raise ConfigError(f"field {kind!r} missing parameter {exc}") from None
    raise ConfigError(f"unknown field type {kind!r}")


def _parse_inline(s: str) -> dict:
    kind, _, rest = s.partition(":")
    doc = {"type": kind.strip()}
    for item in filter(None, (x.strip() for x in rest.split(","))):
        k, eq, v = item.partition("=")
        if not eq:
            raise ConfigError(f"bad inline parameter {item!r}")
        doc[k.strip()] = float(v)
    return doc


def m_alpha(alpha: float) -> int:
    """``max{1 + floor(alpha), 2}``."""
    if alpha < 0 or math.isnan(alpha):
        raise DomainError("alpha must be >= 0")
    return max(1 + math.floor(alpha + INTEGER_TOL), 2)


class GroundStateData:
    """Ground-state potential ``h`` and comparison constants for one field."""

    def __init__(self, fm: FieldModel):
        self.field = fm
        self.alpha = float(fm.alpha)
        self._eps = fm.eps
        self._build_tables()
        self._build_constants()

    # -- partial flux in t --------------------------------------------------
    def phi_t(self, t):
        t = _as_array(t)
        if self.field.phi_fn is not None:
            with np.errstate(over="ignore"):
                return self.field.phi_fn(np.exp(t))
        return self._phi_spline(np.clip(t, -_T_TABLE, _T_TABLE))

    def tail_t(self, t):
        """``alpha - phi`` at ``t``, accurate when it is small."""
        t = _as_array(t)
        if self.field.tail_fn is not None:
            with np.errstate(over="ignore"):
                return self.field.tail_fn(np.exp(t))
        return self.alpha - self.phi_t(t)

    def phi(self, r):
        return self.phi_t(np.log(_as_array(r)))

    def h_prime(self, r):
        r = _as_array(r)
        return self.phi(r) / r

    # -- tables --------------------------------------------------------------
    def _build_tables(self):
        n = int(round(2 * _T_TABLE / _DT_TABLE))
        tg = np.linspace(-_T_TABLE, _T_TABLE, n + 1)
        self._tg = tg
        if self.field.phi_fn is None:
            self._tabulate_generic_phi(tg)
        a, b = tg[:-1], tg[1:]
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        dz = (self.phi_t(nodes) * _GL_W).sum(axis=1) * half
        de = (self.tail_t(nodes) * _GL_W).sum(axis=1) * half
        phi0 = float(self.phi_t(np.array([tg[0]]))[0])
        tailT = float(self.tail_t(np.array([tg[-1]]))[0])
        # tails beyond the table: phi ~ c r^2 near 0, alpha - phi ~ r^-eps at infinity
        zeta = np.concatenate([[phi0 / 2.0], phi0 / 2.0 + np.cumsum(dz)])
        eta_rev = np.cumsum(de[::-1])
        eta = np.concatenate([tailT / self._eps + eta_rev[::-1], [tailT / self._eps]])
        self._zeta_s = CubicHermiteSpline(tg, zeta, self.phi_t(tg))
        self._eta_s = CubicHermiteSpline(tg, eta, -self.tail_t(tg))
        i0 = n // 2
        self.h0 = float(eta[i0] - zeta[i0])

    def _tabulate_generic_phi(self, tg):
        a, b = tg[:-1], tg[1:]
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        rn = np.exp(nodes)
        d = (self.field.profile(rn) * rn * rn * _GL_W).sum(axis=1) * half
        r0 = math.exp(tg[0])
        start = float(self.field.profile(np.array([r0]))[0]) * r0 * r0 / 2.0
        vals = np.concatenate([[start], start + np.cumsum(d)])
        rg = np.exp(tg)
        self._phi_spline = CubicHermiteSpline(tg, vals, self.field.profile(rg) * rg * rg)

    # -- h in pieces ---------------------------------------------------------
    def eta(self, t):
        """``h - alpha t`` (meaningful for ``t >= 0``)."""
        t = _as_array(t)
        out = self._eta_s(np.clip(t, -_T_TABLE, _T_TABLE))
        far = t > _T_TABLE
        if np.any(far):
            out = np.where(far, self.tail_t(np.where(far, t, 0.0)) / self._eps, out)
        return out

    def zeta(self, t):
        """``h - h0`` (meaningful for ``t < 0``)."""
        t = _as_array(t)
        out = self._zeta_s(np.clip(t, -_T_TABLE, _T_TABLE))
        far = t < -_T_TABLE
        if np.any(far):
            out = np.where(far, self.phi_t(np.where(far, t, 0.0)) / 2.0, out)
        return out

    def h_t(self, t):
        t = _as_array(t)
        pos = t >= 0
        with np.errstate(invalid="ignore"):
            hp = self.alpha * np.where(pos, t, 0.0) + self.eta(np.where(pos, t, 0.0))
            hn = self.h0 + self.zeta(np.where(pos, 0.0, t))
        return np.where(pos, hp, hn)

    def h(self, r):
        return self.h_t(np.log(_as_array(r)))

    def log_weight(self, t, m: int, spin: str):
        """``log`` of the ground-state weight ``e^{-+2h} r^{+-2m}`` at ``t`` (ints kept exact)."""
        t = _as_array(t)
        sgn = -1.0 if spin == "minus" else 1.0
        pos = t >= 0
        tp = np.where(pos, t, 0.0)
        tn = np.where(pos, 0.0, t)
        coef = m - self.alpha
        with np.errstate(invalid="ignore"):
            lin_p = 0.0 if coef == 0 else -2.0 * sgn * coef * tp
            gp = 2.0 * sgn * self.eta(tp) + lin_p
            gn = 2.0 * sgn * (self.h0 + self.zeta(tn)) - 2.0 * sgn * m * tn
        return np.where(pos, gp, gn)

    # -- comparison constants ------------------------------------------------
    def _build_constants(self):
        if self.alpha == 0.0 and self.field.kind == "zero":
            dmin = dmax = 0.0
        else:
            r = np.geomspace(1e-6, 1e6, 4000)

            def D(rv):
                rv = np.atleast_1d(rv)
                return self.h(rv) - self.alpha * np.log1p(rv)

            d = D(r)
            dmin, dmax = float(d.min()), float(d.max())
            for idx, sense in ((int(np.argmin(d)), 1.0), (int(np.argmax(d)), -1.0)):
                if 0 < idx < len(r) - 1:
                    lo, mid, hi = math.log(r[idx - 1]), math.log(r[idx]), math.log(r[idx + 1])
                    res = optimize.minimize_scalar(
                        lambda s: sense * float(D(math.exp(s))[0]),
                        bracket=(lo, mid, hi), method="golden", tol=1e-10,
                    )
                    val = sense * float(res.fun)
                    dmin = min(dmin, val)
                    dmax = max(dmax, val)
            # limits at r -> 0 (h0) and r -> infinity (0)
            dmin = min(dmin, self.h0, 0.0)
            dmax = max(dmax, self.h0, 0.0)
        self.d_min = dmin
        self.d_max = dmax
        self.mu_plus = math.exp(dmin)
        self.m_plus = math.exp(dmax)
        self.mu_minus = math.exp(-dmax)
        self.m_minus = math.exp(-dmin)
        self.M_plus = self.m_plus / self.mu_plus
        self.M_minus = self.m_minus / self.mu_minus

    def constants(self) -> dict:
        return {
            "mu_plus": self.mu_plus,
            "mu_minus": self.mu_minus,
            "m_plus": self.m_plus,
            "m_minus": self.m_minus,
            "M_plus": self.M_plus,
            "M_minus": self.M_minus,
        }


def build_ground_state(fm: FieldModel) -> GroundStateData:
    return GroundStateData(fm)

"""Nonnegative potentials and their angular averages.

Each model supplies ``log_r2v(t)``, the logarithm of ``r^2 * Vbar(r)`` at
``t = log r``.  The singular and slowly decaying families also supply
``log_r2v_s(s, side)`` with ``s = log|t|`` so the counting oracle can reach
radii like ``exp(-exp(1e5))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError

E2 = math.exp(-2.0)


def _check_sigma(sigma):
    if not sigma > 1:
        raise DomainError(f"sigma must exceed 1, got {sigma!r}")


def v_sigma(sigma: float, r):
    """``r^-2 |log r|^-2 (log|log r|)^(-1/sigma)`` for ``r < e^-2``, else 0."""
    _check_sigma(sigma)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    t = np.log(np.where(r > 0, r, 1.0))
    inside = t < -2.0 - 1e-12
    if np.any(inside):
        ti = t[inside]
        out[inside] = np.exp(-2 * ti - 2 * np.log(-ti) - np.log(np.log(-ti)) / sigma)
    return out if out.ndim else float(out)


def w_sigma(sigma: float, r):
    """``r^-2 (log r)^-2 (log log r)^(-1/sigma)`` for ``r > e^2``, else 0."""
    _check_sigma(sigma)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    t = np.log(np.where(r > 0, r, 1.0))
    inside = t > 2.0 + 1e-12
    if np.any(inside):
        ti = t[inside]
        out[inside] = np.exp(-2 * ti - 2 * np.log(ti) - np.log(np.log(ti)) / sigma)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PotentialModel:
    """A potential ``V(r, theta) >= 0``.

    ``kind`` is ``radial``, ``separable`` (``f(r) g(theta)`` with unit-mean
    ``g``) or ``polar`` (general, used by the functional evaluators only).
    """

    kind: str
    name: str
    params: dict
    radial_part: Callable = field(repr=False, compare=False)
    angular_part: Callable | None = field(default=None, repr=False, compare=False)
    polar_part: Callable | None = field(default=None, repr=False, compare=False)
    singular_at_origin: bool = False
    decay_class: str = "compact"
    sigma: float | None = None
    scale: float = 1.0
    support: tuple = (0.0, math.inf)
    breakpoints: tuple = ()
    _log_r2v_fn: Callable | None = field(default=None, repr=False, compare=False)
    _lp_fn: Callable | None = field(default=None, repr=False, compare=False)

    def __call__(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.kind == "polar":
            return self.scale * self.polar_part(r, theta)
        val = self.scale * self.radial_part(r)
        if self.angular_part is not None:
            val = val * self.angular_part(theta)
        return val

    def scaled(self, c: float) -> "PotentialModel":
        if c < 0:
            raise DomainError("potentials must stay nonnegative")
        return replace(self, scale=self.scale * c)

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0 or self.name == "zero"

    # -- angular structure ---------------------------------------------------
    def v_bar(self, r):
        """Angular mean ``(1/2pi) int V(r, theta) dtheta``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "polar":
            return self.scale * self._polar_mean(r)
        return self.scale * self.radial_part(r)

    def angular_lp(self, r, p: float):
        """``(int_0^2pi V(r, theta)^p dtheta)^(1/p)``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "radial":
            return self.scale * (2 * math.pi) ** (1.0 / p) * self.radial_part(r)
        if self.kind == "separable":
            return self.scale * self.radial_part(r) * _periodic_lp(self.angular_part, p)
        if self._lp_fn is not None:
            return self.scale * self._lp_fn(r, p)
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        vals = np.abs(self.polar_part(r[..., None], th)) ** p
        return self.scale * (vals.mean(axis=-1) * 2 * np.pi) ** (1.0 / p)

    def _polar_mean(self, r):
        if self._lp_fn is not None:
            return self._lp_fn(r, 1.0) / (2 * math.pi)
        th = np.linspace(0, 2 * np.pi, 2048, endpoint=False)
        return self.polar_part(r[..., None], th).mean(axis=-1)

    # -- log forms used by the counting oracle -------------------------------
    def log_r2v(self, t):
        """``log(r^2 Vbar(r))`` at ``t = log r`` (``-inf`` where the mean vanishes)."""
        t = np.asarray(t, dtype=float)
        ls = math.log(self.scale) if self.scale > 0 else -math.inf
        if self._log_r2v_fn is not None:
            return ls + self._log_r2v_fn(t)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            r = np.exp(t)
            v = self.v_bar(r) / self.scale if self.scale > 0 else np.zeros_like(r)
            out = np.log(v) + 2 * t
        out = np.where(np.isfinite(t), out, -np.inf)
        return ls + out

    def log_r2v_s(self, s, side: str):
        """``log(r^2 Vbar)`` at ``t = -e^s`` (inner) or ``t = e^s`` (outer)."""
        s = np.asarray(s, dtype=float)
        return self.log_t2r2v_s(s, side) - 2 * s

    def log_t2r2v_s(self, s, side: str):
        """``log(t^2 r^2 Vbar)`` at ``t = -+e^s``; free of cancellation for huge ``s``."""
        s = np.asarray(s, dtype=float)
        ls = math.log(self.scale) if self.scale > 0 else -math.inf
        if self.has_zone(side):
            with np.errstate(divide="ignore", invalid="ignore"):
                return ls - np.log(s) / self.sigma
        return np.full_like(s, -np.inf)

    def has_zone(self, side: str) -> bool:
        """True when the potential reaches beyond any fixed log-radius on ``side``."""
        return (self.decay_class == "V_sigma" and side == "inner") or (
            self.decay_class == "W_sigma" and side == "outer"
        )

    def to_json(self) -> dict:
        d = {"type": self.name, **self.params}
        if self.scale != 1.0:
            d["scale"] = self.scale
        return d


def _periodic_lp(g, p):
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    return float((np.mean(np.abs(g(th)) ** p) * 2 * np.pi) ** (1.0 / p))


@dataclass(frozen=True)
class AngularAverage:
    """``Vbar(r)`` together with its log form on the ``t`` axis."""

    potential: PotentialModel

    def __call__(self, r):
        return self.potential.v_bar(r)

    def log_r2v(self, t):
        return self.potential.log_r2v(t)

    def scaled(self, c):
        return AngularAverage(self.potential.scaled(c))


def angular_average(V: PotentialModel) -> AngularAverage:
    return AngularAverage(V)


# -- built-in models --------------------------------------------------------

def _lr2v_vsigma(sigma):
    def f(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.abs(t)
            val = -2 * np.log(a) - np.log(np.log(a)) / sigma
        return np.where(t < -2.0, val, -np.inf)

    return f


def _lr2v_wsigma(sigma):
    def f(t):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.abs(t)
            val = -2 * np.log(a) - np.log(np.log(a)) / sigma
        return np.where(t > 2.0, val, -np.inf)

    return f


def v_sigma_potential(sigma: float) -> PotentialModel:
    _check_sigma(sigma)
    return PotentialModel(
        "radial", "v_sigma", {"sigma": sigma},
        lambda r: v_sigma(sigma, r),
        singular_at_origin=True, decay_class="V_sigma", sigma=float(sigma),
        support=(0.0, E2), breakpoints=(E2,), _log_r2v_fn=_lr2v_vsigma(sigma),
    )


def w_sigma_potential(sigma: float) -> PotentialModel:
    _check_sigma(sigma)
    return PotentialModel(
        "radial", "w_sigma", {"sigma": sigma},
        lambda r: w_sigma(sigma, r),
        decay_class="W_sigma", sigma=float(sigma),
        support=(math.exp(2.0), math.inf), breakpoints=(math.exp(2.0),),
        _log_r2v_fn=_lr2v_wsigma(sigma),
    )


def disk_potential(radius: float = 1.0, height: float = 1.0) -> PotentialModel:
    """Indicator of the disk ``r < radius`` times ``height``."""
    R = float(radius)
    if R <= 0:
        raise DomainError("radius must be positive")

    def f(r):
        return np.where(np.asarray(r) < R, float(height), 0.0)

    def lr(t):
        with np.errstate(divide="ignore"):
            return np.where(t < math.log(R), math.log(height) + 2 * t, -np.inf)

    return PotentialModel(
        "radial", "indicator_disk", {"radius": R, "height": float(height)}, f,
        support=(0.0, R), breakpoints=(R,), _log_r2v_fn=lr,
    )


def gaussian_potential(amplitude: float = 1.0, width: float = 1.0) -> PotentialModel:
    a, w = float(amplitude), float(width)

    def f(r):
        return a * np.exp(-((np.asarray(r) / w) ** 2))

    def lr(t):
        with np.errstate(over="ignore"):
            return math.log(a) + 2 * t - np.exp(2 * t) / (w * w)

    return PotentialModel(
        "radial", "gaussian", {"amplitude": a, "width": w}, f,
        decay_class="integrable", _log_r2v_fn=lr,
    )


def zero_potential() -> PotentialModel:
    return PotentialModel("radial", "zero", {}, lambda r: np.zeros_like(np.asarray(r, float)),
                          scale=0.0, support=(0.0, 0.0))


def separable_potential(radial: PotentialModel, angular: Callable, name_params=None) -> PotentialModel:
    """``f(r) g(theta)``; ``g`` is renormalised to unit mean."""
    if radial.kind != "radial":
        raise DomainError("separable potentials need a radial factor")
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    gv = angular(th)
    if np.any(gv < 0):
        raise DomainError("angular part must be nonnegative")
    mean = float(gv.mean())
    if mean <= 0:
        raise DomainError("angular part has zero mean")

    def g(theta):
        return angular(np.asarray(theta, float)) / mean

    params = {"radial": radial.to_json(), "angular": name_params or {}}
    return replace(radial, kind="separable", name="separable", params=params, angular_part=g)


def cosine_angular(amplitude: float = 1.0, order: int = 1) -> Callable:
    """``1 + amplitude cos(order theta)`` with ``|amplitude| <= 1``."""
    if abs(amplitude) > 1:
        raise DomainError("cosine amplitude must be at most 1 in modulus")

    def g(theta):
        return 1.0 + amplitude * np.cos(order * theta)

    return g


def offset_disk_potential(radius: float, center: float) -> PotentialModel:
    """Indicator of a disk of ``radius`` centred at distance ``center`` from the origin."""
    rho, d = float(radius), float(center)
    if rho <= 0 or d < 0:
        raise DomainError("bad offset disk")

    def polar(r, theta):
        x = r * np.cos(theta) - d
        y = r * np.sin(theta)
        return (x * x + y * y < rho * rho).astype(float)

    def arc(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = (r * r + d * d - rho * rho) / (2 * r * d)
        if d == 0:
            return np.where(r < rho, 2 * np.pi, 0.0)
        return 2 * np.arccos(np.clip(c, -1.0, 1.0))

    def lp(r, p):
        return arc(r) ** (1.0 / p)

    return PotentialModel(
        "polar", "offset_disk", {"radius": rho, "center": d},
        radial_part=lambda r: arc(r) / (2 * np.pi), polar_part=polar,
        support=(max(d - rho, 0.0), d + rho),
        breakpoints=tuple(x for x in (abs(d - rho), d + rho) if x > 0),
        _lp_fn=lp,
    )


# -- parsing ----------------------------------------------------------------

def potential_from_json(doc) -> PotentialModel:
    """Build from ``{"type": ...}`` JSON or the inline form ``disk:r=1``."""
    if isinstance(doc, str):
        s = doc.strip()
        if s.startswith("{"):
            doc = json.loads(s)
        else:
            kind, _, rest = s.partition(":")
            doc = {"type": kind.strip()}
            for item in filter(None, (x.strip() for x in rest.split(","))):
                k, eq, v = item.partition("=")
                if not eq:
                    raise ConfigError(f"bad inline parameter {item!r}")
                doc[k.strip()] = float(v)
    if not isinstance(doc, dict) or "type" not in doc:
        raise ConfigError(f"potential spec must carry a 'type': {doc!r}")
    kind = doc["type"]
    scale = float(doc.get("scale", 1.0))
    try:
        if kind == "v_sigma":
            pm = v_sigma_potential(float(doc["sigma"]))
        elif kind == "w_sigma":
            pm = w_sigma_potential(float(doc["sigma"]))
        elif kind in ("indicator_disk", "disk"):
            pm = disk_potential(float(doc.get("radius", doc.get("r", 1.0))),
                                float(doc.get("height", 1.0)))
        elif kind == "gaussian":
            pm = gaussian_potential(float(doc.get("amplitude", 1.0)), float(doc.get("width", 1.0)))
        elif kind == "zero":
            return zero_potential()
        elif kind == "offset_disk":
            pm = offset_disk_potential(float(doc.get("radius", 1.0)), float(doc["center"]))
        elif kind == "separable":
            rad = potential_from_json(doc["radial"])
            ang = doc.get("angular", {"type": "cosine", "amplitude": 1.0, "order": 1})
            if ang.get("type", "cosine") != "cosine":
                raise ConfigError(f"unknown angular part {ang!r}")
            g = cosine_angular(float(ang.get("amplitude", 1.0)), int(ang.get("order", 1)))
            pm = separable_potential(rad, g, ang)
        else:
            raise ConfigError(f"unknown potential type {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"potential {kind!r} missing parameter {exc}") from None
    return pm.scaled(scale) if scale != 1.0 else pm

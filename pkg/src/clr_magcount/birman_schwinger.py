"""Birman-Schwinger kernels, resolvents, Nystrom matrices and PSD checks.

All kernels carry the factor ``sqrt(r r')`` and act in ``L^2(dr)``; the
operator of interest is ``sqrt(Vbar) K sqrt(Vbar)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FactorizationError
from .functionals import DIVERGENCE_CAP, FunctionalValue, _quad, _side_integral
from .potential_models import AngularAverage, PotentialModel
from .special_functions import BesselPair, bessel_ik

KINDS = ("log_interior", "log_exterior", "min_power", "t0_limit", "t_alpha_limit", "resolvent")
DEFAULT_SEED = 0x5EED
KAPPA_LADDER = (2e-4, 1e-4, 5e-5)
_LOG_SPAN = 40.0


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    alpha: float | None = None
    m: int | None = None
    kappa: float | None = None
    symmetric: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        if self.kind not in ("log_interior", "log_exterior"):
            if self.alpha is None or not self.alpha > 0:
                raise DomainError(f"{self.kind} needs alpha > 0")
        if self.kind == "resolvent":
            if self.m is None or int(self.m) != self.m or self.m < 0:
                raise DomainError("resolvent needs an integer m >= 0")
            if self.kappa is None or not 1e-6 <= self.kappa <= 1e2:
                raise DomainError("resolvent needs kappa in [1e-6, 1e2]")

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind == "log_interior":
            return (0.0, 1.0)
        if self.kind == "log_exterior":
            return (1.0, math.inf)
        return (0.0, math.inf)

    def __call__(self, r, rp):
        return kernel_eval(self, r, rp)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for k in ("alpha", "m", "kappa"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d


def log_interior() -> KernelSpec:
    return KernelSpec("log_interior")


def log_exterior() -> KernelSpec:
    return KernelSpec("log_exterior")


def min_power(alpha: float) -> KernelSpec:
    return KernelSpec("min_power", float(alpha))


def t0_limit(alpha: float) -> KernelSpec:
    return KernelSpec("t0_limit", float(alpha))


def t_alpha_limit(alpha: float) -> KernelSpec:
    return KernelSpec("t_alpha_limit", float(alpha))


def kernel_spec_from_string(text: str) -> KernelSpec:
    """Parse ``"t0_limit:alpha=1"`` style strings."""
    name, _, rest = text.partition(":")
    kw = {}
    for part in filter(None, rest.split(",")):
        k, _, v = part.partition("=")
        kw[k.strip()] = float(v)
    if "m" in kw:
        kw["m"] = int(kw["m"])
    return KernelSpec(name.strip(), kw.get("alpha"), kw.get("m"), kw.get("kappa"))


# -- closed forms -----------------------------------------------------------

def _check_domain(spec: KernelSpec, r, rp):
    lo, hi = spec.domain
    for x in (r, rp):
        if np.any(~(x > 0)) or np.any(~np.isfinite(x)):
            raise DomainError("kernel arguments must be positive and finite")
        if lo > 0 and np.any(x < lo):
            raise DomainError(f"{spec.kind} is defined on r >= {lo}")
        if math.isfinite(hi) and np.any(x > hi):
            raise DomainError(f"{spec.kind} is defined on r <= {hi}")


def kernel_eval(spec: KernelSpec, r, rp):
    """Kernel value ``K(r, r')``; broadcasts over arrays."""
    if spec.kind == "resolvent":
        rb, rpb = np.broadcast_arrays(np.asarray(r, float), np.asarray(rp, float))
        out = np.array([resolvent_kernel(spec.m, spec.alpha, spec.kappa, a, b)
                        for a, b in zip(rb.ravel(), rpb.ravel())]).reshape(rb.shape)
        return out if out.ndim else float(out)
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    _check_domain(spec, r, rp)
    lo = np.minimum(r, rp)
    hi = np.maximum(r, rp)
    root = np.sqrt(r * rp)
    a = spec.alpha
    if spec.kind == "log_interior":
        out = -root * np.log(hi)
    elif spec.kind == "log_exterior":
        out = root * np.log(lo)
    elif spec.kind == "min_power":
        out = root / (2 * a) * (lo / hi) ** a
    elif spec.kind == "t0_limit":
        c = 1.0 / (2 * a)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(hi <= 1.0, c - np.log(hi),
                           np.where(lo > 1.0, c * (lo / hi) ** a, c * hi ** (-a)))
        out = root * out
    else:
        c = 1.0 / (2 * a)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(hi <= 1.0, c * (lo / hi) ** a,
                           np.where(lo > 1.0, c + np.log(lo), c * lo ** a))
        out = root * out
    return out if out.ndim else float(out)


def diagonal_factor(spec: KernelSpec, r):
    """``K(r, r) / r`` for the closed-form kinds."""
    r = np.asarray(r, dtype=float)
    a = spec.alpha
    with np.errstate(divide="ignore"):
        lr = np.log(r)
    if spec.kind == "log_interior":
        return -lr
    if spec.kind == "log_exterior":
        return lr
    if spec.kind == "min_power":
        return np.full_like(r, 1.0 / (2 * a))
    if spec.kind == "t0_limit":
        return np.where(r <= 1.0, 1.0 / (2 * a) - lr, 1.0 / (2 * a))
    if spec.kind == "t_alpha_limit":
        return np.where(r <= 1.0, 1.0 / (2 * a), 1.0 / (2 * a) + lr)
    raise DomainError("diagonal_factor is only defined for closed-form kinds")


# -- resolvents -------------------------------------------------------------
# Bessel values are kept as mantissa * exp(exponent) pairs: I_50(1e-4) and
# K_50(1e-4) alone are far outside double range while their products are O(1).

def _logI(b: BesselPair):
    return math.log(b.i_mant) + b.z + b.i_exp


def _logK(b: BesselPair):
    return math.log(b.k_mant) + b.k_exp - b.z


def _signed(mant: float, logscale: float) -> float:
    if mant == 0.0:
        return 0.0
    return math.copysign(math.exp(math.log(abs(mant)) + logscale), mant)


def _coefficients(m: int, alpha: float, kappa: float):
    """``(a, b, d)`` mantissas and log-scales of ``A_m, B_m, D_m``."""
    nu = abs(alpha - m)
    bm = bessel_ik(m, kappa)
    bn = bessel_ik(nu, kappa)
    k = kappa
    a_m = k * bm.i_dmant * bn.k_mant + alpha * bm.i_mant * bn.k_mant - k * bm.i_mant * bn.k_dmant
    a_l = (bm.z + bm.i_exp) + (bn.k_exp - bn.z)
    b_m = -k * bm.i_dmant * bn.i_mant - alpha * bm.i_mant * bn.i_mant + k * bm.i_mant * bn.i_dmant
    b_l = (bm.z + bm.i_exp) + (bn.z + bn.i_exp)
    d_m = -k * bm.k_dmant * bn.k_mant - alpha * bm.k_mant * bn.k_mant + k * bm.k_mant * bn.k_dmant
    d_l = (bm.k_exp - bm.z) + (bn.k_exp - bn.z)
    if abs(a_m) == 0.0 or math.log(abs(a_m)) + a_l < math.log(1e-300):
        raise FactorizationError("matching coefficient A_m(kappa) vanished")
    return (a_m, a_l), (b_m, b_l), (d_m, d_l)


def matching_coefficients(m: int, alpha: float, kappa: float) -> tuple[float, float, float]:
    """``A_m, B_m, D_m`` as plain floats (may overflow for large orders)."""
    (a, al), (b, bl), (d, dl) = _coefficients(m, alpha, kappa)
    return _signed(a, al), _signed(b, bl), _signed(d, dl)


def resolvent_kernel(m: int, alpha: float, kappa: float, r: float, rp: float) -> float:
    """``(T_m + kappa^2)^{-1}(r, r')``."""
    if int(m) != m or m < 0:
        raise DomainError("m must be a nonnegative integer")
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not 1e-6 <= kappa <= 1e2:
        raise DomainError("kappa must lie in [1e-6, 1e2]")
    r, rp = float(r), float(rp)
    if not (r > 0 and rp > 0):
        raise DomainError("r, r' must be positive")
    if r > rp:
        r, rp = rp, r
    m = int(m)
    nu = abs(alpha - m)
    (a, al), (b, bl), (d, dl) = _coefficients(m, alpha, kappa)
    half = 0.5 * (math.log(r) + math.log(rp))
    if rp <= 1.0:
        x, y = bessel_ik(m, kappa * r), bessel_ik(m, kappa * rp)
        t1 = math.exp(half + _logI(x) + _logK(y))
        t2 = _signed(d / a * x.i_mant * y.i_mant,
                     half + dl - al + (x.z + x.i_exp) + (y.z + y.i_exp))
        return t1 + t2
    if r > 1.0:
        x, y = bessel_ik(nu, kappa * r), bessel_ik(nu, kappa * rp)
        t1 = math.exp(half + _logI(x) + _logK(y))
        t2 = _signed(b / a * x.k_mant * y.k_mant,
                     half + bl - al + (x.k_exp - x.z) + (y.k_exp - y.z))
        return t1 + t2
    x, y = bessel_ik(m, kappa * r), bessel_ik(nu, kappa * rp)
    return _signed(x.i_mant * y.k_mant / a, half - al + (x.z + x.i_exp) + (y.k_exp - y.z))


def dirichlet_resolvent(kind: str, kappa: float, r: float, rp: float) -> float:
    """Interior ``(0,1)`` or exterior ``(1, inf)`` Dirichlet resolvent of ``-d^2 - 1/(4r^2)``.

    ``kind`` is ``log_interior`` or ``log_exterior``; their ``kappa -> 0``
    limits are the two log kernels.
    """
    if not 1e-6 <= kappa <= 1e2:
        raise DomainError("kappa must lie in [1e-6, 1e2]")
    r, rp = sorted((float(r), float(rp)))
    b1 = bessel_ik(0.0, kappa)
    x, y = bessel_ik(0.0, kappa * r), bessel_ik(0.0, kappa * rp)
    root = math.sqrt(r * rp)
    if kind == "log_interior":
        if not (0 < r and rp <= 1.0):
            raise DomainError("interior resolvent lives on (0, 1]")
        beta = b1.k_val / b1.i_val
        return root * x.i_val * (y.k_val - beta * y.i_val)
    if kind == "log_exterior":
        if not r >= 1.0:
            raise DomainError("exterior resolvent lives on [1, inf)")
        beta = b1.k_val / b1.i_val
        return root * (x.i_val - x.k_val / beta) * y.k_val
    raise DomainError(f"no Dirichlet resolvent for {kind!r}")


def _limit_mode(kind: str, m=None, alpha=None) -> str:
    if kind == "log_exterior":
        return "log"
    if kind == "resolvent" and abs(alpha - m) == 0:
        return "log"
    return "power"


def extrapolate_kappa(values, kappas=KAPPA_LADDER, mode: str = "power") -> float:
    """Extrapolate resolvent values on the kappa ladder to ``kappa = 0``.

    ``power`` uses Aitken's delta-squared on the halving ladder.  ``log``
    is for kernels with a zero-order Bessel function on the outer side: up
    to ``O(kappa^2)`` they are Moebius functions of ``x = K_0(kappa)``, so the
    three values fix ``(p + q x) / (s + x)`` exactly and the limit is ``q``.
    """
    x1, x2, x3 = (float(v) for v in values)
    if mode == "log":
        xs = [bessel_ik(0.0, k).k_val for k in kappas]
        gs = (x1, x2, x3)
        # p + q x_i - s g_i = g_i x_i
        A = np.array([[1.0, xs[i], -gs[i]] for i in range(3)])
        rhs = np.array([gs[i] * xs[i] for i in range(3)])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            return x3
        return float(sol[1])
    d1, d2 = x2 - x1, x3 - x2
    den = d2 - d1
    scale = max(abs(x1), abs(x2), abs(x3), 1e-300)
    if abs(d2) < 1e-14 * scale or d1 * d2 <= 0 or abs(d2) >= abs(d1) or den == 0:
        return x3
    return x3 - d2 * d2 / den


def resolvent_limit(m: int, alpha: float, r: float, rp: float, kappas=KAPPA_LADDER) -> float:
    """``lim_{kappa -> 0} (T_m + kappa^2)^{-1}(r, r')`` by ladder extrapolation."""
    vals = [resolvent_kernel(m, alpha, k, r, rp) for k in kappas]
    return extrapolate_kappa(vals, kappas, _limit_mode("resolvent", m, alpha))


def dirichlet_limit(kind: str, r: float, rp: float, kappas=KAPPA_LADDER) -> float:
    vals = [dirichlet_resolvent(kind, k, r, rp) for k in kappas]
    return extrapolate_kappa(vals, kappas, _limit_mode(kind))


# -- Nystrom ----------------------------------------------------------------

def _vbar(v) -> AngularAverage:
    if isinstance(v, AngularAverage):
        return v
    if isinstance(v, PotentialModel):
        return AngularAverage(v)
    raise DomainError("expected an AngularAverage or PotentialModel")


def _effective_interval(spec: KernelSpec, vb: AngularAverage):
    lo, hi = spec.domain
    pot = vb.potential
    s_lo, s_hi = pot.support
    a = max(lo, s_lo, math.exp(-_LOG_SPAN))
    b = min(hi, s_hi, math.exp(_LOG_SPAN))
    if not math.isfinite(s_hi) or b == math.exp(_LOG_SPAN):
        # trim the far tail where r^2 Vbar is negligible
        t = np.linspace(math.log(a), math.log(b), 4001)
        lr = pot.log_r2v(t)
        alive = np.flatnonzero(lr > math.log(1e-18) + np.max(lr))
        if alive.size:
            b = math.exp(min(t[min(alive[-1] + 1, len(t) - 1)], math.log(b)))
    if not b > a:
        return None
    return a, b


def nystrom_rule(a: float, b: float, nodes: int, breaks=()):
    """Gauss-Legendre panels in ``log r`` (8 points each) on ``[a, b]``.

    Half of the panels are uniform in ``log r``, the other half uniform in
    ``r`` over the top decade, so both the origin and ``r ~ b`` are resolved.
    """
    n_pan = max(nodes // 8, 2)
    la, lb = math.log(a), math.log(b)
    n_log = max(n_pan // 2, 1)
    edges = list(np.linspace(la, lb, n_log + 1))
    top = max(a, b / 10.0)
    if top < b:
        edges += list(np.log(np.linspace(top, b, n_pan - n_log + 1)))
    edges += [math.log(x) for x in breaks if a < x < b]
    edges = np.unique(np.round(np.array(edges), 14))
    gx, gw = np.polynomial.legendre.leggauss(8)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    r = np.exp(t)
    return r, w * r


@dataclass
class BsOperator:
    kernel: KernelSpec
    v_bar: AngularAverage
    quad_nodes: np.ndarray
    quad_weights: np.ndarray
    matrix: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        if self.matrix.size == 0:
            return np.zeros(0)
        return np.linalg.eigvalsh(self.matrix)

    def count(self, lam: float) -> int:
        """Number of eigenvalues of ``lam * matrix`` that are ``>= 1``."""
        if lam <= 0:
            return 0
        return int(np.sum(lam * self.eigenvalues() >= 1.0))

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def build_bs_operator(spec: KernelSpec, v_bar, nodes: int = 256) -> BsOperator:
    """Dense symmetric ``sqrt(w Vbar) K sqrt(w Vbar)`` on a Nystrom rule."""
    if nodes < 16:
        raise DomainError("bs operators need at least 16 nodes")
    vb = _vbar(v_bar)
    iv = _effective_interval(spec, vb)
    if vb.potential.is_zero or iv is None:
        z = np.zeros(0)
        return BsOperator(spec, vb, z, z, np.zeros((0, 0)))
    r, w = nystrom_rule(*iv, nodes, vb.potential.breakpoints)
    s = np.sqrt(w * np.asarray(vb(r), dtype=float))
    K = kernel_eval(spec, r[:, None], r[None, :])
    M = s[:, None] * K * s[None, :]
    M = 0.5 * (M + M.T)
    return BsOperator(spec, vb, r, w, M)


def bs_count(spec: KernelSpec, v_bar, lam: float, nodes: int = 256) -> int:
    """Eigenvalues ``>= 1`` of ``lam * sqrt(Vbar) K sqrt(Vbar)`` (Nystrom)."""
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    if lam == 0:
        return 0
    return build_bs_operator(spec, v_bar, nodes).count(lam)


def _diag_pieces(spec: KernelSpec):
    """``K(r, r) / r = c0 + c1 |log r|`` per side, as ``{side: (c0, c1)}``."""
    c = 1.0 / (2 * spec.alpha) if spec.alpha else 0.0
    return {
        "log_interior": {"inner": (0.0, 1.0)},
        "log_exterior": {"outer": (0.0, 1.0)},
        "min_power": {"inner": (c, 0.0), "outer": (c, 0.0)},
        "t0_limit": {"inner": (c, 1.0), "outer": (c, 0.0)},
        "t_alpha_limit": {"inner": (c, 0.0), "outer": (c, 1.0)},
    }[spec.kind]


def bs_trace(spec: KernelSpec, v_bar) -> FunctionalValue:
    """``int Vbar(r) K(r, r) dr``; flagged divergent past the cap."""
    vb = _vbar(v_bar)
    pot = vb.potential
    if pot.is_zero:
        return FunctionalValue(0.0)
    if spec.kind == "resolvent":
        return _resolvent_trace(spec, pot)
    total, err, div = 0.0, 0.0, False
    for side, (c0, c1) in _diag_pieces(spec).items():
        for k, c in ((0.0, c0), (1.0, c1)):
            if c == 0.0:
                continue

            def log_core(t, k=k):
                with np.errstate(divide="ignore"):
                    extra = k * np.log(np.abs(t)) if k else 0.0
                return pot.log_r2v(t) + extra

            v, e, d = _side_integral(pot, log_core, k, side)
            total += c * v
            err += c * e
            div = div or d
    if div:
        total = max(total, DIVERGENCE_CAP)
    return FunctionalValue(total, err, div)


def _resolvent_trace(spec: KernelSpec, pot: PotentialModel) -> FunctionalValue:
    ta = math.log(1e-12 / spec.kappa) + 1e-9
    tb = math.log(1e4 / spec.kappa) - 1e-9

    def f(t):
        lr = float(pot.log_r2v(np.array([t]))[0])
        if lr == -math.inf:
            return 0.0
        r = math.exp(t)
        return math.exp(lr) * resolvent_kernel(spec.m, spec.alpha, spec.kappa, r, r) / r

    pts = sorted({math.log(x) for x in pot.breakpoints if x > 0} | {0.0})
    val, err = _quad(f, max(ta, -_LOG_SPAN), min(tb, _LOG_SPAN), pts)
    return FunctionalValue(val, err)


# -- positive definiteness --------------------------------------------------

@dataclass(frozen=True)
class PsdReport:
    kernel: dict
    sample_count: int
    seed: int
    min_eigenvalue: float
    max_diagonal: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def sample_points(spec: KernelSpec, n: int, seed: int = DEFAULT_SEED, span: float = 10.0) -> np.ndarray:
    """Stratified log-uniform samples on the kernel domain."""
    lo, hi = spec.domain
    la = math.log(lo) if lo > 0 else -span
    lb = math.log(hi) if math.isfinite(hi) else span
    rng = np.random.default_rng(seed)
    edges = np.linspace(la, lb, n + 1)
    t = edges[:-1] + (edges[1:] - edges[:-1]) * rng.random(n)
    r = np.exp(t)
    # keep samples strictly inside the closed-form domain
    return np.clip(r, max(lo, 1e-300), hi)


def check_positive_definite(spec: KernelSpec, v_bar, sample_count: int = 256,
                            seed: int = DEFAULT_SEED, points=None) -> PsdReport:
    """Smallest eigenvalue of the ``Vbar``-weighted Gram matrix at sampled points."""
    if points is None:
        if not 1 <= sample_count <= 512:
            raise DomainError("sample_count must lie in [1, 512]")
        r = sample_points(spec, sample_count, seed)
    else:
        r = np.asarray(points, dtype=float)
        sample_count = r.size
    vb = _vbar(v_bar)
    s = np.sqrt(np.asarray(vb(r), dtype=float))
    K = kernel_eval(spec, r[:, None], r[None, :])
    G = s[:, None] * K * s[None, :]
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    dmax = float(np.max(np.diag(G))) if G.size else 0.0
    lmin = float(ev[0]) if ev.size else 0.0
    return PsdReport(spec.to_dict(), int(sample_count), int(seed), lmin, dmax,
                     bool(lmin >= -1e-10 * dmax))

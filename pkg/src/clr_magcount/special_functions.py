"""Modified Bessel functions of real order and the Gamma function.

Values are carried as ``mantissa * exp(exponent)`` pairs so that the full
working range ``nu in [0, 50]``, ``z in [1e-12, 1e4]`` can be represented
without overflow (``I_50(1e-12)`` and ``I_0(1e4)`` are far outside double
range).  The public attributes of :class:`BesselPair` convert on demand.

Algorithm: Temme's series for ``K_mu, K_{mu+1}`` when ``z < 2`` and Steed's
continued fraction otherwise, with ``|mu| <= 1/2``; ``I_nu`` follows from the
continued fraction for ``I'_nu / I_nu`` and the Wronskian at order ``nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

NU_MAX = 50.0
Z_MIN = 1e-12
Z_MAX = 1e4

_EPS = 1e-16
_MAXIT = 200_000
_XMIN = 2.0
_BIG = 1e250
_LOG_BIG = math.log(_BIG)

# Taylor coefficients of 1/Gamma(x) = sum_k a_k x^k (k >= 1).
_RGAM = (
    1.0000000000000000,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
)

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function on ``(0, 100]`` (Lanczos, g=7)."""
    x = float(x)
    if not (x > 0.0) or x > 100.0 or math.isnan(x):
        raise DomainError(f"gamma_fn requires 0 < x <= 100, got {x!r}")
    if x < 0.5:
        return gamma_fn(x + 1.0) / x
    y = x - 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (y + i)
    t = y + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * math.exp((y + 0.5) * math.log(t) - t) * acc


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    # gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
    mu2 = mu * mu
    even = 0.0
    odd = 0.0
    for k in range(len(_RGAM) - 1, -1, -1):
        if k % 2 == 0:
            even = even * mu2 + _RGAM[k]
        else:
            odd = odd * mu2 + _RGAM[k]
    gam1 = -odd
    gam2 = even
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _signed_exp(mant: float, expo: float) -> float:
    if mant == 0.0:
        return 0.0
    lg = math.log(abs(mant)) + expo
    if lg > 709.78:
        return math.copysign(math.inf, mant)
    return math.copysign(math.exp(lg), mant)


@dataclass(frozen=True)
class BesselPair:
    """``I_nu(z)``, ``K_nu(z)`` and their derivatives.

    ``i_mant * exp(z + i_exp)`` is ``I_nu(z)`` and ``i_dmant * exp(z + i_exp)``
    is ``I'_nu(z)``; ``K`` uses ``exp(-z + k_exp)``.  Keeping the ``z`` part
    out of the stored exponent preserves full precision for large ``z``.
    """

    nu: float
    z: float
    i_mant: float
    i_dmant: float
    i_exp: float
    k_mant: float
    k_dmant: float
    k_exp: float

    @property
    def i_val(self) -> float:
        return _signed_exp(self.i_mant, self.z + self.i_exp)

    @property
    def k_val(self) -> float:
        return _signed_exp(self.k_mant, self.k_exp - self.z)

    @property
    def i_deriv(self) -> float:
        return _signed_exp(self.i_dmant, self.z + self.i_exp)

    @property
    def k_deriv(self) -> float:
        return _signed_exp(self.k_dmant, self.k_exp - self.z)

    @property
    def log_i(self) -> float:
        return math.log(self.i_mant) + self.i_exp + self.z

    @property
    def log_k(self) -> float:
        return math.log(self.k_mant) + self.k_exp - self.z

    @property
    def i_scaled(self) -> float:
        """``exp(-z) I_nu(z)``."""
        return _signed_exp(self.i_mant, self.i_exp)

    @property
    def k_scaled(self) -> float:
        """``exp(z) K_nu(z)``."""
        return _signed_exp(self.k_mant, self.k_exp)


def _check_args(nu: float, z: float) -> None:
    if math.isnan(nu) or math.isnan(z):
        raise DomainError("NaN argument")
    if nu < 0.0 or nu > NU_MAX:
        raise DomainError(f"order must lie in [0, {NU_MAX}], got {nu!r}")
    if z <= 0.0:
        raise DomainError(f"argument must be positive, got {z!r}")
    if z < Z_MIN * (1 - 1e-12) or z > Z_MAX * (1 + 1e-12):
        raise DomainError(f"argument must lie in [{Z_MIN}, {Z_MAX}], got {z!r}")


def bessel_ik(nu: float, z: float) -> BesselPair:
    """Evaluate ``I_nu, K_nu`` and derivatives at ``z``."""
    nu = float(nu)
    z = float(z)
    _check_args(nu, z)
    x = z
    nl = int(nu + 0.5)
    xmu = nu - nl
    xmu2 = xmu * xmu
    xi = 1.0 / x
    xi2 = 2.0 * xi

    # CF1: f = I'_nu / I_nu (modified Lentz)
    h = nu * xi
    if h < 1e-300:
        h = 1e-300
    b = xi2 * nu
    d = 0.0
    c = h
    for _ in range(_MAXIT):
        b += xi2
        d = 1.0 / (b + d)
        c = b + 1.0 / c
        delta = c * d
        h = delta * h
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError("CF1 failed to converge")

    if x < _XMIN:
        x2 = 0.5 * x
        pimu = math.pi * xmu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = xmu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(xmu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        s = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        cc = 1.0
        d = x2 * x2
        s1 = p
        for i in range(1, _MAXIT):
            ff = (i * ff + p + q) / (i * i - xmu2)
            cc *= d / i
            p /= i - xmu
            q /= i + xmu
            dl = cc * ff
            s += dl
            dl1 = cc * (p - i * ff)
            s1 += dl1
            if abs(dl) < abs(s) * _EPS:
                break
        else:
            raise ArithmeticError("Temme series failed to converge")
        rkmu = s
        rk1 = s1 * xi2
        k_exp = x
    else:
        bb = 2.0 * (1.0 + x)
        dd = 1.0 / bb
        hh = dd
        delh = dd
        q1 = 0.0
        q2 = 1.0
        a1 = 0.25 - xmu2
        q = a1
        cc = a1
        a = -a1
        s = 1.0 + q * delh
        for i in range(2, _MAXIT):
            a -= 2 * (i - 1)
            cc = -a * cc / i
            qnew = (q1 - bb * q2) / a
            q1 = q2
            q2 = qnew
            q += cc * qnew
            bb += 2.0
            dd = 1.0 / (bb + a * dd)
            delh = (bb * dd - 1.0) * delh
            hh += delh
            dels = q * delh
            s += dels
            if abs(dels / s) < _EPS:
                break
        else:
            raise ArithmeticError("Steed continued fraction failed to converge")
        hh = a1 * hh
        rkmu = math.sqrt(math.pi / (2.0 * x)) / s
        rk1 = rkmu * (xmu + x + 0.5 - hh) * xi
        k_exp = 0.0

    for i in range(1, nl + 1):
        rktemp = (xmu + i) * xi2 * rk1 + rkmu
        rkmu = rk1
        rk1 = rktemp
        if abs(rk1) > _BIG:
            rk1 /= _BIG
            rkmu /= _BIG
            k_exp += _LOG_BIG
    rk = rkmu
    rkp = nu * xi * rkmu - rk1

    # Wronskian at order nu itself; h and -K'/K are both >= 0 so no cancellation
    ri = xi / (h * rk - rkp)
    rip = h * ri
    i_exp = -k_exp

    # renormalise mantissas only when far from O(1)
    if not 1e-200 < ri < 1e200:
        sh = math.log(ri)
        ri, rip, i_exp = ri / math.exp(sh), rip / math.exp(sh), i_exp + sh
    if not 1e-200 < rk < 1e200:
        sh = math.log(rk)
        rk, rkp, k_exp = rk / math.exp(sh), rkp / math.exp(sh), k_exp + sh
    return BesselPair(nu, z, ri, rip, i_exp, rk, rkp, k_exp)


def log_ik(nu: float, z: float) -> tuple[float, float]:
    """``(log I_nu(z), log K_nu(z))``."""
    bp = bessel_ik(nu, z)
    return bp.log_i, bp.log_k


def wronskian_residual(nu: float, z: float) -> float:
    """Relative residual of ``I_nu K_{nu+1} + K_nu I_{nu+1} = 1/z``."""
    a = bessel_ik(nu, z)
    b = bessel_ik(nu + 1.0, z)
    # the exp(+-z) factors cancel in each product
    t1 = _signed_exp(a.i_mant * b.k_mant, a.i_exp + b.k_exp + math.log(z))
    t2 = _signed_exp(a.k_mant * b.i_mant, a.k_exp + b.i_exp + math.log(z))
    return abs(t1 + t2 - 1.0)

"""Counting oracle for negative eigenvalues of radial channel operators.

Each angular-momentum channel is reduced to a one-dimensional quadratic form
in ``t = log r``,

    q[u] = int A |u_t|^2 + C |u|^2 - lam Q |u|^2 dt,

discretised by piecewise-linear finite elements.  The number of negative
eigenvalues equals the inertia of the stiffness matrix (Sylvester), which is
read off an LDL^T recursion.

Labels: ``spin="minus"`` / ``"plus"`` use the ground-state label ``m``, for
which the zero-energy solution of ``H_-`` is ``e^{-h} r^m`` and that of
``H_+`` is ``e^{h} r^{-m}``; the same channel in direct form carries the
centrifugal term ``(phi - m)^2 / r^2``.  ``spin="schrodinger"`` uses
``(m + phi)^2 / r^2``.

Grid ends are closed with the exact zero-energy Dirichlet-to-Neumann (Robin)
coefficient of the potential-free exterior.  Potentials that reach beyond
every fixed log-radius (``V_sigma`` near 0, ``W_sigma`` near infinity) get an
extension zone in the doubly-logarithmic variable ``s = log|t|``, assembled in
direct form and glued to the ground-state core by an exact boundary term.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, FactorizationError, TruncationError
from .field_models import FieldModel, GroundStateData, build_ground_state
from .potential_models import AngularAverage, PotentialModel

SPINS = ("plus", "minus", "schrodinger")
BOUNDARIES = ("whole_line", "dirichlet_inner", "dirichlet_at_1_outer", "dirichlet_at_1_inner")
OPERATORS = ("pauli", "h_plus", "h_minus", "schrodinger")
PIVOT_TOL = 1e-12
M_CAP = 200

_QX, _QW = np.polynomial.legendre.leggauss(4)
_FIELD_CUT = 60.0
_ZONE_STOP_CRITICAL = 0.8
_ZONE_STOP_REGULAR = 0.05


@dataclass(frozen=True)
class RadialGrid:
    r_min: float = 1e-6
    r_max: float = 1e6
    N: int = 6000

    def __post_init__(self):
        if not (self.r_min > 0 and self.r_max > self.r_min):
            raise DomainError("grid needs 0 < r_min < r_max")
        if self.N < 8:
            raise DomainError("grid too coarse: at least 8 intervals required")

    @property
    def log_rho(self) -> float:
        return math.log(self.r_max / self.r_min) / self.N

    @property
    def rho(self) -> float:
        return math.exp(self.log_rho)

    @property
    def t_nodes(self) -> np.ndarray:
        t = np.linspace(math.log(self.r_min), math.log(self.r_max), self.N + 1)
        iu = self.unit_index()
        if iu is not None:
            t[iu] = 0.0
        return t

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(self.t_nodes)

    def unit_index(self):
        x = -math.log(self.r_min) / self.log_rho
        k = round(x)
        if abs(x - k) < 1e-9 and 0 <= k <= self.N:
            return int(k)
        return None

    def refined(self) -> "RadialGrid":
        return RadialGrid(self.r_min, self.r_max, 2 * self.N)


def _lse(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.log(np.sum(np.exp(x - m_safe), axis=axis)) + np.squeeze(m_safe, axis=axis)
    ms = np.squeeze(m, axis=axis)
    return np.where(np.isfinite(ms), out, ms)


def _log_pos(x):
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)


def _lae_at(arr, idx, vals):
    np.logaddexp.at(arr, idx, vals)


@dataclass
class ChannelOperator:
    """Normalised tridiagonal form of one channel.

    With node scales ``P`` the normalised stiffness at coupling ``lam`` is

        diag_i = kr[i-1] + kl[i] + z0[i] - lam * zq[i]
        off_i  = -kh[i] + c0[i] - lam * cq[i]

    where ``kl, kr, kh`` are the kinetic element entries (``kh^2 = kl kr``).
    """

    m: int
    spin: str
    representation: str
    boundary: str
    lam: float
    kl: np.ndarray
    kr: np.ndarray
    kh: np.ndarray
    c0: np.ndarray
    cq: np.ndarray
    z0: np.ndarray
    zq: np.ndarray
    log_scale: np.ndarray
    mass_diag: np.ndarray
    mass_off: np.ndarray
    node_t: np.ndarray
    gs: GroundStateData = field(repr=False)
    zones: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.z0)

    def weight(self, r):
        """Quadratic-form weight in ``r``: ``e^{-+2h} r^{1 +- 2m}`` or ``r``."""
        r = np.asarray(r, dtype=float)
        if self.representation == "direct" or self.spin == "schrodinger":
            return r
        return np.exp(self.gs.log_weight(np.log(r), self.m, self.spin)) * r

    def stiffness(self, lam=None):
        lam = self.lam if lam is None else lam
        n = self.size
        kr_full = np.concatenate([[0.0], self.kr])
        kl_full = np.concatenate([self.kl, [0.0]])
        diag = kr_full + kl_full + self.z0 - lam * self.zq
        off = -self.kh + self.c0 - lam * self.cq
        return diag[:n], off

    def mass(self):
        return self.mass_diag, self.mass_off

    def count(self, lams=None, return_near_zero=False):
        lams = np.atleast_1d(np.asarray(self.lam if lams is None else lams, dtype=float))
        neg, nz = _sturm_count(self, lams)
        if return_near_zero:
            return neg, nz
        return neg


# ---------------------------------------------------------------------------
# coefficients


def _spin_sign(spin):
    return {"plus": 1.0, "minus": -1.0, "schrodinger": 0.0}[spin]


def _direct_k(m, spin):
    return m if spin == "schrodinger" else -m


def _field_terms(gs: GroundStateData, t):
    """``phi(t)`` and ``B r^2`` with the far-field limits imposed."""
    t = np.asarray(t, dtype=float)
    phi = np.where(t < -_FIELD_CUT, 0.0, np.where(t > _FIELD_CUT, gs.alpha, 0.0))
    core = np.abs(t) <= _FIELD_CUT
    if np.any(core):
        tc = t[core]
        phi = phi.copy()
        phi[core] = gs.phi_t(tc)
    br2 = np.zeros_like(t)
    if np.any(core):
        tc = t[core]
        br2[core] = gs.field.B(np.exp(tc)) * np.exp(2 * tc)
    return phi, br2


def _direct_C(gs, t, m, spin):
    phi, br2 = _field_terms(gs, t)
    k = _direct_k(m, spin)
    sb = _spin_sign(spin) * br2
    cp = (k + phi) ** 2 + np.maximum(sb, 0.0)
    cm = np.maximum(-sb, 0.0)
    return _log_pos(cp), _log_pos(cm)


def _g_slope(gs, t, m, spin):
    phi = gs.phi_t(np.array([t]))[0]
    return (2 * m - 2 * phi) if spin == "minus" else (2 * phi - 2 * m)


def _gs_robin_log(gs: GroundStateData, m, spin, t_e, side):
    """``log`` of ``1 / int_ext e^{-g}``; ``-inf`` (Neumann) when the integral diverges."""
    a = gs.alpha
    if side == "inner":
        decays = (m < 0) if spin == "minus" else (m > 0)
    else:
        decays = (m > a and not _eq(m, a)) if spin == "minus" else (m < a and not _eq(m, a))
    if not decays:
        return -math.inf
    g_e = float(gs.log_weight(np.array([t_e]), m, spin)[0])
    sgn = -1.0 if side == "inner" else 1.0

    def f(tau):
        tt = t_e + sgn * tau
        return math.exp(-(float(gs.log_weight(np.array([tt]), m, spin)[0]) - g_e))

    val, _ = integrate.quad(f, 0.0, np.inf, limit=200, epsrel=1e-10)
    return -(-g_e + math.log(val))


def _eq(a, b):
    return abs(a - b) <= 1e-9


# ---------------------------------------------------------------------------
# extension zones


def _zone_nodes(pot: PotentialModel, side, t_edge, dt_edge, cval, lam_max):
    """``s`` nodes (excluding the junction) for an extension zone, or ``None``."""
    if lam_max <= 0 or not pot.has_zone(side) or pot.is_zero:
        return None
    s0 = math.log(abs(t_edge))
    llam = math.log(lam_max)
    c2 = cval * cval

    def ratio(s):
        w = math.exp(llam + float(pot.log_r2v_s(np.array([s]), side)[0]) + 2 * s)
        return w / (0.25 + c2 * math.exp(min(2 * s, 700.0))), w

    stop = _ZONE_STOP_CRITICAL if c2 == 0 else _ZONE_STOP_REGULAR
    if ratio(s0)[0] <= stop:
        return None
    out = []
    s = s0
    ds = dt_edge / abs(t_edge)
    while True:
        rr, w = ratio(s)
        if rr <= stop:
            break
        cent = c2 * math.exp(min(2 * s, 700.0))
        kloc = math.sqrt(abs(w - 0.25 - cent) + 0.25)
        ds = min(ds * 1.05, 0.25 / kloc, 0.5)
        s += ds
        out.append(s)
        if len(out) > 5_000_000:
            raise DomainError("extension zone too long; lower the coupling range")
    return np.array(out)


# ---------------------------------------------------------------------------
# assembly


def build_channel(
    field_model,
    m: int,
    spin: str,
    grid: RadialGrid,
    v_bar,
    lam: float = 0.0,
    boundary: str = "whole_line",
    representation: str = "ground_state",
    lam_zone: float | None = None,
) -> ChannelOperator:
    """Assemble the channel ``(spin, m)`` of ``H_+``, ``H_-`` or the Schrodinger operator.

    ``lam_zone`` sizes the extension zones (defaults to ``lam``); counts may
    then be taken at any coupling up to it.
    """
    if spin not in SPINS:
        raise DomainError(f"unknown spin {spin!r}")
    if boundary not in BOUNDARIES:
        raise DomainError(f"unknown boundary {boundary!r}")
    if lam < 0:
        raise DomainError("coupling must be nonnegative")
    if representation not in ("ground_state", "direct"):
        raise DomainError(f"unknown representation {representation!r}")
    m = int(m)
    gs = field_model if isinstance(field_model, GroundStateData) else build_ground_state(field_model)
    pot = v_bar.potential if isinstance(v_bar, AngularAverage) else v_bar
    gsrep = representation == "ground_state" and spin != "schrodinger"
    rep = "ground_state" if gsrep else "direct"
    lam_zone = max(lam, lam_zone or 0.0)

    tc = grid.t_nodes
    n_core = len(tc)
    dt = grid.log_rho
    k = _direct_k(m, spin)
    phi_in, phi_out = 0.0, gs.alpha

    zin = None
    zout = None
    if boundary in ("whole_line", "dirichlet_inner", "dirichlet_at_1_inner"):
        zin = _zone_nodes(pot, "inner", tc[0], dt, abs(k + phi_in), lam_zone)
    if boundary in ("whole_line", "dirichlet_inner", "dirichlet_at_1_outer"):
        zout = _zone_nodes(pot, "outer", tc[-1], dt, abs(k + phi_out), lam_zone)

    # node list: inner zone (descending s), core, outer zone (ascending s)
    kinds = []
    xs = []
    if zin is not None:
        xs.append(zin[::-1])
        kinds.append(np.full(len(zin), 1))
    xs.append(tc)
    kinds.append(np.zeros(n_core, dtype=int))
    if zout is not None:
        xs.append(zout)
        kinds.append(np.full(len(zout), 2))
    node_x = np.concatenate(xs)
    node_kind = np.concatenate(kinds)
    n_in = 0 if zin is None else len(zin)
    j_in = n_in
    j_out = n_in + n_core - 1
    node_t = node_x.copy()
    with np.errstate(over="ignore"):
        node_t[node_kind == 1] = -np.exp(node_x[node_kind == 1])
        node_t[node_kind == 2] = np.exp(node_x[node_kind == 2])
    n = len(node_x)

    # element table in each element's own coordinate
    el_kind = np.maximum(node_kind[:-1], node_kind[1:])
    xl = node_x[:-1].copy()
    xr = node_x[1:].copy()
    if zin is not None:
        xr[j_in - 1] = math.log(-tc[0])
    if zout is not None:
        xl[j_out] = math.log(tc[-1])

    # sub-intervals (split core elements at potential breakpoints)
    sub_el = list(range(n - 1))
    sub_a = list(xl)
    sub_b = list(xr)
    for rb in pot.breakpoints:
        tb = math.log(rb)
        if not (tc[0] < tb < tc[-1]):
            continue
        e = j_in + int(np.searchsorted(tc, tb) - 1)
        if min(abs(tb - xl[e]), abs(tb - xr[e])) < 1e-12:
            continue
        sub_b[e] = tb
        sub_el.append(e)
        sub_a.append(tb)
        sub_b.append(xr[e])
    sub_el = np.asarray(sub_el)
    sub_a = np.asarray(sub_a, dtype=float)
    sub_b = np.asarray(sub_b, dtype=float)
    half = 0.5 * (sub_b - sub_a)
    xq = 0.5 * (sub_a + sub_b)[:, None] + half[:, None] * _QX[None, :]
    lw = np.log(np.abs(half))[:, None] + np.log(_QW)[None, :]
    ek = el_kind[sub_el][:, None] * np.ones_like(xq, dtype=int)
    with np.errstate(over="ignore"):
        tq = np.where(ek == 0, xq, np.where(ek == 1, -np.exp(xq), np.exp(xq)))
    logJ = np.where(ek == 0, 0.0, xq)
    dx = (xr - xl)[sub_el][:, None]
    xi = (xq - xl[sub_el][:, None]) / dx
    lxi = np.log(xi)
    l1xi = np.log1p(-xi)

    # coefficient logs at quadrature points
    core_q = ek == 0
    log_r2v = np.full_like(xq, -np.inf)
    if pot.is_zero or lam_zone < 0:
        pass
    else:
        if np.any(core_q):
            log_r2v[core_q] = pot.log_r2v(tq[core_q])
        for kk, side in ((1, "inner"), (2, "outer")):
            sel = ek == kk
            if np.any(sel):
                log_r2v[sel] = pot.log_r2v_s(xq[sel], side)
    logA = np.zeros_like(xq)
    logCp = np.full_like(xq, -np.inf)
    logCm = np.full_like(xq, -np.inf)
    with np.errstate(over="ignore", invalid="ignore"):
        logM = np.where(np.isfinite(tq), 2 * tq, -np.inf)
    direct_q = np.ones_like(core_q) if not gsrep else ~core_q
    if gsrep and np.any(core_q):
        g = gs.log_weight(tq[core_q], m, spin)
        logA[core_q] = g
        logM[core_q] = g + 2 * tq[core_q]
    if np.any(direct_q):
        cp, cm = _direct_C(gs, tq[direct_q], m, spin)
        logCp[direct_q] = cp
        logCm[direct_q] = cm
    logQ = np.where(core_q, logA + log_r2v, log_r2v) if gsrep else log_r2v

    ne = n - 1

    def elem_lse(vals):
        out = np.full(ne, -np.inf)
        _lae_at(out, sub_el, _lse(vals, axis=1))
        return out

    lk = elem_lse(logA - logJ + lw) - 2 * np.log(np.abs(xr - xl))

    def mass_type(lc):
        base = lc + logJ + lw
        return elem_lse(base + 2 * l1xi), elem_lse(base + lxi + l1xi), elem_lse(base + 2 * lxi)

    cp00, cp01, cp11 = mass_type(logCp)
    cm00, cm01, cm11 = mass_type(logCm)
    q00, q01, q11 = mass_type(logQ)
    m00, m01, m11 = mass_type(logM)

    # variable scaling on zone elements touching a ground-state junction
    ga = np.zeros(ne)
    gb = np.zeros(ne)
    g_in = g_out = None
    if gsrep and zin is not None:
        g_in = float(gs.log_weight(np.array([tc[0]]), m, spin)[0])
        gb[j_in - 1] = 0.5 * g_in
    if gsrep and zout is not None:
        g_out = float(gs.log_weight(np.array([tc[-1]]), m, spin)[0])
        ga[j_out] = 0.5 * g_out

    def scl(a00, a01, a11):
        return a00 + 2 * ga, a01 + ga + gb, a11 + 2 * gb

    lk00, lk01, lk11 = scl(lk, lk, lk)
    cp00, cp01, cp11 = scl(cp00, cp01, cp11)
    cm00, cm01, cm11 = scl(cm00, cm01, cm11)
    q00, q01, q11 = scl(q00, q01, q11)
    m00, m01, m11 = scl(m00, m01, m11)

    left = np.arange(ne)
    right = left + 1
    diag_kin = np.full(n, -np.inf)
    _lae_at(diag_kin, left, lk00)
    _lae_at(diag_kin, right, lk11)
    diag_p = np.full(n, -np.inf)
    _lae_at(diag_p, left, cp00)
    _lae_at(diag_p, right, cp11)
    diag_n = np.full(n, -np.inf)
    _lae_at(diag_n, left, cm00)
    _lae_at(diag_n, right, cm11)
    diag_q = np.full(n, -np.inf)
    _lae_at(diag_q, left, q00)
    _lae_at(diag_q, right, q11)
    diag_m = np.full(n, -np.inf)
    _lae_at(diag_m, left, m00)
    _lae_at(diag_m, right, m11)

    # end conditions
    def add_term(i, logval, sign):
        if not np.isfinite(logval):
            return
        if sign > 0:
            diag_p[i] = np.logaddexp(diag_p[i], logval)
        else:
            diag_n[i] = np.logaddexp(diag_n[i], logval)

    zones = {}
    # inner end
    if zin is not None:
        add_term(0, math.log(abs(k + phi_in)) if k + phi_in != 0 else -math.inf, 1)
        zones["inner"] = (float(zin[0]), float(zin[-1]), len(zin))
        if gsrep:
            slope = _g_slope(gs, tc[0], m, spin)
            corr = -0.5 * slope
            if corr != 0:
                add_term(j_in, math.log(abs(corr)) + g_in, np.sign(corr))
    elif boundary != "dirichlet_at_1_outer":
        if gsrep:
            add_term(0, _gs_robin_log(gs, m, spin, tc[0], "inner"), 1)
        else:
            ph = float(_field_terms(gs, tc[:1])[0][0])
            if k + ph != 0:
                add_term(0, math.log(abs(k + ph)), 1)
    # outer end
    if zout is not None:
        add_term(n - 1, math.log(abs(k + phi_out)) if not _eq(k + phi_out, 0) else -math.inf, 1)
        zones["outer"] = (float(zout[0]), float(zout[-1]), len(zout))
        if gsrep:
            slope = _g_slope(gs, tc[-1], m, spin)
            corr = 0.5 * slope
            if corr != 0:
                add_term(j_out, math.log(abs(corr)) + g_out, np.sign(corr))
    elif boundary != "dirichlet_at_1_inner":
        if gsrep:
            add_term(n - 1, _gs_robin_log(gs, m, spin, tc[-1], "outer"), 1)
        else:
            ph = float(_field_terms(gs, tc[-1:])[0][0])
            if not _eq(k + ph, 0):
                add_term(n - 1, math.log(abs(k + ph)), 1)

    P = np.logaddexp(diag_kin, diag_p)
    with np.errstate(invalid="ignore", over="ignore"):
        kl = np.exp(lk00 - P[left])
        kr = np.exp(lk11 - P[right])
        kh = np.exp(lk01 - 0.5 * (P[left] + P[right]))
        c0 = np.exp(cp01 - 0.5 * (P[left] + P[right])) - np.exp(cm01 - 0.5 * (P[left] + P[right]))
        cq = np.exp(q01 - 0.5 * (P[left] + P[right]))
        zp = np.exp(diag_p - P)
        zn = np.exp(diag_n - P)
        zq = np.exp(diag_q - P)
        md = np.exp(diag_m - P)
        mo = np.exp(m01 - 0.5 * (P[left] + P[right]))
    z0 = zp - zn

    keep = np.isfinite(P)
    # interior Dirichlet conditions at r = 1
    if boundary != "whole_line":
        iu = grid.unit_index()
        if iu is None:
            raise DomainError("Dirichlet condition at r = 1 requires a grid node at r = 1")
        ju = j_in + iu
        keep[ju] = False
        if boundary == "dirichlet_at_1_inner":
            keep[ju:] = False
        elif boundary == "dirichlet_at_1_outer":
            keep[: ju + 1] = False

    arrays = _restrict(keep, kl, kr, kh, c0, cq, z0, zq, md, mo)
    if arrays is None:
        raise DomainError("no degrees of freedom left after boundary conditions")
    kl, kr, kh, c0, cq, z0, zq, md, mo = arrays
    for arr in (kl, kr, kh, c0, cq, z0, zq):
        if not np.all(np.isfinite(arr)):
            raise FactorizationError("non-finite entry in channel assembly")
    return ChannelOperator(
        m=m, spin=spin, representation=rep, boundary=boundary, lam=float(lam),
        kl=kl, kr=kr, kh=kh, c0=c0, cq=cq, z0=z0, zq=zq, log_scale=P[keep],
        mass_diag=md, mass_off=mo, node_t=node_t[keep], gs=gs, zones=zones,
    )


def _restrict(keep, kl, kr, kh, c0, cq, z0, zq, md, mo):
    """Row/column deletion of dropped nodes; severed element halves stay on the diagonal."""
    if np.all(keep):
        return kl, kr, kh, c0, cq, z0, zq, md, mo
    n = len(keep)
    z0 = z0.copy()
    # a kept node whose neighbour is deleted keeps that element's diagonal share
    lost_right = keep[:-1] & ~keep[1:]
    lost_left = ~keep[:-1] & keep[1:]
    z0[:-1][lost_right] += kl[lost_right]
    z0[1:][lost_left] += kr[lost_left]
    idx = np.flatnonzero(keep)
    if len(idx) == 0:
        return None
    # element between consecutive kept nodes exists only if they were adjacent
    adj = np.diff(idx) == 1
    el = idx[:-1]

    def pick(a):
        return np.where(adj, a[el], 0.0) if len(el) else np.zeros(0)

    return (pick(kl), pick(kr), pick(kh), pick(c0), pick(cq), z0[idx], zq[idx],
            md[idx], pick(mo))


# ---------------------------------------------------------------------------
# inertia


def _sturm_count(op: ChannelOperator, lams: np.ndarray):
    if len(lams) <= 4:
        res = [_count_scalar(op, float(l)) for l in lams]
        return np.array([r[0] for r in res]), np.array([r[1] for r in res])
    return _count_vector(op, lams)


def _count_scalar(op, lam):
    kl = op.kl.tolist()
    kr = op.kr.tolist()
    kh = op.kh.tolist()
    c0 = op.c0.tolist()
    cq = op.cq.tolist()
    z0 = op.z0.tolist()
    zq = op.zq.tolist()
    n = len(z0)
    tol = PIVOT_TOL
    neg = 0
    nz = 0
    e = z0[0] - lam * zq[0]
    d = (kl[0] if n > 1 else 0.0) + e
    sc = 1.0 + lam * zq[0]
    if d < -tol * sc:
        neg += 1
    elif d <= tol * sc:
        nz += 1
        d = tol * sc
        e = d - (kl[0] if n > 1 else 0.0)
    for i in range(1, n):
        c = c0[i - 1] - lam * cq[i - 1]
        khi = kh[i - 1]
        e = z0[i] - lam * zq[i] + (kr[i - 1] * e + 2.0 * khi * c - c * c) / d
        kli = kl[i] if i < n - 1 else 0.0
        d = kli + e
        sc = 1.0 + lam * zq[i]
        if d < -tol * sc:
            neg += 1
        elif d <= tol * sc:
            nz += 1
            d = tol * sc
            e = d - kli
    return neg, nz


def _count_vector(op, lams):
    n = op.size
    tol = PIVOT_TOL
    neg = np.zeros(len(lams), dtype=int)
    nz = np.zeros(len(lams), dtype=int)
    kl = np.concatenate([op.kl, [0.0]])
    e = op.z0[0] - lams * op.zq[0]
    d = kl[0] + e
    for i in range(n):
        if i > 0:
            c = op.c0[i - 1] - lams * op.cq[i - 1]
            e = op.z0[i] - lams * op.zq[i] + (op.kr[i - 1] * e + 2.0 * op.kh[i - 1] * c - c * c) / d
            d = kl[i] + e
        sc = 1.0 + lams * op.zq[i]
        isneg = d < -tol * sc
        small = ~isneg & (d <= tol * sc)
        neg += isneg
        nz += small
        if np.any(small):
            d = np.where(small, tol * sc, d)
            e = np.where(small, d - kl[i], e)
    return neg, nz


class ComparisonWeights(GroundStateData):
    """Ground-state data with ``h`` replaced by ``alpha log(1 + r)``.

    Passed to :func:`build_channel` in place of the exact data it assembles
    the comparison-weight form; counts then bracket the exact ones as
    ``N_cmp(lam / M^2) <= N(lam) <= N_cmp(lam M^2)`` with ``M = M_minus`` or
    ``M_plus``.
    """

    def __init__(self, gs: GroundStateData):
        self.__dict__.update(gs.__dict__)
        self.exact = gs
        self.h0 = 0.0

    def eta(self, t):
        return self.alpha * np.log1p(np.exp(-np.asarray(t, dtype=float)))

    def zeta(self, t):
        return self.alpha * np.log1p(np.exp(np.asarray(t, dtype=float)))

    def phi_t(self, t):
        t = np.asarray(t, dtype=float)
        return self.alpha * 0.5 * (1.0 + np.tanh(0.5 * t))


def comparison_weights(field_model) -> ComparisonWeights:
    gs = field_model if isinstance(field_model, GroundStateData) else build_ground_state(field_model)
    return ComparisonWeights(gs)


def from_tridiagonal(diag, off) -> ChannelOperator:
    """Wrap a plain symmetric tridiagonal matrix (test harness operators)."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    P = np.maximum(np.abs(diag), 1e-300)
    sq = np.sqrt(P[:-1] * P[1:])
    z = np.zeros(len(off))
    return ChannelOperator(
        m=0, spin="schrodinger", representation="direct", boundary="whole_line", lam=0.0,
        kl=z, kr=z, kh=z, c0=off / sq, cq=z, z0=diag / P, zq=np.zeros(len(diag)),
        log_scale=np.log(P), mass_diag=np.ones(len(diag)), mass_off=z,
        node_t=np.arange(len(diag), dtype=float), gs=None,
    )


def count_negative(op: ChannelOperator, lam=None) -> int:
    """Number of negative eigenvalues of the pencil (stiffness, mass)."""
    return int(op.count(lam)[0])


# ---------------------------------------------------------------------------
# totals


@dataclass
class CountReport:
    total: int
    per_channel: list
    m_max_used: int
    truncation_certified: bool
    grid_delta: int | None
    lam: float
    operator: str = "pauli"
    near_zero: int = 0

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "operator": self.operator,
            "total": self.total,
            "m_max_used": self.m_max_used,
            "truncation_certified": self.truncation_certified,
            "grid_delta": self.grid_delta,
            "near_zero": self.near_zero,
            "per_channel": [
                {"spin": s, "m": m, "count": c} for (s, m, c) in self.per_channel
            ],
        }


def _operator_spins(operator):
    if operator not in OPERATORS:
        raise DomainError(f"unknown operator {operator!r}")
    return {"pauli": ("minus", "plus"), "h_plus": ("plus",), "h_minus": ("minus",),
            "schrodinger": ("schrodinger",)}[operator]


def _cert_points(grid: RadialGrid, pot: PotentialModel):
    tc = grid.t_nodes
    mid = 0.5 * (tc[:-1] + tc[1:])
    pts = [tc, mid]
    for rb in pot.breakpoints:
        tb = math.log(rb)
        pts.append(np.array([tb - 1e-9, tb + 1e-9]))
    return np.sort(np.concatenate(pts))


def channel_certified(gs, pot, m, spin, lam, grid, t_pts=None) -> bool:
    """Pointwise test ``(phi -+ m)^2 + s B r^2 >= lam r^2 Vbar`` on the grid and zones."""
    if lam == 0 or pot.is_zero:
        return True
    t = _cert_points(grid, pot) if t_pts is None else t_pts
    phi, br2 = _field_terms(gs, t)
    k = _direct_k(m, spin)
    lhs = (k + phi) ** 2 + _spin_sign(spin) * br2
    with np.errstate(over="ignore"):
        rhs = lam * np.exp(pot.log_r2v(t))
    if np.any(lhs < rhs):
        return False
    for side, lim in (("inner", 0.0), ("outer", gs.alpha)):
        if pot.has_zone(side):
            c2 = (k + lim) ** 2
            s = math.log(abs(t[0] if side == "inner" else t[-1])) + np.geomspace(1e-6, 1e3, 200)
            w = lam * np.exp(pot.log_r2v_s(s, side) + 2 * s)
            if np.any(c2 * np.exp(np.minimum(2 * s, 700.0)) < w):
                return False
    return True


def _channel_set(gs, pot, spin, lam, grid):
    a = gs.alpha
    if spin == "schrodinger":
        lo, hi = -math.ceil(a - 1e-12), 0
    else:
        lo, hi = 0, math.ceil(a - 1e-12)
    chans = list(range(lo, hi + 1))
    tp = _cert_points(grid, pot)
    for direction, start in ((1, hi + 1), (-1, lo - 1)):
        run = 0
        mm = start
        while run < 2:
            if abs(mm) > M_CAP:
                raise TruncationError(
                    f"channel truncation not certifiable within |m| <= {M_CAP} "
                    f"(spin {spin}, lambda {lam})"
                )
            if channel_certified(gs, pot, mm, spin, lam, grid, tp):
                run += 1
            else:
                run = 0
                chans.append(mm)
            mm += direction
    return sorted(set(chans))


def _threads(threads):
    if threads is None:
        env = os.environ.get("CLR_MAGCOUNT_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def sweep_lambda(
    field_model,
    V,
    operator: str,
    lambdas,
    grid: RadialGrid | None = None,
    refine: bool = False,
    threads: int | None = None,
    representation: str = "ground_state",
    boundary: str = "whole_line",
) -> list:
    """Counts at every coupling in ``lambdas`` from one assembly per channel."""
    lambdas = [float(x) for x in lambdas]
    if any(x < 0 or math.isnan(x) for x in lambdas):
        raise DomainError("couplings must be nonnegative")
    grid = grid or RadialGrid()
    gs = field_model if isinstance(field_model, GroundStateData) else build_ground_state(field_model)
    pot = V.potential if isinstance(V, AngularAverage) else V
    if not lambdas:
        return []
    reports = _sweep_core(gs, pot, operator, lambdas, grid, threads, representation, boundary)
    if refine:
        fine = _sweep_core(gs, pot, operator, lambdas, grid.refined(), threads,
                           representation, boundary)
        for r, f in zip(reports, fine):
            r.grid_delta = f.total - r.total
    return reports


def _sweep_core(gs, pot, operator, lambdas, grid, threads, representation, boundary):
    lam_max = max(lambdas)
    spins = _operator_spins(operator)
    jobs = []
    for spin in spins:
        chans = _channel_set(gs, pot, spin, lam_max, grid)
        jobs.extend((spin, mm) for mm in chans)
    lam_arr = np.asarray(lambdas)

    def run(job):
        spin, mm = job
        op = build_channel(gs, mm, spin, grid, pot, 0.0, boundary=boundary,
                           representation=representation, lam_zone=lam_max)
        return op.count(lam_arr, return_near_zero=True)

    nthreads = _threads(threads)
    if nthreads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    m_max = max((abs(mm) for _, mm in jobs), default=0)
    reports = []
    for li, lam in enumerate(lambdas):
        per = []
        nz = 0
        for (spin, mm), (neg, near) in zip(jobs, results):
            per.append((spin, mm, int(neg[li])))
            nz += int(near[li])
        per.sort(key=lambda x: (x[0], x[1]))
        total = sum(c for _, _, c in per)
        reports.append(CountReport(total, per, m_max, True, None, lam, operator, nz))
    return reports


def count_total(
    field_model,
    V,
    lam: float,
    operator: str = "pauli",
    grid: RadialGrid | None = None,
    refine: bool = False,
    threads: int | None = None,
    representation: str = "ground_state",
    boundary: str = "whole_line",
) -> CountReport:
    """Full counting function summed over certified angular-momentum channels."""
    if lam < 0:
        raise DomainError("coupling must be nonnegative")
    return sweep_lambda(field_model, V, operator, [lam], grid, refine, threads,
                        representation, boundary)[0]

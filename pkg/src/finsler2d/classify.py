"""Sampling, named residual checks and the classification report.

Every check evaluates one or more residual terms at a point.  A term is a
pair ``(raw, scale)``: ``raw`` is the absolute residual and ``scale`` the
magnitude of the largest quantity entering it.  The point residual is the
largest raw value and the normalized residual is the largest
``raw / max(1, scale)``.  Verdicts compare the normalized maximum over all
points against the threshold.

Identity checks must pass on every admissible input; classification checks
answer a yes/no question about the metric and are informational unless an
expectation is attached to them.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import __version__
from . import jet as J
from .conformal import ConformalSpec, PointConformal, flatness_residuals, metrizing_relation
from .errors import (
    Finsler2DError,
    NegativeRho,
    PreconditionNotMet,
    SamplingError,
)
from .fields import FunctionField
from .geometry import I2, PointGeometry, Surface
from .jet import Jet, dx, dy, monomials

DEFAULT_THRESHOLD = 1e-7
ATTEMPT_FACTOR = 1000
WORKERS_ENV = "FINSLER2D_WORKERS"
SCHEMA = "finsler2d.report/1"


class NotApplicable(PreconditionNotMet):
    """The check's hypothesis does not hold at this point."""


# -- sampling ------------------------------------------------------------------


@dataclass(frozen=True)
class SamplePlan:
    box: tuple
    count: int = 50
    seed: int = 0
    domain: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if len(self.box) != 4 or any(lo > hi for lo, hi in self.box):
            raise SamplingError(f"box must be four intervals lo <= hi, got {self.box}")
        if self.count < 1:
            raise SamplingError("count must be positive")

    def with_(self, **changes) -> "SamplePlan":
        data = {"box": self.box, "count": self.count, "seed": self.seed, "domain": self.domain}
        data.update({k: v for k, v in changes.items() if v is not None})
        return SamplePlan(**data)

    def points(self) -> list:
        """Rejection-sample ``count`` points inside the box and the domain."""
        rng = np.random.default_rng(self.seed)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        out = []
        budget = ATTEMPT_FACTOR * self.count
        for _ in range(budget):
            p = tuple(float(v) for v in lo + (hi - lo) * rng.random(4))
            if p[2] == 0.0 and p[3] == 0.0:
                continue
            if self.domain is not None and not self.domain(p):
                continue
            out.append(p)
            if len(out) == self.count:
                return out
        raise SamplingError(
            f"only {len(out)} of {self.count} points found in {budget} attempts; "
            "the box may miss the domain")


# -- per-point context ---------------------------------------------------------


def _probe_a(x1, x2, y1, y2):
    r = J.sqrt(y1 * y1 + y2 * y2)
    return (y1 + (0.3 + 0.2 * x1) * y2) / r + 0.1 * J.sin(x2) * y1 * y2 / (r * r)


def _probe_b(x1, x2, y1, y2):
    return J.cos(0.5 * x1 - x2 + y2 / J.sqrt(y1 * y1 + 3.0 * y2 * y2))


PROBES = (FunctionField(_probe_a, "probe_a"), FunctionField(_probe_b, "probe_b"))


class PointContext:
    """Lazily evaluated geometry at one point, shared by all checks."""

    def __init__(self, surface: Surface, spec: Optional[ConformalSpec], barred: Optional[Surface],
                 point):
        self.surface = surface
        self.spec = spec
        self.barred_surface = barred
        self.point = tuple(point)

    @cached_property
    def geo(self) -> PointGeometry:
        return self.surface.at(self.point, track=False)

    @cached_property
    def pc(self) -> PointConformal:
        if self.spec is None:
            raise NotApplicable("no conformal factor")
        return PointConformal(self.geo, self.spec.phi(self.geo.base, self.geo.F.degree))

    @cached_property
    def bar(self) -> PointGeometry:
        if self.barred_surface is None:
            raise NotApplicable("no conformal factor")
        return self.barred_surface.at(self.point, track=False)

    @cached_property
    def probes(self):
        return [p(self.geo.base, self.geo.F.degree) for p in PROBES]

    @cached_property
    def riemannian(self) -> bool:
        return abs(self.geo.I.value) < DEFAULT_THRESHOLD

    @cached_property
    def berwald_base(self) -> bool:
        g = self.geo
        return max(abs(g.I_h1.value), abs(g.I_h2.value)) < DEFAULT_THRESHOLD


# -- residual helpers ----------------------------------------------------------


def _flat(obj):
    if isinstance(obj, Jet):
        yield obj.value
    elif isinstance(obj, (list, tuple)):
        for o in obj:
            yield from _flat(o)
    else:
        yield float(obj)


def cmp(a, b):
    """Term comparing two (nested) quantities."""
    va, vb = list(_flat(a)), list(_flat(b))
    raw = max(abs(x - y) for x, y in zip(va, vb))
    scale = max(max(abs(x) for x in va), max(abs(y) for y in vb))
    return raw, scale


def zero(*terms):
    """Term for ``sum(terms) = 0``."""
    vals = [t.value if isinstance(t, Jet) else float(t) for t in terms]
    return abs(sum(vals)), max(abs(v) for v in vals)


def small(obj):
    """Term asserting that a (nested) quantity vanishes."""
    v = max(abs(x) for x in _flat(obj))
    return v, v


# -- checks --------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    id: str
    kind: str  # "identity" or "class"
    anchor: str
    fn: Callable
    conformal: bool = False


CHECKS: dict[str, Check] = {}


def _check(id, kind, anchor, conformal=False):
    def wrap(fn):
        CHECKS[id] = Check(id, kind, anchor, fn, conformal)
        return fn
    return wrap


@_check("frame.orthonormal", "identity",
        "l^i l_i = 1, l^i m_i = l_i m^i = 0, m^i m_i = eps, g = l l + eps m m, det g = eps h^2")
def _frame_orthonormal(c):
    g = c.geo
    e = g.eps
    lh, ll, mh, ml = g.ell_hi, g.ell_lo, g.m_hi, g.m_lo
    terms = [
        zero(lh[0] * ll[0], lh[1] * ll[1], -1.0),
        zero(lh[0] * ml[0], lh[1] * ml[1]),
        zero(ll[0] * mh[0], ll[1] * mh[1]),
        zero(mh[0] * ml[0], mh[1] * ml[1], -e),
        zero(g.gdet, -e * g.h * g.h),
    ]
    for i in I2:
        for j in I2:
            terms.append(zero(g.g[i][j], -ll[i] * ll[j], -e * ml[i] * ml[j]))
    return terms


@_check("frame.derivatives", "identity",
        "F dot_j l_i = eps m_i m_j, F dot_j l^i = eps m^i m_j, "
        "F dot_j m_i = -(l_i - eps I m_i) m_j, F dot_j m^i = -(l^i + eps I m^i) m_j")
def _frame_derivatives(c):
    g = c.geo
    e, F, I = g.eps, g.F, g.I
    terms = []
    for i in I2:
        for j in I2:
            mj = g.m_lo[j]
            terms.append(cmp(F * dy(g.ell_lo[i], j + 1), e * g.m_lo[i] * mj))
            terms.append(cmp(F * dy(g.ell_hi[i], j + 1), e * g.m_hi[i] * mj))
            terms.append(cmp(F * dy(g.m_lo[i], j + 1), -(g.ell_lo[i] - e * I * g.m_lo[i]) * mj))
            terms.append(cmp(F * dy(g.m_hi[i], j + 1), -(g.ell_hi[i] + e * I * g.m_hi[i]) * mj))
    return terms


@_check("spray.forms", "identity",
        "2G^i = y^r d_r F l^i + F^2 (dot_2 d_1 F - dot_1 d_2 F)/h m^i vs variational spray")
def _spray_forms(c):
    g = c.geo
    return [cmp(g.spray_classical, g.spray_frame)]


@_check("spray.properties", "identity",
        "G^i_j y^j = 2G^i, delta_i F = 0, B^i_jkr symmetric, B^i_jkr l^j = 0")
def _spray_properties(c):
    g = c.geo
    y = g.y
    terms = [zero(g.Gj[i][0] * y[0], g.Gj[i][1] * y[1], -2.0 * g.G[i]) for i in I2]
    terms += [small(d) for d in g.delta(g.F)]
    B = g.B_direct
    for i in I2:
        terms.append(cmp(B[i][0][1][0], B[i][1][0][0]))
        terms.append(cmp(B[i][0][0][1], B[i][1][0][0]))
        terms.append(cmp(B[i][0][1][1], B[i][1][1][0]))
        for k in I2:
            for r in I2:
                terms.append(zero(B[i][0][k][r] * g.ell_hi[0], B[i][1][k][r] * g.ell_hi[1]))
    return terms


@_check("curvature.berwald-formula", "identity",
        "F B^i_jkr = (-2 I,1 l^i + I_2 m^i) m_j m_k m_r vs dot_r G^i_jk")
def _berwald_formula(c):
    g = c.geo
    return [cmp(g.B, g.B_direct)]


@_check("curvature.t-tensor", "identity",
        "F T_ijkh = I;2 m_i m_j m_k m_h vs Cartan-derivative definition")
def _t_tensor(c):
    g = c.geo
    return [cmp(g.T, g.T_cartan)]


@_check("commutation.horizontal", "identity", "f,1,2 - f,2,1 = -R f;2")
def _comm_hh(c):
    g = c.geo
    R = g.R
    out = []
    for f in c.probes:
        out.append(zero(g.hd2(g.hd1(f)), -g.hd1(g.hd2(f)), R * g.vd2(f).value))
    return out


@_check("commutation.mixed-1", "identity", "f,1;2 - f;2,1 = f,2")
def _comm_hv1(c):
    g = c.geo
    return [zero(g.vd2(g.hd1(f)), -g.hd1(g.vd2(f)), -g.hd2(f)) for f in c.probes]


@_check("commutation.mixed-2", "identity", "f,2;2 - f;2,2 = -eps (f,1 + I f,2 + I,1 f;2)")
def _comm_hv2(c):
    g = c.geo
    e = g.eps
    out = []
    for f in c.probes:
        out.append(zero(g.vd2(g.hd2(f)), -g.hd2(g.vd2(f)), e * g.hd1(f), e * g.I * g.hd2(f),
                        e * g.I_h1 * g.vd2(f)))
    return out


@_check("curvature.probe-agreement", "identity", "R from independent probes agrees")
def _probe_agreement(c):
    g = c.geo
    vals = [g.gauss_curvature((p,)) for p in PROBES]
    return [cmp(vals[0], vals[1])]


@_check("identity.pq-relation", "identity", "2 eps phi;2 Q + 2 P = F^2 phi,1", conformal=True)
def _pq_relation(c):
    pc = c.pc
    return [zero(2.0 * pc.eps * pc.phi_v2 * pc.Q, 2.0 * pc.P, -c.geo.L * pc.phi_h1)]


@_check("identity.pq-derivative", "identity",
        "phi;2 P + P;2 + eps phi;2 Q;2 - (I phi;2 + 1) Q - F^2 phi,2 = 0", conformal=True)
def _pq_derivative(c):
    pc = c.pc
    g = c.geo
    v2 = pc.phi_v2
    P, P2 = pc.P_v[0], pc.P_v[1]
    Q, Q2 = pc.Q_v[0], pc.Q_v[1]
    return [zero(v2 * P, P2, pc.eps * v2 * Q2, -(g.I * v2 + 1.0) * Q, -g.L * pc.phi_h2)]


@_check("identity.horizontal-constancy", "identity",
        "F^2 l^k d_k phi = F^2 phi,1 + 2 G^k phi;2 m_k; F m^k d_k phi = eps F phi,2 + G^i_k phi;2 m^k m_i; "
        "l^k d_k F^2 = 4 G^k l_k; m^k d_k F^2 = 2 F G^i_k l_i m^k", conformal=True)
def _horizontal_constancy(c):
    g, pc = c.geo, c.pc
    e, F, L = g.eps, g.F, g.L
    phi, v2 = pc.phi, pc.phi_v2
    lh, ll, mh, ml = g.ell_hi, g.ell_lo, g.m_hi, g.m_lo
    dphi = [dx(phi, k + 1) for k in I2]
    dL = [dx(L, k + 1) for k in I2]
    Gm = g.G[0] * ml[0] + g.G[1] * ml[1]
    Gl = g.G[0] * ll[0] + g.G[1] * ll[1]
    Gjmm = sum((g.Gj[i][k] * mh[k] * ml[i] for i in I2 for k in I2), start=0.0 * F)
    Gjlm = sum((g.Gj[i][k] * ll[i] * mh[k] for i in I2 for k in I2), start=0.0 * F)
    return [
        zero(L * (lh[0] * dphi[0] + lh[1] * dphi[1]), -L * pc.phi_h1, -2.0 * Gm * v2),
        zero(F * (mh[0] * dphi[0] + mh[1] * dphi[1]), -e * F * pc.phi_h2, -Gjmm * v2),
        zero(lh[0] * dL[0] + lh[1] * dL[1], -4.0 * Gl),
        zero(mh[0] * dL[0] + mh[1] * dL[1], -2.0 * F * Gjlm),
    ]


@_check("dual.main-scalar", "identity",
        "Ibar via sigma;2 vs Ibar via (ln rho);2", conformal=True)
def _dual_main_scalar(c):
    pc = c.pc
    return [cmp(pc.I_bar_cubic, pc.I_bar_log)]


@_check("dual.landsberg-scalar", "identity",
        "Jbar via rho-derivatives vs via sigma vs F Jbar = F^2 Ibar,1 - 2 eps Q Ibar;2", conformal=True)
def _dual_landsberg(c):
    pc = c.pc
    return [cmp(pc.J_log, pc.J_cubic), cmp(pc.J_general, pc.J_log)]


@_check("barred.operators", "identity",
        "(Ibar;b, Ibar,a, Ibar,b) from barred operators vs from rho-derivative route; f;a = f;1",
        conformal=True)
def _barred_operators(c):
    pc = c.pc
    ops = (pc.I_bar_vb, pc.I_bar_ha, pc.I_bar_hb)
    terms = [cmp(a, b) for a, b in zip(ops, pc.I_bar_derivs_rho)]
    terms += [cmp(pc.vda(f), c.geo.vd1(f)) for f in c.probes]
    return terms


@_check("barred.curvature-reconciliation", "identity",
        "Ibar,a;b + Ibar,b = eps e^-phi rho (I_2 + chi); Ibar,a from psi, chi", conformal=True)
def _barred_reconcile(c):
    pc = c.pc
    return [cmp(pc.I_bar_d, pc.I_bar_d_curvature), cmp(pc.I_bar_ha, pc.I_bar_ha_curvature)]


@_check("barred.frame", "identity",
        "lbar^i lbar_i = 1, mbar^i mbar_i = eps, lbar^i mbar_i = 0, Dbar antisymmetric",
        conformal=True)
def _barred_frame(c):
    pc = c.pc
    e = pc.eps
    lh, ll, mh, ml = pc.ell_hi, pc.ell_lo, pc.m_hi, pc.m_lo
    D = pc.D
    return [
        zero(lh[0] * ll[0], lh[1] * ll[1], -1.0),
        zero(mh[0] * ml[0], mh[1] * ml[1], -e),
        zero(lh[0] * ml[0], lh[1] * ml[1]),
        zero(ll[0] * mh[0], ll[1] * mh[1]),
        zero(D[0][1], D[1][0]),
        small([D[0][0], D[1][1]]),
    ]


ORACLE_OBJECTS = ("ell_lo", "ell_hi", "m_lo", "m_hi", "I", "G", "Gj", "Gjk", "B", "J", "T", "D",
                  "derivs")


def oracle_terms(pc: PointConformal, bar: PointGeometry, probes=()) -> dict:
    """Transformed objects against the fresh ``Fbar`` geometry, by name.

    Objects whose formula needs ``sqrt(eps rho)`` are omitted when
    ``eps rho <= 0``.
    """
    pairs = {
        "ell_lo": lambda: (pc.ell_lo, bar.ell_lo),
        "ell_hi": lambda: (pc.ell_hi, bar.ell_hi),
        "m_lo": lambda: (pc.m_lo, bar.m_lo),
        "m_hi": lambda: (pc.m_hi, bar.m_hi),
        "I": lambda: (pc.I_bar, bar.I),
        "G": lambda: (pc.G, bar.G),
        "Gj": lambda: (pc.Gj, bar.Gj),
        "Gjk": lambda: (pc.Gjk, bar.Gjk),
        "B": lambda: (pc.B, bar.B_direct),
        "J": lambda: (pc.J, bar.J),
        "T": lambda: (pc.T, bar.T_cartan),
        "D": lambda: (pc.D, bar.D),
        "derivs": lambda: ([pc.barred_derivs(f) for f in probes],
                           [bar.derivs(f) for f in probes]),
    }
    out = {}
    for name, fn in pairs.items():
        try:
            a, b = fn()
        except NegativeRho:
            continue
        out[name] = cmp(a, b)
    return out


@_check("oracle.equivalence", "identity",
        "transformation formulas vs geometry of exp(phi) F computed afresh", conformal=True)
def _oracle(c):
    terms = oracle_terms(c.pc, c.bar, c.probes)
    if not terms:
        raise NotApplicable("eps*rho <= 0 for every square-root formula")
    return list(terms.values())


def _phi_is_isotropic(pc: PointConformal) -> bool:
    phi = pc.phi
    coeffs = phi.coeffs
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    for idx, exps in enumerate(monomials(phi.degree)):
        if (exps[2] or exps[3]) and abs(coeffs[idx]) > 1e-14 * scale:
            return False
    return True


@_check("isotropic.reduction", "identity",
        "phi = phi(x): phi;2 = sigma = 0, rho = eps, Ibar = I, Q = -F^2 phi,2/2, P = F^2 phi,1/2, "
        "Ibar,a = e^-phi (I,1 + eps phi,2 I;2)", conformal=True)
def _isotropic(c):
    pc = c.pc
    if not _phi_is_isotropic(pc):
        raise NotApplicable("phi depends on y")
    g = c.geo
    e = pc.eps
    return [
        small(pc.phi_v2),
        small(pc.sigma),
        zero(pc.rho, -e),
        cmp(pc.I_bar, g.I),
        zero(pc.Q, 0.5 * g.L * pc.phi_h2),
        zero(pc.P, -0.5 * g.L * pc.phi_h1),
        cmp(pc.I_bar_ha, pc.e_mphi * (g.I_h1 + e * pc.phi_h2 * g.I_v2)),
    ]


def _berwald_bar_terms(c):
    pc = c.pc
    if c.riemannian:
        t1, t2 = pc.berwald_residuals()
        return [zero(*t1), zero(*t2)]
    return [small(pc.B)]


def _require_berwald_bar(c):
    if not c.riemannian:
        raise NotApplicable("base metric is not Riemannian")
    res = _berwald_bar_terms(c)
    if max(raw / max(1.0, s) for raw, s in res) >= DEFAULT_THRESHOLD:
        raise NotApplicable("exp(phi) F is not Berwald here")


@_check("metrizability.tensor", "identity",
        "F Riemannian, Fbar Berwald: dot_r M^i_jk = 0 and "
        "F^2 delta_i(e^2phi) = y^k M^j_ik dot_j Fbar^2", conformal=True)
def _metrizability_tensor(c):
    _require_berwald_bar(c)
    pc = c.pc
    dM = [dy(pc.M[i][j][k], r + 1) for i in I2 for j in I2 for k in I2 for r in I2]
    return [small(dM)] + [small(t) for t in metrizing_relation(pc)]


# classification ------------------------------------------------------------


@_check("class.riemannian", "class", "I = 0")
def _c_riemannian(c):
    return [small(c.geo.I)]


@_check("class.landsberg", "class", "I,1 = 0")
def _c_landsberg(c):
    return [small(c.geo.I_h1)]


@_check("class.berwald", "class", "I,1 = I,2 = 0")
def _c_berwald(c):
    return [small([c.geo.I_h1, c.geo.I_h2])]


@_check("class.t-condition", "class", "I;2 = 0")
def _c_t(c):
    return [small(c.geo.I_v2)]


@_check("class.douglas", "class", "6 I,1 + eps I_2;2 + 2 I I_2 = 0")
def _c_douglas(c):
    g = c.geo
    return [zero(6.0 * g.I_h1, g.eps * g.vd2(g.I_2), 2.0 * g.I * g.I_2)]


@_check("class.phi-horizontally-constant", "class", "delta_i phi = 0", conformal=True)
def _c_phi_hconst(c):
    return [small(c.geo.delta(c.pc.phi))]


@_check("class.spray-preserved", "class", "Gbar^i = G^i", conformal=True)
def _c_spray(c):
    return [cmp(c.pc.G, c.geo.G)]


@_check("class.berwald-bar", "class",
        "F Riemannian: -3 eps Q - 3 Q;2;2 + eps P;2 + P;2;2;2 = 3P + 3 eps P;2;2 + eps Q;2 + Q;2;2;2 = 0; "
        "otherwise Bbar = 0", conformal=True)
def _c_berwald_bar(c):
    return _berwald_bar_terms(c)


@_check("class.landsberg-bar", "class", "F Jbar = F^2 Ibar,1 - 2 eps Q Ibar;2 = 0", conformal=True)
def _c_landsberg_bar(c):
    pc = c.pc
    L = c.geo.L
    return [zero(L * c.geo.hd1(pc.I_bar), -2.0 * pc.eps * pc.Q * c.geo.vd2(pc.I_bar))]


@_check("class.t-condition-bar", "class", "Ibar;2 = 0", conformal=True)
def _c_t_bar(c):
    return [small(c.pc.I_bar_F_derivs[0])]


@_check("class.douglas-preserved", "class", "Q = 0", conformal=True)
def _c_douglas_preserved(c):
    return [small(c.pc.Q)]


@_check("class.douglas-bar", "class", "F Berwald: 3 psi = eps chi;2 + I chi", conformal=True)
def _c_douglas_bar(c):
    if not c.berwald_base:
        raise NotApplicable("base metric is not Berwald")
    pc = c.pc
    g = c.geo
    return [zero(3.0 * pc.psi, -pc.eps * g.vd2(pc.chi), -g.I * pc.chi)]


@_check("class.douglas-bar-riemannian", "class",
        "F Riemannian: 9 eps Q + 10 Q;2;2 + eps Q;2;2;2;2 = 0", conformal=True)
def _c_douglas_bar_riem(c):
    if not c.riemannian:
        raise NotApplicable("base metric is not Riemannian")
    return [zero(*c.pc.douglas_riemannian_terms())]


@_check("class.flat", "class",
        "F d_j phi + d_j F = 0, P = -y^r d_r F / 2, Q = -F^2 (dot_2 d_1 F - dot_1 d_2 F)/(2h)",
        conformal=True)
def _c_flat(c):
    pc = c.pc
    g = c.geo
    F, phi = g.F, pc.phi
    y = g.y
    radial = y[0] * dx(F, 1) + y[1] * dx(F, 2)
    twist = dy(dx(F, 1), 2) - dy(dx(F, 2), 1)
    terms = [zero(F * dx(phi, j + 1), dx(F, j + 1)) for j in I2]
    terms.append(zero(pc.P, 0.5 * radial))
    terms.append(zero(pc.Q, 0.5 * g.L * twist / g.h))
    return terms


@_check("class.flat-necessary", "class", "F^2 phi,1 + 2 phi;2 G^k m_k + 2 G^k l_k = 0",
        conformal=True)
def _c_flat_necessary(c):
    v = flatness_residuals(c.pc)["necessary"]
    return [(v, v)]


@_check("class.metrizable", "class",
        "F Riemannian, Fbar Berwald: metrizable iff phi,1 = phi,2 = 0", conformal=True)
def _c_metrizable(c):
    _require_berwald_bar(c)
    return [small([c.pc.phi_h1, c.pc.phi_h2])]


SUITES = {
    "identities": [k for k, v in CHECKS.items() if v.kind == "identity"],
    "classification": [k for k, v in CHECKS.items() if v.kind == "class"],
}
SUITES["full"] = SUITES["identities"] + SUITES["classification"]
SUITES["base"] = [k for k in SUITES["full"] if not CHECKS[k].conformal]


def resolve_suite(names) -> list:
    """Expand suite names and check ids into an ordered list of check ids."""
    if isinstance(names, str):
        names = [names]
    out = []
    for n in names:
        ids = SUITES.get(n, [n])
        for i in ids:
            if i not in CHECKS:
                raise SamplingError(f"unknown check or suite {n!r}; suites: {', '.join(SUITES)}")
            if i not in out:
                out.append(i)
    return out


# -- evaluation ----------------------------------------------------------------


def evaluate_point(surface, spec, barred, point, check_ids):
    """Run checks at one point.

    Returns ``(epsilon or None, point error or None, {id: result})`` where a
    result is ``("ok", raw, normalized)`` or ``("na" | "error", type, message)``.
    """
    ctx = PointContext(surface, spec, barred, point)
    try:
        eps = ctx.geo.eps
        if spec is not None:
            ctx.pc  # admissibility is checked before any barred computation
    except Finsler2DError as exc:
        return None, (type(exc).__name__, str(exc)), {}
    results = {}
    for cid in check_ids:
        check = CHECKS[cid]
        if check.conformal and spec is None:
            results[cid] = ("na", "NotApplicable", "no conformal factor")
            continue
        try:
            terms = check.fn(ctx)
        except (NotApplicable, NegativeRho) as exc:
            results[cid] = ("na", type(exc).__name__, str(exc))
            continue
        except Finsler2DError as exc:
            results[cid] = ("error", type(exc).__name__, str(exc))
            continue
        raw = max(t[0] for t in terms)
        norm = max(t[0] / max(1.0, t[1]) for t in terms)
        results[cid] = ("ok", float(raw), float(norm))
    return eps, None, results


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def _eval_star(args):
    return evaluate_point(*args)


@dataclass
class CheckResult:
    id: str
    kind: str
    anchor: str
    threshold: float
    raw: list
    normalized: list
    skipped: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def applicable(self) -> int:
        return sum(v is not None for v in self.normalized)

    @property
    def max(self) -> Optional[float]:
        vals = [v for v in self.normalized if v is not None]
        return max(vals) if vals else None

    @property
    def max_raw(self) -> Optional[float]:
        vals = [v for v in self.raw if v is not None]
        return max(vals) if vals else None

    @property
    def mean(self) -> Optional[float]:
        vals = [v for v in self.normalized if v is not None]
        return sum(vals) / len(vals) if vals else None

    @property
    def holds(self) -> Optional[bool]:
        """``max < threshold``; ``None`` when no point was applicable."""
        m = self.max
        if m is None:
            return None
        return m < self.threshold and not self.errors

    @property
    def status(self) -> str:
        h = self.holds
        if self.errors:
            return "error"
        if h is None:
            return "n/a"
        if self.kind == "identity":
            return "pass" if h else "fail"
        return "true" if h else "false"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "anchor": self.anchor,
            "status": self.status,
            "threshold": self.threshold,
            "max": self.max,
            "max_raw": self.max_raw,
            "mean": self.mean,
            "applicable": self.applicable,
            "residuals": self.normalized,
            "raw": self.raw,
            "skipped": self.skipped,
            "errors": self.errors,
        }


@dataclass
class ClassificationReport:
    metadata: dict
    points: list
    point_errors: list
    checks: list
    expectations: list = field(default_factory=list)

    def check(self, cid: str) -> CheckResult:
        for c in self.checks:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def verdicts(self) -> dict:
        return {c.id: c.holds for c in self.checks}

    @property
    def ok(self) -> bool:
        if any(c.kind == "identity" and c.status in ("fail", "error") for c in self.checks):
            return False
        return all(e["ok"] for e in self.expectations)

    def expect(self, expected: dict):
        """Attach expected verdicts (``True``/``False``) by check id."""
        out = []
        for cid, want in expected.items():
            try:
                got = self.check(cid).holds
            except KeyError:
                got = None
            out.append({"id": cid, "expected": want, "actual": got, "ok": got is want})
        self.expectations = out
        return self

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "metadata": self.metadata,
            "points": [list(p) for p in self.points],
            "point_errors": self.point_errors,
            "checks": [c.to_dict() for c in self.checks],
            "expectations": self.expectations,
            "ok": self.ok,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def run_suite(surface: Surface, conformal: Optional[ConformalSpec], plan: SamplePlan,
              suite=("full",), threshold: float = DEFAULT_THRESHOLD,
              workers: Optional[int] = None, points=None) -> ClassificationReport:
    """Evaluate the selected checks at every sampled point and aggregate."""
    check_ids = resolve_suite(suite)
    if points is None:
        points = plan.points()
    points = [tuple(float(v) for v in p) for p in points]
    barred = conformal.barred_surface() if conformal is not None else None
    args = [(surface, conformal, barred, p, check_ids) for p in points]
    n = _worker_count(workers)
    if n > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            outs = list(pool.map(_eval_star, args, chunksize=max(1, len(points) // (4 * n))))
    else:
        outs = [evaluate_point(*a) for a in args]

    point_errors = []
    signature = None
    viable = []
    for idx, (eps, err, res) in enumerate(outs):
        if err is None and signature is not None and eps != signature:
            err = ("SignatureFlip", f"signature {eps:+d} differs from {signature:+d} at earlier points")
        if err is not None:
            point_errors.append({"index": idx, "point": list(points[idx]), "type": err[0],
                                 "message": err[1]})
            continue
        signature = eps if signature is None else signature
        viable.append((idx, res))
    if not viable:
        raise SamplingError("no sampled point could be evaluated: "
                            + "; ".join(f"{e['type']}: {e['message']}" for e in point_errors[:3]))

    checks = []
    for cid in check_ids:
        ch = CHECKS[cid]
        cr = CheckResult(cid, ch.kind, ch.anchor, threshold, [None] * len(points),
                         [None] * len(points))
        for idx, res in viable:
            r = res[cid]
            if r[0] == "ok":
                cr.raw[idx], cr.normalized[idx] = r[1], r[2]
            elif r[0] == "na":
                cr.skipped.append({"index": idx, "reason": r[2]})
            else:
                cr.errors.append({"index": idx, "type": r[1], "message": r[2]})
        checks.append(cr)

    phi_name = getattr(conformal.phi, "source", conformal.name) if conformal is not None else None
    metadata = {
        "metric": surface.name,
        "F": getattr(surface.F, "source", surface.F.name),
        "phi": phi_name,
        "degree": surface.degree,
        "seed": plan.seed,
        "count": len(points),
        "box": [list(b) for b in plan.box],
        "threshold": threshold,
        "epsilon": signature,
        "suite": list(suite) if not isinstance(suite, str) else [suite],
        "version": __version__,
    }
    return ClassificationReport(metadata, points, point_errors, checks)


def merge_max(a: Optional[float], b: Optional[float]) -> Optional[float]:
    """Associative merge used when combining partial aggregates."""
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


__all__ = ["CHECKS", "SUITES", "Check", "CheckResult", "ClassificationReport", "NotApplicable",
           "SamplePlan", "evaluate_point", "oracle_terms", "resolve_suite", "run_suite"]

"""Intrinsic geometry of a conic pseudo-Finsler surface ``(M, F)``.

Everything is computed from one Taylor jet of ``F`` about the sample point.
Derived scalars are again jets of lower degree, so the scalar-derivative
operators compose freely (``I;2;2``, ``phi,1;2`` ...) until the degree budget
runs out.

Index conventions: Python index 0 is coordinate index 1.  Tensors are nested
lists of jets, e.g. ``Gjk[i][j][k]`` is ``G^i_{jk}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

from . import jet as J
from .errors import (
    DegenerateMetric,
    OutsideCone,
    ProbeDegenerate,
    ProbeDisagreement,
    SignatureFlip,
    SprayMismatch,
)
from .fields import FunctionField, ScalarField
from .jet import Jet, dx, dy

DEFAULT_DEGREE = 8
DEGENERACY_TOL = 1e-12
SPRAY_TOL = 1e-8
PROBE_TOL = 1e-8

I2 = (0, 1)


def probe_y1(x1, x2, y1, y2):
    return y1 / J.sqrt(y1 * y1 + y2 * y2)


def probe_y2(x1, x2, y1, y2):
    return y2 / J.sqrt(y1 * y1 + y2 * y2)


DEFAULT_PROBES = (FunctionField(probe_y1, "y1/|y|"), FunctionField(probe_y2, "y2/|y|"))


class Surface:
    """A conic pseudo-Finsler surface: metric field, cone predicate, signature.

    ``epsilon`` is fixed on first evaluation and every later point must agree;
    crossing a signature wall raises :class:`SignatureFlip`.
    """

    def __init__(self, F: ScalarField, domain: Optional[Callable] = None,
                 name: str = "F", degree: int = DEFAULT_DEGREE):
        self.F = F
        self.domain = domain
        self.name = name
        self.degree = degree
        self.epsilon: Optional[int] = None

    def contains(self, point) -> bool:
        x1, x2, y1, y2 = point
        if y1 == 0.0 and y2 == 0.0:
            return False
        return True if self.domain is None else bool(self.domain(point))

    def at(self, point, degree: Optional[int] = None, track: bool = True) -> "PointGeometry":
        """Geometry about ``point``.

        With ``track=False`` the signature is not compared against earlier
        points; the sampler uses this and checks constancy itself.
        """
        point = tuple(float(v) for v in point)
        if not self.contains(point):
            raise OutsideCone(f"point {point} is outside the domain of {self.name}")
        geo = PointGeometry(self.F(point, degree or self.degree))
        eps = geo.eps
        if not track:
            return geo
        if self.epsilon is None:
            self.epsilon = eps
        elif eps != self.epsilon:
            raise SignatureFlip(
                f"signature {eps:+d} at {point} differs from {self.epsilon:+d} seen earlier")
        return geo

    def with_metric(self, F: ScalarField, name: str) -> "Surface":
        return Surface(F, self.domain, name, self.degree)


class PointGeometry:
    """All frame, spray and curvature jets of ``F`` about one point."""

    def __init__(self, Fjet: Jet):
        self.Fj = Fjet
        self.base = Fjet.base
        if Fjet.value <= 0.0:
            raise OutsideCone(f"F = {Fjet.value} is not positive at {self.base}")
        self.coords = J.coordinates(self.base, Fjet.degree)

    # -- metric and frame ------------------------------------------------

    @property
    def F(self) -> Jet:
        return self.Fj

    @cached_property
    def L(self) -> Jet:
        return self.Fj * self.Fj

    @cached_property
    def y(self):
        return self.coords[2], self.coords[3]

    @cached_property
    def ell_lo(self):
        return [dy(self.Fj, i + 1) for i in I2]

    @cached_property
    def ell_hi(self):
        return [yi / self.Fj for yi in self.y]

    @cached_property
    def g(self):
        dL = [dy(self.L, i + 1) for i in I2]
        return [[0.5 * dy(dL[i], j + 1) for j in I2] for i in I2]

    @cached_property
    def gdet(self) -> Jet:
        g = self.g
        return g[0][0] * g[1][1] - g[0][1] * g[1][0]

    @cached_property
    def eps(self) -> int:
        v = self.gdet.value
        if abs(v) <= DEGENERACY_TOL * max(1.0, self.L.value ** 2):
            raise DegenerateMetric(f"det g = {v:.3e} at {self.base}")
        return 1 if v > 0 else -1

    @cached_property
    def h(self) -> Jet:
        """``sqrt(eps * det g)``, equal to ``l_1 m_2 - l_2 m_1``."""
        return J.sqrt(self.eps * self.gdet)

    @cached_property
    def m_hi(self):
        l1, l2 = self.ell_lo
        s = self.eps / self.h
        return [-l2 * s, l1 * s]

    @cached_property
    def m_lo(self):
        u1, u2 = self.ell_hi
        return [-u2 * self.h, u1 * self.h]

    @cached_property
    def ginv(self):
        g, det = self.g, self.gdet
        inv = 1.0 / det
        return [[g[1][1] * inv, -g[0][1] * inv], [-g[1][0] * inv, g[0][0] * inv]]

    # -- Cartan tensor and main scalar ------------------------------------

    @cached_property
    def C(self):
        g = self.g
        return [[[0.5 * dy(g[i][j], k + 1) for k in I2] for j in I2] for i in I2]

    @cached_property
    def I(self) -> Jet:
        m = self.m_hi
        C = self.C
        acc = None
        for i in I2:
            for j in I2:
                for k in I2:
                    term = C[i][j][k] * m[i] * m[j] * m[k]
                    acc = term if acc is None else acc + term
        return self.eps * self.Fj * acc

    # -- spray and connections -------------------------------------------

    @cached_property
    def spray_classical(self):
        """``G^i = 1/4 g^{il} (y^k d_k dot_l L - d_l L)``."""
        L, y = self.L, self.y
        dyL = [dy(L, l + 1) for l in I2]
        rhs = []
        for l in I2:
            mixed = y[0] * dx(dyL[l], 1) + y[1] * dx(dyL[l], 2)
            rhs.append(mixed - dx(L, l + 1))
        gi = self.ginv
        return [0.25 * (gi[i][0] * rhs[0] + gi[i][1] * rhs[1]) for i in I2]

    @cached_property
    def spray_frame(self):
        """``2G^i = y^r d_r F l^i + F^2 (dot_2 d_1 F - dot_1 d_2 F)/h m^i``."""
        F, y = self.Fj, self.y
        radial = y[0] * dx(F, 1) + y[1] * dx(F, 2)
        twist = dy(dx(F, 1), 2) - dy(dx(F, 2), 1)
        normal = self.L * twist / self.h
        return [0.5 * (radial * self.ell_hi[i] + normal * self.m_hi[i]) for i in I2]

    @cached_property
    def spray_mismatch(self) -> float:
        a, b = self.spray_classical, self.spray_frame
        scale = max(1.0, *(abs(v.value) for v in a))
        return max(abs(a[i].value - b[i].value) for i in I2) / scale

    @cached_property
    def G(self):
        if self.spray_mismatch > SPRAY_TOL:
            raise SprayMismatch(
                f"spray forms disagree by {self.spray_mismatch:.3e} at {self.base}")
        return self.spray_frame

    @cached_property
    def Gj(self):
        """Barthel connection ``Gj[i][j] = dot_j G^i``."""
        return [[dy(self.G[i], j + 1) for j in I2] for i in I2]

    @cached_property
    def Gjk(self):
        """Berwald connection ``Gjk[i][j][k] = dot_k G^i_j``."""
        return [[[dy(self.Gj[i][j], k + 1) for k in I2] for j in I2] for i in I2]

    @cached_property
    def B_direct(self):
        """Berwald curvature by differentiating the connection."""
        return [[[[dy(self.Gjk[i][j][k], r + 1) for r in I2] for k in I2] for j in I2]
                for i in I2]

    @cached_property
    def B(self):
        """Berwald curvature from ``F B = (-2 I,1 l + I_2 m) m m m``."""
        coef_l = -2.0 * self.I_h1
        coef_m = self.I_2
        m = self.m_lo
        out = []
        for i in I2:
            vec = (coef_l * self.ell_hi[i] + coef_m * self.m_hi[i]) / self.Fj
            out.append([[[vec * m[j] * m[k] * m[r] for r in I2] for k in I2] for j in I2])
        return out

    @cached_property
    def D(self):
        """``D^{ij} = G^i y^j - G^j y^i``."""
        G, y = self.G, self.y
        return [[G[i] * y[j] - G[j] * y[i] for j in I2] for i in I2]

    # -- scalar derivatives ----------------------------------------------

    def vd1(self, f: Jet) -> Jet:
        """``f;1 = y^i dot_i f``."""
        y = self.y
        return y[0] * dy(f, 1) + y[1] * dy(f, 2)

    def vd2(self, f: Jet) -> Jet:
        """``f;2 = eps F (dot_i f) m^i``."""
        m = self.m_hi
        return self.eps * self.Fj * (dy(f, 1) * m[0] + dy(f, 2) * m[1])

    def delta(self, f: Jet):
        """Horizontal derivatives ``delta_i f = d_i f - G^j_i dot_j f``."""
        Gj = self.Gj
        fy = (dy(f, 1), dy(f, 2))
        return [dx(f, i + 1) - Gj[0][i] * fy[0] - Gj[1][i] * fy[1] for i in I2]

    def hd1(self, f: Jet) -> Jet:
        d = self.delta(f)
        u = self.ell_hi
        return d[0] * u[0] + d[1] * u[1]

    def hd2(self, f: Jet) -> Jet:
        d = self.delta(f)
        m = self.m_hi
        return self.eps * (d[0] * m[0] + d[1] * m[1])

    def derivs(self, f: Jet):
        """``(f;1, f;2, f,1, f,2)``."""
        return self.vd1(f), self.vd2(f), self.hd1(f), self.hd2(f)

    # -- main-scalar derivatives and curvature scalars -------------------

    @cached_property
    def I_v1(self):
        return self.vd1(self.I)

    @cached_property
    def I_v2(self):
        return self.vd2(self.I)

    @cached_property
    def I_h1(self):
        return self.hd1(self.I)

    @cached_property
    def I_h2(self):
        return self.hd2(self.I)

    @cached_property
    def I_2(self):
        """``I_2 = I,1;2 + I,2``."""
        return self.vd2(self.I_h1) + self.I_h2

    @cached_property
    def J(self) -> Jet:
        """Landsberg scalar ``F I,1``."""
        return self.Fj * self.I_h1

    @cached_property
    def douglas_scalar(self) -> Jet:
        """``6 I,1 + eps I_2;2 + 2 I I_2``; vanishes iff F is Douglas."""
        return 6.0 * self.I_h1 + self.eps * self.vd2(self.I_2) + 2.0 * self.I * self.I_2

    @cached_property
    def T(self):
        """T-tensor from ``F T_ijkh = I;2 m_i m_j m_k m_h``."""
        m = self.m_lo
        s = self.I_v2 / self.Fj
        return [[[[s * m[i] * m[j] * m[k] * m[h] for h in I2] for k in I2] for j in I2]
                for i in I2]

    @cached_property
    def T_cartan(self):
        """T-tensor from the Cartan tensor and its v-covariant derivative."""
        C = self.C
        Cup = [[[self.ginv[r][0] * C[0][i][k] + self.ginv[r][1] * C[1][i][k] for k in I2]
                for i in I2] for r in I2]
        ell = self.ell_lo
        F = self.Fj
        out = [[[[None] * 2 for _ in I2] for _ in I2] for _ in I2]
        for h in I2:
            for i in I2:
                for j in I2:
                    for k in I2:
                        cov = dy(C[h][i][j], k + 1)
                        for r in I2:
                            cov = cov - Cup[r][h][k] * C[r][i][j] - Cup[r][i][k] * C[h][r][j] \
                                - Cup[r][j][k] * C[h][i][r]
                        out[h][i][j][k] = (F * cov + ell[h] * C[i][j][k] + ell[i] * C[h][j][k]
                                           + ell[j] * C[h][i][k] + ell[k] * C[h][i][j])
        return out

    def gauss_curvature(self, probes=DEFAULT_PROBES, rtol: float = PROBE_TOL) -> float:
        values = []
        for p in probes:
            fj = p(self.base, self.Fj.degree)
            f1 = self.hd1(fj)
            comm = self.hd2(f1) - self.hd1(self.hd2(fj))
            fv2 = self.vd2(fj).value
            scale = max(1.0, abs(self.hd2(f1).value))
            if abs(fv2) <= 1e-6 * scale:
                continue
            values.append((abs(fv2), -comm.value / fv2))
        if not values:
            raise ProbeDegenerate(f"every probe has f;2 ~ 0 at {self.base}")
        if len(values) > 1:
            r = [v for _, v in values]
            spread = max(r) - min(r)
            if spread > rtol * max(1.0, max(abs(v) for v in r)):
                raise ProbeDisagreement(f"probe curvatures {r} disagree at {self.base}")
        return max(values)[1]

    @cached_property
    def R(self) -> float:
        return self.gauss_curvature()


# -- operation-level API -------------------------------------------------------


@dataclass
class FrameSample:
    g: list
    gdet: Jet
    ell_lo: list
    ell_hi: list
    m_lo: list
    m_hi: list
    epsilon: int
    I: Jet

    def values(self) -> dict:
        return {
            "g": _vals(self.g),
            "gdet": self.gdet.value,
            "ell_lo": _vals(self.ell_lo),
            "ell_hi": _vals(self.ell_hi),
            "m_lo": _vals(self.m_lo),
            "m_hi": _vals(self.m_hi),
            "epsilon": self.epsilon,
            "I": self.I.value,
        }


@dataclass
class SpraySample:
    G: list
    Gbar_conn: list
    Gberw: list
    Bcurv: list
    J: Jet
    R: float
    I1: Jet
    I2v: Jet
    Ih1: Jet
    Ih2: Jet
    I_2: Jet

    def values(self) -> dict:
        return {
            "G": _vals(self.G),
            "barthel": _vals(self.Gbar_conn),
            "berwald": _vals(self.Gberw),
            "berwald_curvature": _vals(self.Bcurv),
            "J": self.J.value,
            "R": self.R,
            "I;1": self.I1.value,
            "I;2": self.I2v.value,
            "I,1": self.Ih1.value,
            "I,2": self.Ih2.value,
            "I_2": self.I_2.value,
        }


def _vals(obj):
    if isinstance(obj, Jet):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_vals(o) for o in obj]
    return obj


def frame_at(surface: Surface, point) -> FrameSample:
    geo = surface.at(point)
    return FrameSample(geo.g, geo.gdet, geo.ell_lo, geo.ell_hi, geo.m_lo, geo.m_hi,
                       geo.eps, geo.I)


def spray_at(surface: Surface, point, curvature: bool = True) -> SpraySample:
    geo = surface.at(point)
    R = geo.R if curvature else math.nan
    return SpraySample(geo.G, geo.Gj, geo.Gjk, geo.B, geo.J, R, geo.I_v1, geo.I_v2,
                       geo.I_h1, geo.I_h2, geo.I_2)


def v_deriv(surface: Surface, f: ScalarField, point):
    geo = surface.at(point)
    fj = f(geo.base, surface.degree)
    return geo.vd1(fj), geo.vd2(fj)


def h_deriv(surface: Surface, f: ScalarField, point):
    geo = surface.at(point)
    fj = f(geo.base, surface.degree)
    return geo.hd1(fj), geo.hd2(fj)


def gauss_curvature(surface: Surface, point, probes=DEFAULT_PROBES) -> float:
    return surface.at(point).gauss_curvature(probes)


BASE_CONDITIONS = ("landsberg", "berwald", "t-condition", "douglas")


def base_residuals(geo: PointGeometry) -> dict:
    """Residual of each special-surface condition at one point.

    Each entry is ``(raw, scale)`` where ``scale`` is the largest term of
    the defining expression.
    """
    i1, i2 = abs(geo.I_h1.value), abs(geo.I_h2.value)
    dterms = (6.0 * geo.I_h1.value, geo.eps * geo.vd2(geo.I_2).value,
              2.0 * geo.I.value * geo.I_2.value)
    return {
        "landsberg": (i1, i1),
        "berwald": (max(i1, i2), max(i1, i2)),
        "t-condition": (abs(geo.I_v2.value), abs(geo.I_v2.value)),
        "douglas": (abs(sum(dterms)), max(abs(t) for t in dterms)),
    }


def classify_base(surface: Surface, points) -> dict:
    """Per-point residuals of the Landsberg/Berwald/T/Douglas conditions."""
    per_point = {c: [] for c in BASE_CONDITIONS}
    for p in points:
        res = base_residuals(surface.at(p))
        for c in BASE_CONDITIONS:
            per_point[c].append(res[c][0])
    return {
        c: {"residuals": v, "max": max(v), "mean": sum(v) / len(v)}
        for c, v in per_point.items()
    }

"""Anisotropic conformal change ``Fbar = exp(phi) F`` of a surface.

Barred objects are always produced by the transformation formulas in terms
of ``F``, ``phi`` and the scalars ``sigma, rho, P, Q``.  Building ``Fbar`` as a
fresh :class:`~finsler2d.geometry.Surface` (see :meth:`ConformalSpec.barred_surface`)
is kept as an independent oracle for tests and the ``oracle`` check.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Optional

from . import jet as J
from .errors import FormulaMismatch, Inadmissible, NegativeRho, NotBerwald
from .fields import ScalarField
from .geometry import I2, PointGeometry, Surface
from .jet import Jet, dx, dy

ADMISSIBILITY_TOL = 1e-10
FORMULA_RTOL = 1e-7
DEFAULT_THRESHOLD = 1e-7


class ConformalField:
    """The field ``exp(phi) * F``."""

    def __init__(self, F: ScalarField, phi: ScalarField, name: str = "Fbar"):
        self.F = F
        self.phi = phi
        self.name = name

    def __call__(self, point, degree: int) -> Jet:
        return J.exp(self.phi(point, degree)) * self.F(point, degree)

    def real(self, point) -> float:
        return math.exp(self.phi.real(point)) * self.F.real(point)


class ConformalSpec:
    """A base surface together with an ``h(0)`` conformal factor ``phi``."""

    def __init__(self, base: Surface, phi: ScalarField, name: Optional[str] = None):
        self.base = base
        self.phi = phi
        self.name = name or getattr(phi, "name", "phi")

    def at(self, point, track: bool = True) -> "PointConformal":
        geo = self.base.at(point, track=track)
        return PointConformal(geo, self.phi(geo.base, geo.F.degree))

    def barred_surface(self) -> Surface:
        return self.base.with_metric(ConformalField(self.base.F, self.phi),
                                     f"exp({self.name})*{self.base.name}")


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


class PointConformal:
    """``sigma, rho, P, Q`` and every barred object about one point."""

    def __init__(self, geo: PointGeometry, phi: Jet, check: bool = True):
        self.geo = geo
        self.phi = phi
        self.eps = geo.eps
        if check:
            self.check_admissible()

    # -- phi derivatives and the derived scalars --------------------------

    @cached_property
    def phi_v2(self):
        return self.geo.vd2(self.phi)

    @cached_property
    def phi_v22(self):
        return self.geo.vd2(self.phi_v2)

    @cached_property
    def phi_h1(self):
        return self.geo.hd1(self.phi)

    @cached_property
    def phi_h2(self):
        return self.geo.hd2(self.phi)

    @cached_property
    def phi_h1v2(self):
        return self.geo.vd2(self.phi_h1)

    @cached_property
    def admissibility(self) -> Jet:
        """``F^2 (dot_i dot_j phi + dot_i phi dot_j phi) m^i m^j + eps``."""
        phi, m = self.phi, self.geo.m_hi
        d = [dy(phi, i + 1) for i in I2]
        acc = None
        for i in I2:
            for j in I2:
                t = (dy(d[i], j + 1) + d[i] * d[j]) * m[i] * m[j]
                acc = t if acc is None else acc + t
        return self.geo.L * acc + self.eps

    @cached_property
    def sigma(self):
        v2 = self.phi_v2
        return self.phi_v22 + self.eps * self.geo.I * v2 + 2.0 * v2 * v2

    @cached_property
    def rho_denominator(self):
        return self.sigma + self.eps - self.phi_v2 * self.phi_v2

    @cached_property
    def rho(self):
        return 1.0 / self.rho_denominator

    def check_admissible(self):
        a = self.admissibility.value
        if abs(a) <= ADMISSIBILITY_TOL:
            raise Inadmissible(f"admissibility expression vanishes ({a:.3e}) at {self.geo.base}")
        d = self.rho_denominator.value
        if abs(d) <= ADMISSIBILITY_TOL:
            raise Inadmissible(f"rho has a pole (sigma + eps - phi;2^2 = {d:.3e}) at {self.geo.base}")

    @cached_property
    def erho(self):
        return self.eps * self.rho

    @cached_property
    def sqrt_erho(self):
        if self.erho.value <= 0.0:
            raise NegativeRho(f"eps*rho = {self.erho.value:.3e} <= 0 at {self.geo.base}")
        return J.sqrt(self.erho)

    @cached_property
    def K(self):
        """``phi;2 phi,1 + phi,1;2 - 2 phi,2``; ``Q`` is proportional to it."""
        return self.phi_v2 * self.phi_h1 + self.phi_h1v2 - 2.0 * self.phi_h2

    @cached_property
    def Q(self):
        return 0.5 * self.eps * self.rho * self.geo.L * self.K

    @cached_property
    def P(self):
        L = self.geo.L
        return 0.5 * (-self.rho * L * self.phi_v2 * self.K + L * self.phi_h1)

    def _chain(self, f, n):
        for _ in range(n):
            f = self.geo.vd2(f)
        return f

    @cached_property
    def P_v(self):
        """``[P, P;2, P;2;2, P;2;2;2]``."""
        out = [self.P]
        for _ in range(3):
            out.append(self.geo.vd2(out[-1]))
        return out

    @cached_property
    def Q_v(self):
        """``[Q, Q;2, Q;2;2, Q;2;2;2]``; ``Q;2;2;2;2`` is computed on demand."""
        out = [self.Q]
        for _ in range(3):
            out.append(self.geo.vd2(out[-1]))
        return out

    # -- barred frame and main scalar ------------------------------------

    @cached_property
    def e_phi(self):
        return J.exp(self.phi)

    @cached_property
    def e_mphi(self):
        return J.exp(-self.phi)

    @cached_property
    def ell_lo(self):
        g = self.geo
        return [self.e_phi * (g.ell_lo[i] + self.phi_v2 * g.m_lo[i]) for i in I2]

    @cached_property
    def ell_hi(self):
        return [self.e_mphi * u for u in self.geo.ell_hi]

    @cached_property
    def m_lo(self):
        s = self.e_phi * self.sqrt_erho / self.erho  # e^phi sqrt(eps/rho)
        return [s * mi for mi in self.geo.m_lo]

    @cached_property
    def m_hi(self):
        g = self.geo
        s = self.e_mphi * self.sqrt_erho
        return [s * (g.m_hi[i] - self.eps * self.phi_v2 * g.ell_hi[i]) for i in I2]

    @cached_property
    def I_bar_cubic(self):
        """Main scalar of ``Fbar`` through ``sigma`` and ``sigma;2``."""
        e, s, v2 = self.eps, self.sigma, self.phi_v2
        inner = self.geo.I * (1.0 + e * s) + 0.5 * self.geo.vd2(s) + v2 * (s + 2.0 * e)
        return self.erho * self.sqrt_erho * inner

    @cached_property
    def rho_v2(self):
        return self.geo.vd2(self.rho)

    @cached_property
    def I_bar_log(self):
        """Main scalar of ``Fbar`` through ``(ln rho);2``."""
        e = self.eps
        log_rho_v2 = self.rho_v2 / self.rho
        return self.sqrt_erho * (self.geo.I + 2.0 * e * self.phi_v2 - 0.5 * e * log_rho_v2)

    @cached_property
    def I_bar(self):
        a, b = self.I_bar_log, self.I_bar_cubic
        if _rel(a.value, b.value) > FORMULA_RTOL:
            raise FormulaMismatch(
                f"main-scalar formulas disagree: {a.value!r} vs {b.value!r} at {self.geo.base}")
        return a

    # -- spray and connections -------------------------------------------

    @cached_property
    def G(self):
        g = self.geo
        return [g.G[i] + self.Q * g.m_hi[i] + self.P * g.ell_hi[i] for i in I2]

    @cached_property
    def _barthel_coeffs(self):
        e, I = self.eps, self.geo.I
        P, P2 = self.P_v[0], self.P_v[1]
        Q, Q2 = self.Q_v[0], self.Q_v[1]
        return 2.0 * P, P2 - Q, 2.0 * Q, e * P + Q2 - e * I * Q

    @cached_property
    def Gj(self):
        g = self.geo
        c_ll, c_lm, c_ml, c_mm = self._barthel_coeffs
        l, L_, m, M_ = g.ell_hi, g.ell_lo, g.m_hi, g.m_lo
        out = []
        for i in I2:
            row = []
            for j in I2:
                extra = (c_ll * l[i] * L_[j] + c_lm * l[i] * M_[j] + c_ml * L_[j] * m[i]
                         + c_mm * m[i] * M_[j])
                row.append(g.Gj[i][j] + extra / g.F)
            out.append(row)
        return out

    @cached_property
    def Gjk(self):
        g = self.geo
        e, I = self.eps, g.I
        Iv2 = g.I_v2
        P, P2, P22 = self.P_v[0], self.P_v[1], self.P_v[2]
        Q, Q2, Q22 = self.Q_v[0], self.Q_v[1], self.Q_v[2]
        a_l, a_m = 2.0 * P, 2.0 * Q
        b_l, b_m = P2 - Q, e * P + Q2 - e * I * Q
        c_l = e * P + P22 - 2.0 * Q2 + e * I * P2
        c_m = 2.0 * e * P2 + e * Q + Q22 - e * Iv2 * Q - e * I * Q2
        l, L_, m, M_ = g.ell_hi, g.ell_lo, g.m_hi, g.m_lo
        out = []
        for i in I2:
            va = a_l * l[i] + a_m * m[i]
            vb = b_l * l[i] + b_m * m[i]
            vc = c_l * l[i] + c_m * m[i]
            out.append([[g.Gjk[i][j][k] + (va * L_[j] * L_[k]
                                           + vb * (L_[j] * M_[k] + L_[k] * M_[j])
                                           + vc * M_[j] * M_[k]) / g.L
                         for k in I2] for j in I2])
        return out

    @cached_property
    def psi(self):
        """``F^2 psi``-numerator divided by ``F^2``."""
        g = self.geo
        e, I = self.eps, g.I
        Iv2 = g.I_v2
        P, P2, P22, P222 = self.P_v
        Q, Q2, Q22, _ = self.Q_v
        num = ((-3.0 + Iv2) * e * Q + (1.0 + Iv2 + 2.0 * e * I * I) * e * P2 + P222
               - 3.0 * Q22 + 3.0 * e * I * P22 - 3.0 * e * I * Q2 + 2.0 * I * P)
        return num / g.L

    @cached_property
    def chi(self):
        g = self.geo
        e, I = self.eps, g.I
        Iv2 = g.I_v2
        Iv22 = g.vd2(Iv2)
        P, P2, P22, _ = self.P_v
        Q, Q2, Q22, Q222 = self.Q_v
        num = (3.0 * P - (I + e * Iv22 + I * Iv2) * Q - (2.0 * e * Iv2 + I * I - e) * Q2
               + 3.0 * e * P22 + Q222 + 3.0 * I * P2)
        return num / g.L

    @cached_property
    def B(self):
        """Berwald curvature of ``Fbar``: ``F Bbar = F B + (psi l + chi m) m m m``."""
        g = self.geo
        m = g.m_lo
        out = []
        for i in I2:
            vec = (self.psi * g.ell_hi[i] + self.chi * g.m_hi[i]) / g.F
            out.append([[[g.B[i][j][k][r] + vec * m[j] * m[k] * m[r] for r in I2]
                         for k in I2] for j in I2])
        return out

    @cached_property
    def D(self):
        """``Dbar^{ij} = D^{ij} + F Q (m^i l^j - m^j l^i)``."""
        g = self.geo
        m, l = g.m_hi, g.ell_hi
        return [[g.D[i][j] + g.F * self.Q * (m[i] * l[j] - m[j] * l[i]) for j in I2]
                for i in I2]

    # -- barred scalar derivatives ---------------------------------------

    def vda(self, f: Jet) -> Jet:
        return self.geo.vd1(f)

    def vdb(self, f: Jet) -> Jet:
        g = self.geo
        return self.sqrt_erho * (g.vd2(f) - self.phi_v2 * g.vd1(f))

    def hda(self, f: Jet) -> Jet:
        g = self.geo
        corr = (self.P * g.vd1(f) + self.eps * self.Q * g.vd2(f)) * (2.0 / g.L)
        return self.e_mphi * (g.hd1(f) - corr)

    def hdb(self, f: Jet) -> Jet:
        g = self.geo
        e, v2 = self.eps, self.phi_v2
        P, P2 = self.P_v[0], self.P_v[1]
        Q, Q2 = self.Q_v[0], self.Q_v[1]
        c1 = P2 - Q - 2.0 * v2 * P
        c2 = e * P + Q2 - e * g.I * Q - 2.0 * v2 * Q
        h1 = g.hd1(f)
        inner = g.hd2(f) - v2 * h1 - (c1 * g.vd1(f) + e * c2 * g.vd2(f)) / g.L
        return self.e_mphi * self.sqrt_erho * inner

    def barred_derivs(self, f: Jet):
        """``(f;a, f;b, f,a, f,b)``."""
        return self.vda(f), self.vdb(f), self.hda(f), self.hdb(f)

    # -- main-scalar derivatives -----------------------------------------

    @cached_property
    def rho_h1(self):
        return self.geo.hd1(self.rho)

    @cached_property
    def rho_h2(self):
        return self.geo.hd2(self.rho)

    @cached_property
    def _rho_route_K(self):
        return self.geo.I + 2.0 * self.eps * self.phi_v2 + 0.5 * self.eps * self.rho_v2 / self.rho

    def _ibar_rho_route(self, rho_d, I_d, phi_v2_d, rho_v2_d):
        pref = self.sqrt_erho / (2.0 * self.rho)
        return pref * (rho_d * self._rho_route_K + 2.0 * self.rho * (I_d + 2.0 * self.eps * phi_v2_d)
                       - self.eps * rho_v2_d)

    @cached_property
    def I_bar_F_derivs(self):
        """``(Ibar;2, Ibar,1, Ibar,2)`` with respect to ``F`` via the rho-derivative route."""
        g = self.geo
        v2 = self.phi_v2
        iv2 = self._ibar_rho_route(self.rho_v2, g.I_v2, self.phi_v22, g.vd2(self.rho_v2))
        ih1 = self._ibar_rho_route(self.rho_h1, g.I_h1, g.hd1(v2), g.hd1(self.rho_v2))
        ih2 = self._ibar_rho_route(self.rho_h2, g.I_h2, g.hd2(v2), g.hd2(self.rho_v2))
        return iv2, ih1, ih2

    @cached_property
    def I_bar_derivs_rho(self):
        """``(Ibar;b, Ibar,a, Ibar,b)`` from the F-derivatives of ``Ibar``."""
        g = self.geo
        e = self.eps
        iv2, ih1, ih2 = self.I_bar_F_derivs
        P, Q, Q2 = self.P, self.Q, self.Q_v[1]
        ivb = self.sqrt_erho * iv2
        iha = self.e_mphi * (ih1 - 2.0 * e * Q * iv2 / g.L)
        c2 = e * P + Q2 - e * g.I * Q - 2.0 * self.phi_v2 * Q
        ihb = self.e_mphi * self.sqrt_erho * (ih2 - self.phi_v2 * ih1 - e * c2 * iv2 / g.L)
        return ivb, iha, ihb

    @cached_property
    def I_bar_vb(self):
        return self.vdb(self.I_bar)

    @cached_property
    def I_bar_ha(self):
        return self.hda(self.I_bar)

    @cached_property
    def I_bar_hb(self):
        return self.hdb(self.I_bar)

    @cached_property
    def I_bar_d(self):
        """``Ibar,a;b + Ibar,b``, the barred analogue of ``I_2``."""
        return self.vdb(self.I_bar_ha) + self.I_bar_hb

    @cached_property
    def I_bar_d_curvature(self):
        """``Ibar_d`` recovered from the Berwald-curvature transform."""
        return self.eps * self.e_mphi * self.rho * (self.geo.I_2 + self.chi)

    @cached_property
    def I_bar_ha_curvature(self):
        g = self.geo
        e = self.eps
        inner = -2.0 * g.I_h1 + self.psi + e * self.phi_v2 * (g.I_2 + self.chi)
        return -0.5 * self.e_mphi * self.erho * self.sqrt_erho * inner

    # -- Landsberg scalar and T-tensor -----------------------------------

    @cached_property
    def J_general(self):
        """``F Jbar = F^2 Ibar,1 - 2 eps Q Ibar;2``, divided by ``F``."""
        g = self.geo
        Ibar = self.I_bar
        return (g.L * g.hd1(Ibar) - 2.0 * self.eps * self.Q * g.vd2(Ibar)) / g.F

    @cached_property
    def J_log(self):
        """Landsberg scalar of ``Fbar`` through the rho-derivative formula."""
        g = self.geo
        e = self.eps
        L, Q, rho = g.L, self.Q, self.rho
        r2, r22 = self.rho_v2, g.vd2(self.rho_v2)
        K = g.I + 2.0 * e * self.phi_v2 + e * r2 / (2.0 * rho)
        bracket = ((L * self.rho_h1 - 2.0 * e * Q * r2) * K
                   + L * (4.0 * e * rho * g.hd1(self.phi_v2) - e * g.hd1(r2))
                   - 2.0 * Q * (2.0 * e * rho * g.I_v2 + 4.0 * rho * self.phi_v22 - r22))
        FJ = g.F * self.sqrt_erho * g.J + self.sqrt_erho / (2.0 * rho) * bracket
        return FJ / g.F

    @cached_property
    def J_cubic(self):
        """Landsberg scalar of ``Fbar`` through the sigma formula."""
        g = self.geo
        e = self.eps
        L, Q, s, v2 = g.L, self.Q, self.sigma, self.phi_v2
        s2 = g.vd2(s)
        rho_h1 = self.rho_h1
        inner = g.I * (1.0 + e * s) + 0.5 * s2 + v2 * (s + 2.0 * e)
        term1 = 1.5 * e * self.sqrt_erho * (L * rho_h1 - 2.0 * e * Q * self.rho_v2) * inner
        term2 = ((1.0 + e * s) * (L * g.I_h1 - 2.0 * e * Q * g.I_v2)
                 + (e * g.I + v2) * (L * g.hd1(s) - 2.0 * e * Q * s2)
                 + 0.5 * (L * g.hd1(s2) - 2.0 * e * Q * g.vd2(s2))
                 + (s + 2.0 * e) * (L * g.hd1(v2) - 2.0 * e * Q * self.phi_v22))
        FJ = term1 + self.erho * self.sqrt_erho * term2
        return FJ / g.F

    @cached_property
    def J(self):
        a, b = self.J_log, self.J_cubic
        if _rel(a.value, b.value) > FORMULA_RTOL:
            raise FormulaMismatch(
                f"Landsberg-scalar formulas disagree: {a.value!r} vs {b.value!r} at {self.geo.base}")
        return a

    @cached_property
    def T(self):
        """T-tensor of ``Fbar`` from the transformed ``T`` of ``F``."""
        g = self.geo
        e, rho = self.eps, self.rho
        r2 = self.rho_v2
        extra = (4.0 * e * rho * self.phi_v22 + r2 * (g.I + 2.0 * e * self.phi_v2 + e * r2 / (2.0 * rho))
                 - e * g.vd2(r2)) / (2.0 * g.F * rho)
        pref = e * J.exp(3.0 * self.phi) / rho
        m = g.m_lo
        return [[[[pref * (g.T[i][j][k][h] + extra * m[i] * m[j] * m[k] * m[h]) for h in I2]
                  for k in I2] for j in I2] for i in I2]

    @cached_property
    def T_scalar(self):
        """T-tensor of ``Fbar`` through ``Fbar Tbar = e^{4 phi} (eps/rho)^{3/2} Ibar;2 m m m m``."""
        g = self.geo
        iv2 = self.I_bar_F_derivs[0]
        s = J.exp(4.0 * self.phi) * self.sqrt_erho / (self.rho * self.rho) * iv2
        s = s / (self.e_phi * g.F)
        m = g.m_lo
        return [[[[s * m[i] * m[j] * m[k] * m[h] for h in I2] for k in I2] for j in I2]
                for i in I2]

    # -- symmetric tensor for the metrizability test ---------------------

    @cached_property
    def M(self):
        """``M^i_{jk}``: the difference of Berwald connections when ``F`` is Riemannian."""
        g = self.geo
        e = self.eps
        P, P2, P22, _ = self.P_v
        Q, Q2, Q22, _ = self.Q_v
        a_l, a_m = 2.0 * P, 2.0 * Q
        b_l, b_m = P2 - Q, e * P + Q2
        c_l = e * P + P22 - 2.0 * Q2
        c_m = 2.0 * e * P2 + e * Q + Q22
        l, L_, m, M_ = g.ell_hi, g.ell_lo, g.m_hi, g.m_lo
        out = []
        for i in I2:
            va = a_l * l[i] + a_m * m[i]
            vb = b_l * l[i] + b_m * m[i]
            vc = c_l * l[i] + c_m * m[i]
            out.append([[(va * L_[j] * L_[k] + vb * (L_[j] * M_[k] + L_[k] * M_[j])
                          + vc * M_[j] * M_[k]) / g.L for k in I2] for j in I2])
        return out

    def berwald_residuals(self):
        """``(r1, r2)`` of the Berwald criterion for a Riemannian base."""
        e = self.eps
        P, P2, P22, P222 = self.P_v
        Q, Q2, Q22, Q222 = self.Q_v
        r1_terms = (-3.0 * e * Q.value, -3.0 * Q22.value, e * P2.value, P222.value)
        r2_terms = (3.0 * P.value, 3.0 * e * P22.value, e * Q2.value, Q222.value)
        return r1_terms, r2_terms

    def douglas_riemannian_terms(self):
        """Terms of ``9 eps Q + 10 Q;2;2 + eps Q;2;2;2;2``."""
        e = self.eps
        Q, _, Q22, Q222 = self.Q_v
        Q2222 = self.geo.vd2(Q222)
        return 9.0 * e * Q.value, 10.0 * Q22.value, e * Q2222.value


# -- operation-level API -------------------------------------------------------


def conformal_data(spec: ConformalSpec, point):
    """``(sigma, rho, P, Q)`` jets at ``point``."""
    pc = spec.at(point)
    return pc.sigma, pc.rho, pc.P, pc.Q


def transform_all(spec: ConformalSpec, point) -> dict:
    """Every barred object at ``point``, computed by transformation formulas."""
    pc = spec.at(point)
    return {
        "ell_lo": pc.ell_lo,
        "ell_hi": pc.ell_hi,
        "m_lo": pc.m_lo,
        "m_hi": pc.m_hi,
        "I": pc.I_bar,
        "G": pc.G,
        "Gj": pc.Gj,
        "Gjk": pc.Gjk,
        "B": pc.B,
        "J": pc.J,
        "T": pc.T,
        "D": pc.D,
        "P": pc.P,
        "Q": pc.Q,
        "sigma": pc.sigma,
        "rho": pc.rho,
        "psi": pc.psi,
        "chi": pc.chi,
        "I_d": pc.I_bar_d,
    }


def barred_scalar_derivs(spec: ConformalSpec, f: ScalarField, point):
    pc = spec.at(point)
    return pc.barred_derivs(f(pc.geo.base, pc.geo.F.degree))


def _max_abs(obj) -> float:
    if isinstance(obj, Jet):
        return abs(obj.value)
    return max(_max_abs(o) for o in obj)


def is_riemannian(geo: PointGeometry, threshold: float = DEFAULT_THRESHOLD) -> bool:
    return abs(geo.I.value) < threshold


def berwald_conditions(spec: ConformalSpec, point, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Residuals of the criterion for ``Fbar`` to be Berwald.

    With a Riemannian base the pair ``(r1, r2)`` is returned; otherwise the
    largest component of the transformed Berwald curvature.
    """
    pc = spec.at(point)
    if is_riemannian(pc.geo, threshold):
        t1, t2 = pc.berwald_residuals()
        return {"riemannian_base": True, "r1": abs(sum(t1)), "r2": abs(sum(t2)),
                "scale": max(abs(t) for t in t1 + t2)}
    b = _max_abs(pc.B)
    return {"riemannian_base": False, "B": b, "scale": b}


def metrizability(spec: ConformalSpec, points, threshold: float = DEFAULT_THRESHOLD) -> dict:
    dM, phi_h, relation = [], [], []
    for p in points:
        pc = spec.at(p)
        g = pc.geo
        if not is_riemannian(g, threshold):
            raise NotBerwald(f"base metric is not Riemannian at {g.base}")
        t1, t2 = pc.berwald_residuals()
        scale = max(1.0, max(abs(t) for t in t1 + t2))
        if max(abs(sum(t1)), abs(sum(t2))) / scale >= threshold:
            raise NotBerwald(f"Fbar fails the Berwald criterion at {g.base}")
        dM.append(max(_max_abs([dy(pc.M[i][j][k], r + 1) for r in I2])
                      for i in I2 for j in I2 for k in I2))
        phi_h.append(max(abs(pc.phi_h1.value), abs(pc.phi_h2.value)))
        relation.append(_max_abs(metrizing_relation(pc)))
    return {
        "dM": max(dM),
        "phi_h": phi_h,
        "phi_h_max": max(phi_h),
        "phi_h_min": min(phi_h),
        "relation": max(relation),
        "metrizable": max(phi_h) < threshold,
    }


def metrizing_relation(pc: PointConformal):
    """``F^2 delta_i(e^{2 phi}) - y^k M^j_{ik} dot_j Fbar^2`` for ``i = 1, 2``."""
    g = pc.geo
    e2 = pc.e_phi * pc.e_phi
    lhs = [g.L * d for d in g.delta(e2)]
    Lbar = e2 * g.L
    dL = [dy(Lbar, j + 1) for j in I2]
    y = g.y
    out = []
    for i in I2:
        acc = None
        for k in I2:
            for j in I2:
                t = y[k] * pc.M[j][i][k] * dL[j]
                acc = t if acc is None else acc + t
        out.append(lhs[i] - acc)
    return out


def landsberg_and_T_checks(spec: ConformalSpec, points,
                           threshold: float = DEFAULT_THRESHOLD) -> dict:
    t_res, l_res, special, prop46 = [], [], [], []
    for p in points:
        pc = spec.at(p)
        g = pc.geo
        e = pc.eps
        t_res.append(abs(pc.I_bar_F_derivs[0].value))
        l_res.append(abs(pc.J_general.value) / pc.e_phi.value / g.F.value)
        if abs((pc.sigma - pc.phi_v2 * pc.phi_v2).value) < threshold:
            rhs = (g.F * g.J + 2.0 * e * g.L * g.hd1(pc.phi_v2)
                   - 2.0 * e * pc.Q * (g.I_v2 + 2.0 * e * pc.phi_v22))
            special.append(abs((g.F * pc.J).value - rhs.value))
        prop46.append(abs((pc.phi_v2 * pc.phi_h1 - pc.phi_h2).value))
    return {
        "t_condition": max(t_res),
        "landsberg": max(l_res),
        "t_residuals": t_res,
        "landsberg_residuals": l_res,
        "unit_determinant_branch": max(special) if special else None,
        "phi_relation": max(prop46),
    }


def flatness_residuals(pc: PointConformal) -> dict:
    g = pc.geo
    F, phi = g.F, pc.phi
    a = [abs((F * dx(phi, j + 1) + dx(F, j + 1)).value) for j in I2]
    y = g.y
    radial = y[0] * dx(F, 1) + y[1] * dx(F, 2)
    twist = dy(dx(F, 1), 2) - dy(dx(F, 2), 1)
    cP = abs((pc.P + 0.5 * radial).value)
    cQ = abs((pc.Q + 0.5 * g.L * twist / g.h).value)
    Gm = g.G[0] * g.m_lo[0] + g.G[1] * g.m_lo[1]
    Gl = g.G[0] * g.ell_lo[0] + g.G[1] * g.ell_lo[1]
    necessary = abs((g.L * pc.phi_h1 + 2.0 * pc.phi_v2 * Gm + 2.0 * Gl).value)
    return {"a": max(a), "cP": cP, "cQ": cQ, "necessary": necessary}


def flatness_check(spec: ConformalSpec, points, threshold: float = DEFAULT_THRESHOLD) -> dict:
    rows = [flatness_residuals(spec.at(p)) for p in points]
    worst = {k: max(r[k] for r in rows) for k in rows[0]}
    worst["flat"] = max(worst["a"], worst["cP"], worst["cQ"]) < threshold
    return worst


def douglas_check(spec: ConformalSpec, points, threshold: float = DEFAULT_THRESHOLD) -> dict:
    q, thm, cor, anti = [], [], [], []
    for p in points:
        pc = spec.at(p)
        g = pc.geo
        e = pc.eps
        q.append(abs(pc.Q.value))
        anti.append(max(abs((pc.D[i][j] + pc.D[j][i]).value) for i in I2 for j in I2))
        berwald_base = max(abs(g.I_h1.value), abs(g.I_h2.value)) < threshold
        if berwald_base:
            thm.append(abs((3.0 * pc.psi - e * g.vd2(pc.chi) - g.I * pc.chi).value))
        if is_riemannian(g, threshold):
            cor.append(abs(sum(pc.douglas_riemannian_terms())))
    return {
        "Q": max(q),
        "berwald_base": max(thm) if thm else None,
        "riemannian": max(cor) if cor else None,
        "antisymmetry": max(anti),
    }

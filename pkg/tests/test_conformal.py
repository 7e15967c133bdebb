import math

import pytest

from finsler2d import config
from finsler2d import jet as J
from finsler2d.classify import PROBES, oracle_terms
from finsler2d.conformal import (
    ConformalSpec,
    PointConformal,
    conformal_data,
    douglas_check,
    flatness_check,
    landsberg_and_T_checks,
    metrizability,
    transform_all,
)
from finsler2d.errors import Inadmissible, NegativeRho, NotBerwald
from finsler2d.fields import ZERO, FunctionField
from finsler2d.geometry import Surface

import stock

P = (0.3, 0.2, 1.0, 0.4)


def euclid(x1, x2, y1, y2):
    return J.sqrt(y1 * y1 + y2 * y2)


def const_phi(c):
    return FunctionField(lambda x1, x2, y1, y2: c + 0.0 * y1, f"{c}")


@pytest.mark.parametrize("name", ["randers", "lorentz", "sphere"])
def test_zero_factor_is_identity(name):
    pc = ConformalSpec(stock.surface(name), ZERO).at(P)
    g = pc.geo
    assert abs(pc.sigma.value) < 1e-15
    assert pc.rho.value == pytest.approx(g.eps)
    assert abs(pc.P.value) < 1e-14 and abs(pc.Q.value) < 1e-14
    assert stock.max_diff(pc.G, g.G) < 1e-14
    assert stock.max_diff(pc.Gjk, g.Gjk) < 1e-13
    assert pc.I_bar.value == pytest.approx(g.I.value, abs=1e-13)


@pytest.mark.parametrize("name", ["randers", "quartic"])
def test_homothety(name):
    c = 0.4
    pc = ConformalSpec(stock.surface(name), const_phi(c)).at(P)
    g = pc.geo
    assert stock.max_diff(pc.ell_lo, [math.exp(c) * v.value for v in g.ell_lo]) < 1e-13
    assert stock.max_diff(pc.G, g.G) < 1e-13
    assert pc.I_bar.value == pytest.approx(g.I.value, abs=1e-13)
    # Jbar = Fbar Ibar,1 with Fbar = e^c F and lbar = e^-c l, so J is invariant
    assert pc.J.value == pytest.approx(g.J.value, abs=1e-12)


@pytest.mark.parametrize("name", ["randers", "quartic", "sphere"])
def test_isotropic_factor_reduction(name):
    pc = ConformalSpec(stock.surface(name), FunctionField(stock.phi_x)).at(P)
    g = pc.geo
    e = g.eps
    assert abs(pc.phi_v2.value) < 1e-13
    assert abs(pc.sigma.value) < 1e-13
    assert abs(pc.rho.value - e) < 1e-13
    assert abs(pc.I_bar.value - g.I.value) < 1e-12
    assert abs((pc.Q + 0.5 * g.L * pc.phi_h2).value) < 1e-12
    assert abs((pc.P - 0.5 * g.L * pc.phi_h1).value) < 1e-12


@pytest.mark.parametrize("pair", list(stock.PAIRS))
def test_pq_relations(pair):
    spec = stock.spec(pair)
    for p in stock.points(stock.PAIRS[pair][0], 5, seed=7):
        pc = spec.at(p)
        g = pc.geo
        e = g.eps
        lhs = 2 * e * pc.phi_v2 * pc.Q + 2 * pc.P
        assert stock.rel(lhs.value, (g.L * pc.phi_h1).value) < 1e-10
        assert stock.rel(pc.admissibility.value, pc.rho_denominator.value) < 1e-10


@pytest.mark.parametrize("pair", list(stock.PAIRS))
def test_transformation_matches_fresh_geometry(pair):
    spec = stock.spec(pair)
    bar_surface = spec.barred_surface()
    for p in stock.points(stock.PAIRS[pair][0], 4, seed=9):
        pc = spec.at(p)
        bar = bar_surface.at(p)
        probes = [f(pc.geo.base, pc.geo.F.degree) for f in PROBES]
        terms = oracle_terms(pc, bar, probes)
        assert set(terms) == {"ell_lo", "ell_hi", "m_lo", "m_hi", "I", "G", "Gj", "Gjk", "B", "J",
                              "T", "D", "derivs"}
        for name, (raw, scale) in terms.items():
            assert raw / max(1.0, scale) < 1e-9, name


@pytest.mark.parametrize("pair", list(stock.PAIRS))
def test_dual_formulas(pair):
    spec = stock.spec(pair)
    for p in stock.points(stock.PAIRS[pair][0], 4, seed=5):
        pc = spec.at(p)
        assert stock.rel(pc.I_bar_log.value, pc.I_bar_cubic.value) < 1e-10
        assert stock.rel(pc.J_log.value, pc.J_cubic.value) < 1e-10
        assert stock.max_diff(pc.T, pc.T_scalar) < 1e-9


def test_barred_scalar_derivatives_match_fresh_surface():
    spec = stock.spec("quartic+b")
    pc = spec.at(P)
    bar = spec.barred_surface().at(P)
    f = PROBES[0](P, pc.geo.F.degree)
    for a, b in zip(pc.barred_derivs(f), bar.derivs(f)):
        assert stock.rel(a.value, b.value) < 1e-10


def test_rho_equals_eps_exactly_when_sigma_is_phi_v2_squared():
    iso = ConformalSpec(stock.surface("randers"), FunctionField(stock.phi_x)).at(P)
    assert abs((iso.sigma - iso.phi_v2 * iso.phi_v2).value) < 1e-13
    assert abs(iso.rho.value - iso.eps) < 1e-13
    aniso = stock.spec("randers+a").at(P)
    assert abs((aniso.sigma - aniso.phi_v2 * aniso.phi_v2).value) > 1e-3
    assert abs(aniso.rho.value - aniso.eps) > 1e-3


def test_inadmissible_factor_detected():
    # exp(phi)|y| = y1 is degenerate
    phi = FunctionField(lambda x1, x2, y1, y2: J.log(y1 / J.sqrt(y1 * y1 + y2 * y2)))
    spec = ConformalSpec(Surface(FunctionField(euclid)), phi)
    with pytest.raises(Inadmissible):
        spec.at(P)


def test_signature_changing_factor_has_negative_rho():
    # exp(phi)|y| = sqrt(y1^2 - y2^2) is Lorentzian over a Riemannian base
    phi = FunctionField(
        lambda x1, x2, y1, y2: 0.5 * J.log((y1 * y1 - y2 * y2) / (y1 * y1 + y2 * y2)))
    spec = ConformalSpec(Surface(FunctionField(euclid)), phi)
    pc = spec.at(P)
    assert pc.eps == 1
    assert spec.barred_surface().at(P).eps == -1
    assert pc.erho.value < 0
    with pytest.raises(NegativeRho):
        pc.I_bar


def test_minkowski_with_direction_factor_is_flat():
    phi = FunctionField(lambda x1, x2, y1, y2: 0.2 * y1 * y2 / (y1 * y1 + y2 * y2))
    spec = ConformalSpec(Surface(FunctionField(euclid)), phi)
    pts = stock.points("randers", 10)
    assert flatness_check(spec, pts)["flat"] is True
    assert douglas_check(spec, pts)["Q"] < 1e-13


def _bundled(name):
    cfg = config.load(name)
    return cfg, cfg.conformal(), cfg.plan.with_(count=10).points()


def test_funk_example():
    cfg, spec, pts = _bundled("funk")
    for p in pts:
        pc = spec.at(p)
        assert abs(pc.geo.I.value) < 1e-10
        assert max(abs(pc.phi_h1.value), abs(pc.phi_h2.value)) < 1e-10
        assert abs(pc.P.value) < 1e-10 and abs(pc.Q.value) < 1e-10
        assert stock.max_diff(pc.G, pc.geo.G) < 1e-10
    assert flatness_check(spec, pts)["flat"] is False
    m = metrizability(spec, pts)
    assert m["metrizable"] is True
    assert m["relation"] < 1e-9


def test_berwald_rund_example():
    cfg, spec, pts = _bundled("berwald-rund")
    for p in pts:
        pc = spec.at(p)
        assert pc.eps == -1
        assert pc.erho.value == pytest.approx(-1 / 8, rel=1e-9)
        assert spec.barred_surface().at(p, track=False).eps == 1
        t1, t2 = pc.berwald_residuals()
        assert abs(sum(t1)) < 1e-8 and abs(sum(t2)) < 1e-8
    m = metrizability(spec, pts)
    assert m["metrizable"] is False
    assert m["phi_h_min"] > 1e-2
    assert m["dM"] < 1e-7
    d = douglas_check(spec, pts)
    assert d["riemannian"] < 1e-8


def test_metrizability_needs_a_berwald_image():
    spec = stock.spec("randers+a")
    with pytest.raises(NotBerwald):
        metrizability(spec, [P])


def test_operation_level_api():
    spec = stock.spec("sphere+b")
    sigma, rho, Pp, Q = conformal_data(spec, P)
    objs = transform_all(spec, P)
    assert objs["rho"].value == pytest.approx(rho.value)
    assert objs["Q"].value == pytest.approx(Q.value)
    res = landsberg_and_T_checks(spec, stock.points("sphere", 3))
    assert res["t_condition"] > 1e-6  # the factor is genuinely anisotropic


def test_point_conformal_can_skip_admissibility():
    phi = FunctionField(lambda x1, x2, y1, y2: J.log(y1 / J.sqrt(y1 * y1 + y2 * y2)))
    geo = Surface(FunctionField(euclid)).at(P)
    pc = PointConformal(geo, phi(geo.base, geo.F.degree), check=False)
    assert abs(pc.admissibility.value) < 1e-12

import math

import numpy as np
import pytest

from finsler2d import jet as J
from finsler2d.classify import PROBES
from finsler2d.errors import DegenerateMetric, OutsideCone, SignatureFlip
from finsler2d.fields import FunctionField
from finsler2d.geometry import Surface, base_residuals, frame_at, gauss_curvature, spray_at
from finsler2d.metricdsl import FieldDef

import stock

P = (0.3, 0.2, 1.0, 0.4)


def euclid(x1, x2, y1, y2):
    return J.sqrt(y1 * y1 + y2 * y2)


def test_euclidean_frame():
    geo = Surface(FunctionField(euclid)).at((0.0, 0.0, 3.0, 4.0))
    assert geo.eps == 1
    np.testing.assert_allclose([[v.value for v in r] for r in geo.g], np.eye(2),
                               atol=1e-15)
    np.testing.assert_allclose([v.value for v in geo.ell_lo], [0.6, 0.8], atol=1e-15)
    np.testing.assert_allclose([v.value for v in geo.m_hi], [-0.8, 0.6], atol=1e-15)
    assert abs(geo.I.value) < 1e-15
    assert abs(geo.R) < 1e-12


@pytest.mark.parametrize("name", ["randers", "quartic", "lorentz"])
def test_frame_is_orthonormal_with_signature(name):
    geo = stock.surface(name).at(P)
    g, l, m = geo.g, geo.ell_hi, geo.m_hi

    def dot(a, b):
        return sum(g[i][j].value * a[i].value * b[j].value for i in range(2) for j in range(2))

    assert dot(l, l) == pytest.approx(1.0, abs=1e-13)
    assert dot(l, m) == pytest.approx(0.0, abs=1e-13)
    assert dot(m, m) == pytest.approx(geo.eps, abs=1e-13)


def test_lorentzian_signature():
    assert stock.surface("lorentz").at(P).eps == -1
    assert stock.surface("randers").at(P).eps == 1


RANDERS_SRC = "sqrt(y1^2 + y2^2*(1 + x1^2)) + 0.3*y1 + 0.1*x2*y2"


def _ld_g(L, p, h=1e-4):
    return [[stock.fd_second(L, p, 2 + i, 2 + j, h) / 2 for j in range(2)] for i in range(2)]


def test_metric_tensor_against_finite_differences():
    F = FieldDef.from_source("F", RANDERS_SRC)
    Fl = stock.field_ld(F)

    def L(*c):
        return Fl(*c) ** 2

    geo = stock.surface("randers").at(P)
    g_fd = _ld_g(L, P)
    for i in range(2):
        for j in range(2):
            assert stock.rel(geo.g[i][j].value, g_fd[i][j]) < 1e-6


def test_main_scalar_against_log_determinant():
    # I = F m^k d/dy^k ln sqrt|det g|, evaluated with nested extended-precision differences
    F = FieldDef.from_source("F", RANDERS_SRC)
    Fl = stock.field_ld(F)

    def L(*c):
        return Fl(*c) ** 2

    def logdet(*c):
        g = _ld_g(L, c, 1e-4)
        return np.log(abs(g[0][0] * g[1][1] - g[0][1] * g[1][0])) / 2

    geo = stock.surface("randers").at(P)
    d = [stock.fd_partial(logdet, P, 2 + k, 1e-3) for k in range(2)]
    oracle = geo.F.value * sum(float(d[k]) * geo.m_hi[k].value for k in range(2))
    assert abs(geo.I.value) > 1e-2
    assert stock.rel(geo.I.value, oracle) < 1e-5


def conformally_flat(u):
    """``F = exp(u(x)) |y|``: spray from the Christoffel symbols of ``exp(2u) delta``."""
    return lambda x1, x2, y1, y2: J.exp(u(x1, x2)) * J.sqrt(y1 * y1 + y2 * y2)


def christoffel_spray(du, y):
    # G^i = (1/2) Gamma^i_jk y^j y^k = (u.y) y^i - |y|^2 du^i / 2
    uy = du[0] * y[0] + du[1] * y[1]
    yy = y[0] ** 2 + y[1] ** 2
    return [uy * y[i] - 0.5 * yy * du[i] for i in range(2)]


@pytest.mark.parametrize("point", [(0.3, 0.2, 1.0, 0.4), (-0.5, 0.7, -0.2, 1.3)])
def test_spray_matches_christoffel_symbols(point):
    def u(x1, x2):
        return x1 * x1 + 0.5 * x2

    geo = Surface(FunctionField(conformally_flat(u))).at(point)
    x1 = point[0]
    expected = christoffel_spray((2 * x1, 0.5), point[2:])
    np.testing.assert_allclose([G.value for G in geo.G], expected, rtol=1e-12, atol=1e-13)
    assert geo.spray_mismatch < 1e-12


def test_gauss_curvature_of_conformally_flat_metrics():
    # K = -(Laplacian of ln lambda) / (2 lambda) with lambda = exp(2u)
    def u(x1, x2):
        return x1 * x1 + 0.5 * x2

    surf = Surface(FunctionField(conformally_flat(u)))
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = tuple(rng.uniform(-0.5, 0.5, 2)) + tuple(rng.uniform(0.5, 1.5, 2))
        K = -2.0 * math.exp(-2 * (p[0] ** 2 + 0.5 * p[1]))
        assert stock.rel(surf.at(p).R, K) < 1e-8


def test_round_sphere_curvature():
    surf = stock.surface("sphere")
    for p in stock.points("sphere", 20, seed=2):
        assert surf.at(p).R == pytest.approx(4.0, rel=1e-8)


@pytest.mark.parametrize("name", list(stock.METRICS))
def test_curvature_is_probe_independent(name):
    surf = stock.surface(name)
    for p in stock.points(name, 5, seed=3):
        geo = surf.at(p)
        a = geo.gauss_curvature()
        b = geo.gauss_curvature(PROBES)
        assert stock.rel(a, b) < 1e-8


def test_berwald_rund_metric_is_riemannian():
    F, _ = stock.berwald_rund_fields()
    geo = Surface(F).at((0.2, 0.5, 1.0, 1.0))
    assert abs(geo.I.value) < 1e-12


def test_randers_is_not_landsberg():
    surf = stock.surface("randers")
    worst = max(base_residuals(surf.at(p))["landsberg"][0] for p in stock.points("randers", 5))
    assert worst > 1e-3


def test_position_independent_metric_has_zero_spray():
    def minkowski(x1, x2, y1, y2):
        return J.sqrt(J.sqrt(y1 ** 4 + y1 * y1 * y2 * y2 + 2 * y2 ** 4))

    geo = Surface(FunctionField(minkowski)).at(P)
    assert max(abs(G.value) for G in geo.G) < 1e-14
    assert abs(geo.R) < 1e-12


@pytest.mark.parametrize("name", list(stock.METRICS))
def test_metric_function_derivatives(name):
    geo = stock.surface(name).at(stock.points(name, 1)[0])
    F = geo.F
    assert geo.vd1(F).value == pytest.approx(F.value, rel=1e-13)
    assert abs(geo.vd2(F).value) < 1e-13
    assert abs(geo.hd1(F).value) < 1e-12
    assert abs(geo.hd2(F).value) < 1e-12


def test_funk_factor_is_horizontally_constant():
    F, phi = stock.funk_fields()
    surf = Surface(F)
    for p in stock.points("funk", 5):
        geo = surf.at(p)
        d = geo.delta(phi(geo.base, geo.F.degree))
        assert max(abs(v.value) for v in d) < 1e-10


def test_degenerate_metric():
    def linear(x1, x2, y1, y2):
        return y1 + y2

    with pytest.raises(DegenerateMetric):
        Surface(FunctionField(linear)).at(P).eps


def test_signature_flip():
    def flip(x1, x2, y1, y2):
        return J.sqrt(y1 * y1 + x1 * y2 * y2)

    surf = Surface(FunctionField(flip))
    surf.at((0.5, 0.0, 1.0, 0.3))
    with pytest.raises(SignatureFlip):
        surf.at((-0.5, 0.0, 1.0, 0.3))


def test_outside_cone():
    def line(x1, x2, y1, y2):
        return y1 + 0.0 * y2

    surf = Surface(FunctionField(line))
    with pytest.raises(OutsideCone):
        surf.at((0, 0, -1.0, 0.5))
    with pytest.raises(OutsideCone):
        Surface(FunctionField(euclid), domain=lambda p: p[0] > 0).at((-1, 0, 1, 1))
    with pytest.raises(OutsideCone):
        Surface(FunctionField(euclid)).at((0, 0, 0.0, 0.0))


@pytest.mark.parametrize("name", ["randers", "quartic", "funk"])
def test_homogeneity(name):
    surf = stock.surface(name)
    p = stock.points(name, 1)[0]
    lam = 1.7
    a = surf.at(p)
    b = surf.at(p[:2] + (lam * p[2], lam * p[3]))
    for i in range(2):
        for j in range(2):
            assert b.g[i][j].value == pytest.approx(a.g[i][j].value, rel=1e-12)
        assert b.G[i].value == pytest.approx(lam ** 2 * a.G[i].value, rel=1e-10, abs=1e-13)
    assert b.I.value == pytest.approx(a.I.value, rel=1e-10, abs=1e-13)
    assert b.R == pytest.approx(a.R, rel=1e-8, abs=1e-12)


def test_operation_level_api():
    surf = stock.surface("randers")
    fs = frame_at(surf, P)
    ss = spray_at(surf, P)
    assert fs.values()["epsilon"] == 1
    assert ss.values()["R"] == pytest.approx(gauss_curvature(surf, P), rel=1e-12)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler2d import jet as J
from finsler2d.errors import DegreeExhausted, DegreeMismatch, DomainError

import stock

BASE = (0.3, -0.2, 1.1, 0.7)


def test_monomials_graded_and_indexed():
    mons = J.monomials(3)
    assert len(mons) == J.ncoef(3) == 35
    assert [sum(m) for m in mons] == sorted(sum(m) for m in mons)
    for i, m in enumerate(mons):
        assert J.monomial_index(m) == i


def test_coordinates_are_linear():
    x1, x2, y1, y2 = J.coordinates(BASE, 3)
    assert y1.value == 1.1
    assert y1.derivative((0, 0, 1, 0)) == 1.0
    assert y1.derivative((0, 0, 2, 0)) == 0.0
    assert x2.derivative((0, 1, 0, 0)) == 1.0


def test_truncate_is_prefix():
    x1, x2, y1, y2 = J.coordinates(BASE, 6)
    f = J.exp(x1 * y2) + J.sin(x2 + y1)
    t = f.truncate(3)
    assert t.degree == 3
    np.testing.assert_array_equal(t.coeffs, f.coeffs[: J.ncoef(3)])


def test_partial_lowers_degree():
    x1, x2, y1, y2 = J.coordinates(BASE, 4)
    f = x1 * x1 * y2
    d = J.dx(f, 1)
    assert d.degree == 3
    assert d.value == pytest.approx(2 * BASE[0] * BASE[3])


def test_degree_exhaustion_is_an_error():
    x1, *_ = J.coordinates(BASE, 1)
    d = J.dx(x1, 1)
    assert d.degree == 0
    with pytest.raises(DegreeExhausted):
        J.dx(d, 1)
    with pytest.raises(DegreeExhausted):
        x1.truncate(2)
    with pytest.raises(DegreeExhausted):
        x1.coefficient((2, 0, 0, 0))


def test_mixed_degrees_take_minimum():
    a = J.coordinates(BASE, 5)[0]
    b = J.coordinates(BASE, 2)[1]
    assert (a * b).degree == 2
    assert (a + b).degree == 2


def test_different_bases_rejected():
    a = J.coordinates(BASE, 2)[0]
    b = J.coordinates((0, 0, 1, 1), 2)[0]
    with pytest.raises(DegreeMismatch):
        a + b


@pytest.mark.parametrize("fn, arg", [(J.sqrt, -1.0), (J.log, 0.0), (J.reciprocal, 0.0)])
def test_domain_errors(fn, arg):
    x = J.Jet.constant(arg, BASE, 2)
    with pytest.raises(DomainError):
        fn(x)


def test_abs_at_zero_rejected():
    with pytest.raises(DomainError):
        J.fabs(J.Jet.constant(0.0, BASE, 2))


def test_power_matches_repeated_product():
    x1, x2, y1, y2 = J.coordinates(BASE, 5)
    f = y1 + 0.3 * x2
    np.testing.assert_allclose((f ** 3).coeffs, (f * f * f).coeffs, atol=1e-14)
    np.testing.assert_allclose((f ** -2).coeffs, (1 / (f * f)).coeffs, atol=1e-13)
    np.testing.assert_allclose((f ** 0.5).coeffs, J.sqrt(f).coeffs, atol=1e-14)


def test_known_series():
    x1, *_ = J.coordinates((0.0, 0, 1, 1), 6)
    e = J.exp(x1)
    for n in range(7):
        assert e.coefficient((n, 0, 0, 0)) == pytest.approx(1 / math.factorial(n))
    s = J.sin(x1)
    assert s.derivative((3, 0, 0, 0)) == pytest.approx(-1.0)


# -- property tests -----------------------------------------------------------------

coef = st.floats(-2, 2, allow_nan=False, allow_infinity=False)


@st.composite
def jets(draw, positive=False):
    n = J.ncoef(3)
    c = np.array(draw(st.lists(coef, min_size=n, max_size=n)))
    if positive:
        c[0] = 1.0 + abs(c[0])
    return J.Jet(BASE, 3, c)


@settings(max_examples=60, deadline=None)
@given(jets(), jets(), jets())
def test_ring_axioms(a, b, c):
    np.testing.assert_allclose(((a + b) * c).coeffs, (a * c + b * c).coeffs, atol=1e-11)
    np.testing.assert_allclose((a * (b * c)).coeffs, ((a * b) * c).coeffs, atol=1e-10)
    np.testing.assert_allclose((a * b).coeffs, (b * a).coeffs, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(jets(positive=True))
def test_inverse_function_identities(a):
    one = J.Jet.constant(1.0, BASE, 3)
    np.testing.assert_allclose((a * (1 / a)).coeffs, one.coeffs, atol=1e-10)
    np.testing.assert_allclose(J.exp(J.log(a)).coeffs, a.coeffs, atol=1e-10)
    np.testing.assert_allclose((J.sqrt(a) * J.sqrt(a)).coeffs, a.coeffs, atol=1e-10)
    s, c = J.sin(a), J.cos(a)
    np.testing.assert_allclose((s * s + c * c).coeffs, one.coeffs, atol=1e-10)


# -- independent oracles ---------------------------------------------------------


def test_partials_match_finite_differences():
    assert stock.fd_worst(stock.random_fields(10, seed=11), seed=12) < 1e-6


def test_polynomial_jets_exact():
    assert stock.polynomial_worst(10, seed=5) < 1e-13


def test_random_source_parses_and_matches_real_evaluation():
    for fdef in stock.random_fields(20, seed=3):
        p = (0.1, 0.2, 0.3, 0.4)
        assert fdef(p, 0).value == pytest.approx(fdef.real(p), rel=1e-12)

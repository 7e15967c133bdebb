import math

import pytest

from finsler2d.errors import DomainError, InputError
from finsler2d.metricdsl import (
    BinOp,
    Call,
    DSLSyntaxError,
    FieldDef,
    Neg,
    Num,
    Sym,
    UnknownIdentifier,
    check_condition,
    homogeneity_defect,
    parse,
    parse_condition,
    to_source,
)

import stock


@pytest.mark.parametrize("src, tree", [
    ("1 + 2*3", BinOp("+", Num(1), BinOp("*", Num(2), Num(3)))),
    ("1 - 2 - 3", BinOp("-", BinOp("-", Num(1), Num(2)), Num(3))),
    ("a/b/c", BinOp("/", BinOp("/", Sym("a"), Sym("b")), Sym("c"))),
    ("2^3^2", BinOp("^", Num(2), BinOp("^", Num(3), Num(2)))),
    ("-x1^2", Neg(BinOp("^", Sym("x1"), Num(2)))),
    ("2^-1", BinOp("^", Num(2), Neg(Num(1)))),
    ("sqrt(y1)*y2", BinOp("*", Call("sqrt", Sym("y1")), Sym("y2"))),
    ("(1 + x1)^0.5", BinOp("^", BinOp("+", Num(1), Sym("x1")), Num(0.5))),
    ("1.5e-3", Num(1.5e-3)),
])
def test_precedence(src, tree):
    assert parse(src) == tree


def test_roundtrip_fuzz():
    assert stock.roundtrip_failures(1000, seed=1) == []


@pytest.mark.parametrize("src, offset, expected", [
    ("1 +", 3, "NUMBER"),
    ("(x1 + 2", 7, ")"),
    ("x1 x2", 3, "end of input"),
    ("sqrt x1", 5, "("),
    ("2 * $", 4, None),
    ("", 0, "NAME"),
])
def test_syntax_errors_report_offset(src, offset, expected):
    with pytest.raises(DSLSyntaxError) as info:
        parse(src)
    assert info.value.offset == offset
    if expected is not None:
        assert expected in info.value.expected
    assert isinstance(info.value, InputError)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        parse("x1 + foo*y1", names=())
    assert info.value.name == "foo"
    assert info.value.offset == 5
    with pytest.raises(UnknownIdentifier):
        parse("tan(x1)")


def test_condition_parsing_and_checking():
    c = parse_condition("1 - x1^2 > x2")
    assert str(c) == "1 - x1^2 > x2"
    assert check_condition(c, (0.1, 0.5, 1, 1))
    assert not check_condition(c, (0.9, 0.5, 1, 1))
    with pytest.raises(DSLSyntaxError):
        parse_condition("x1 + 1")


def test_domain_error_names_subexpression():
    f = FieldDef.from_source("f", "x1 + sqrt(y1 - 2)")
    with pytest.raises(DomainError) as info:
        f.real((0, 0, 1, 1))
    assert info.value.subexpr == "sqrt(y1 - 2)"
    with pytest.raises(DomainError) as info:
        f((0, 0, 1, 1), 3)
    assert info.value.subexpr == "sqrt(y1 - 2)"


def test_division_by_zero_is_domain_error():
    f = FieldDef.from_source("f", "y1/(x1 - x2)")
    with pytest.raises(DomainError):
        f.real((0.5, 0.5, 1, 1))


def test_lets_and_params():
    f = FieldDef.from_source("f", "k*u^2", {"k": 3.0}, {"u": "y1 + x2"})
    assert f.real((0, 1, 2, 0)) == 27.0
    assert f((0, 1, 2, 0), 4).value == pytest.approx(27.0)
    with pytest.raises(UnknownIdentifier):
        FieldDef.from_source("f", "u", {}, {"u": "v + 1"})


def test_degree_zero_jet_equals_real_value():
    F, phi = stock.funk_fields()
    p = (0.1, -0.2, 0.9, 1.3)
    assert F(p, 0).value == pytest.approx(F.real(p), rel=1e-15)
    assert phi(p, 0).value == pytest.approx(phi.real(p), rel=1e-15)


def test_funk_factor_known_value():
    _, phi = stock.funk_fields()
    assert phi.real((0, 0, 1, 1)) == pytest.approx(10 * math.sqrt(2) / 3, rel=1e-14)


def test_funk_metric_homogeneity():
    F, phi = stock.funk_fields()
    p = (0.1, -0.2, 0.9, 1.3)
    assert homogeneity_defect(F, p, 1.0) < 1e-14
    assert homogeneity_defect(phi, p, 0.0) < 1e-14


def test_berwald_rund_fields_parse_and_evaluate():
    F, phi = stock.berwald_rund_fields()
    p = (0.1, 1.0, 0.8, 1.2)
    assert F.real(p) > 0
    assert math.isfinite(phi.real(p))
    assert homogeneity_defect(F, p, 1.0) < 1e-14
    assert homogeneity_defect(phi, p, 0.0) < 1e-13


def test_printer_is_canonical():
    assert to_source(parse("((x1))+(-(y1))")) == "x1 + -y1"
    assert to_source(parse("(-x1)^2")) == "(-x1)^2"

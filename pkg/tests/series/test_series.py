"""
Tests for rationals, y-polynomials, truncated rings and the series core.
"""
import random
from fractions import Fraction

import pytest

import corrclass

F = Fraction


def test_rational_format_integer_and_fraction():
    assert corrclass.rational_format(Fraction(6, 3)) == '2'
    assert corrclass.rational_format(Fraction(-1, 30)) == '-1/30'
    assert corrclass.rational_parse(' 3/4 ') == Fraction(3, 4)


def test_rational_parse_rejects_garbage():
    with pytest.raises(corrclass.DomainError):
        corrclass.rational_parse('1/0')


def test_binomial_ext_negative_top():
    """C(-1, 2) = (-1)(-2)/2"""
    assert corrclass.binomial_ext(-1, 2) == 1
    assert corrclass.binomial_ext(F(1, 2), 2) == F(-1, 8)
    assert corrclass.binomial_ext(5, -1) == 0


def test_ypoly_drops_trailing_zeros():
    p = corrclass.ypoly(1, 0, 0)
    assert p == corrclass.YPOLY_ONE
    assert corrclass.ypoly_degree(corrclass.YPOLY_ZERO) == -1


def test_ypoly_mul_and_eval():
    p = corrclass.ypoly(1, 1)
    square = corrclass.ypoly_mul(p, p)
    assert square == corrclass.ypoly(1, 2, 1)
    assert corrclass.ypoly_eval(square, -1) == 0
    assert corrclass.ypoly_format(square) == '1 + 2 * y^1 + 1 * y^2'


def test_bernoulli_numbers_plus_convention():
    assert corrclass.bernoulli_numbers(4) == (1, F(1, 2), F(1, 6), 0, F(-1, 30))


def test_todd_and_lclass_coefficients():
    assert corrclass.SERIES_TODD.coefficient(1) == corrclass.ypoly(F(1, 2))
    assert corrclass.SERIES_TODD.coefficient(2) == corrclass.ypoly(F(1, 12))
    assert corrclass.SERIES_LCLASS.coefficient(1) == corrclass.YPOLY_ZERO
    assert corrclass.SERIES_LCLASS.coefficient(2) == corrclass.ypoly(F(1, 3))


@pytest.mark.parametrize('value,expected', [(-1, 1), (0, F(1, 2)), (1, 0)])
def test_hirzebruch_linear_coefficient_specializes(value, expected):
    """Linear coefficient of the Hirzebruch series at y = -1, 0, 1"""
    coefficient = corrclass.SERIES_HIRZEBRUCH.coefficient(1)
    assert corrclass.ypoly_eval(coefficient, value) == expected


def test_ring_truncation():
    ring = corrclass.ring_make((3,))
    h = corrclass.ring_generator(ring, 0)
    assert corrclass.ring_is_zero(corrclass.ring_pow(h, 3))
    assert corrclass.ring_monomials(corrclass.ring_make((2, 2))) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_ring_rejects_mismatched_rings():
    a = corrclass.ring_one(corrclass.ring_make((2,)))
    b = corrclass.ring_one(corrclass.ring_make((3,)))
    with pytest.raises(corrclass.StructuralError):
        corrclass.ring_add(a, b)


def test_ring_arith_dispatch():
    ring = corrclass.ring_make((3,))
    h = corrclass.ring_generator(ring, 0)
    assert corrclass.ring_arith(h, h, 'mul') == corrclass.ring_monomial(ring, (2,))
    assert corrclass.ring_arith(h, corrclass.ypoly(0, 1), 'scalar_mul') == \
        corrclass.ring_monomial(ring, (1,), corrclass.YPOLY_Y)
    with pytest.raises(corrclass.StructuralError):
        corrclass.ring_arith(h, h, 'div')


def test_series_substitute_needs_nilpotent_argument():
    ring = corrclass.ring_make((3,))
    with pytest.raises(corrclass.DomainError):
        corrclass.series_substitute(corrclass.SERIES_EXP, corrclass.ring_one(ring))


def test_series_exp_of_generator():
    ring = corrclass.ring_make((3,))
    h = corrclass.ring_generator(ring, 0)
    expected = corrclass.ring_element(ring, {(0,): 1, (1,): 1, (2,): F(1, 2)})
    assert corrclass.series_substitute(corrclass.SERIES_EXP, h) == expected


def test_invert_unit():
    ring = corrclass.ring_make((3,))
    u = corrclass.ring_element(ring, {(0,): 1, (1,): 1})
    inverse = corrclass.invert_unit(u)
    assert inverse == corrclass.ring_element(ring, {(0,): 1, (1,): -1, (2,): 1})
    assert corrclass.ring_mul(u, inverse) == corrclass.ring_one(ring)


def test_invert_unit_rejects_y_constant():
    ring = corrclass.ring_make((2,))
    with pytest.raises(corrclass.DomainError):
        corrclass.invert_unit(corrclass.ring_scalar(ring, corrclass.YPOLY_Y))


def test_series_line_bundle_matches_powers():
    """(1 - t)^-2 = 1 + 2t + 3t^2 + ..."""
    series = corrclass.series_line_bundle(2)
    assert [corrclass.ypoly_constant_term(series.coefficient(j)) for j in range(4)] == [1, 2, 3, 4]


def test_series_product_exp_times_exp():
    product = corrclass.series_product(corrclass.SERIES_EXP, corrclass.SERIES_EXP)
    assert product.coefficient(3) == corrclass.ypoly(F(8, 6))


def test_specializations_pass(tally):
    corrclass.check_specializations(tally, random.Random(11), count=20, max_dim=3)
    result = tally.result()
    assert result.cases == 60
    assert result.failures == ()

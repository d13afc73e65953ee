import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from memdp_solve.dyadic import (Interval, ceil_hi, ceil_log2, entropy_bounds,
                                floor_log2, log2_bounds, sqrt_bounds)


positive_fractions = st.fractions(min_value=Fraction(1, 10 ** 6),
                                  max_value=Fraction(10 ** 6))


def test_interval_arithmetic():
    a = Interval(Fraction(1, 2), Fraction(3, 4))
    b = Interval(Fraction(-1, 4), Fraction(1, 8))
    assert (a + b).lo == Fraction(1, 4)
    assert (a - b).hi == Fraction(1)
    assert abs(b) == Interval(Fraction(0), Fraction(1, 4))
    assert b.square().lo == 0
    with pytest.raises(ZeroDivisionError):
        a.divide(b)
    assert Fraction(2, 3) in Interval(Fraction(1, 2), Fraction(3, 4))


@given(positive_fractions)
def test_floor_ceil_log2(x):
    k = floor_log2(x)
    assert Fraction(2) ** k <= x < Fraction(2) ** (k + 1)
    c = ceil_log2(x)
    assert c - 1 < math.log2(float(x)) + 1e-9
    assert Fraction(2) ** (c - 1) < x <= Fraction(2) ** c


@given(positive_fractions)
def test_log2_bounds_enclose(x):
    iv = log2_bounds(x, 48)
    assert iv.width <= Fraction(1, 2 ** 46)
    assert iv.lo <= math.log2(float(x)) + 1e-9
    assert iv.hi >= math.log2(float(x)) - 1e-9


def test_log2_exact_on_powers_of_two():
    for e in (-5, -1, 0, 3, 17):
        iv = log2_bounds(Fraction(2) ** e)
        assert iv.lo == iv.hi == e


@given(positive_fractions)
def test_sqrt_bounds_enclose(x):
    iv = sqrt_bounds(x, 48)
    assert iv.lo * iv.lo <= x <= iv.hi * iv.hi
    assert iv.width <= Fraction(1, 2 ** 40)


def test_sqrt_exact_on_squares():
    iv = sqrt_bounds(Fraction(9, 16))
    assert iv.lo == iv.hi == Fraction(3, 4)


def test_ceil_hi():
    assert ceil_hi(Interval(Fraction(5, 2), Fraction(13, 4))) == 4
    assert ceil_hi(Interval.exact(3)) == 3


def test_entropy_examples():
    assert entropy_bounds([Fraction(1)]).is_exact()
    assert entropy_bounds([Fraction(1)]).lo == 0
    four = entropy_bounds([Fraction(1, 4)] * 4)
    assert four.lo == four.hi == 2
    mixed = entropy_bounds([Fraction(1, 4), Fraction(3, 4)])
    expected = 2 - Fraction(3, 4) * math.log2(3)
    assert mixed.width <= Fraction(1, 2 ** 30)
    assert abs(float(mixed) - float(expected)) < 1e-9

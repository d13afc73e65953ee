"""Certified dyadic interval arithmetic for the few irrational quantities.

Everything else in this package is exact rational arithmetic. Logarithms,
square roots, and entropies are irrational in general, so they are enclosed
in intervals [lo, hi] of dyadic rationals with outward rounding. Integer
bounds derived from interval endpoints (ceilings of upper bounds) are then
safe over-approximations.

Logarithms are base 2 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class Interval:
    """Closed interval of rationals, lo <= hi."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @staticmethod
    def exact(x) -> "Interval":
        f = Fraction(x)
        return Interval(f, f)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def is_exact(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def __add__(self, other: "Interval") -> "Interval":
        other = _coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval") -> "Interval":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Interval":
        return _coerce(other) + (-self)

    def __mul__(self, other: "Interval") -> "Interval":
        other = _coerce(other)
        prods = (self.lo * other.lo, self.lo * other.hi,
                 self.hi * other.lo, self.hi * other.hi)
        return Interval(min(prods), max(prods))

    __rmul__ = __mul__

    def __abs__(self) -> "Interval":
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(Fraction(0), max(-self.lo, self.hi))

    def square(self) -> "Interval":
        a = abs(self)
        return Interval(a.lo * a.lo, a.hi * a.hi)

    def divide(self, other: "Interval") -> "Interval":
        other = _coerce(other)
        if other.lo <= 0 <= other.hi:
            raise ZeroDivisionError("divisor interval contains zero")
        inv = Interval(1 / other.hi, 1 / other.lo)
        return self * inv

    def __truediv__(self, other) -> "Interval":
        return self.divide(_coerce(other))

    def __float__(self) -> float:
        return float(self.midpoint())


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.exact(x)


def _cmp_pow2(x: Fraction, m: int) -> int:
    """Compare x with 2**m exactly."""
    lhs = x.numerator << (-m if m < 0 else 0)
    rhs = x.denominator << (m if m > 0 else 0)
    return (lhs > rhs) - (lhs < rhs)


def floor_log2(x: Fraction) -> int:
    if x <= 0:
        raise ValueError("floor_log2 requires a positive argument")
    k = x.numerator.bit_length() - x.denominator.bit_length()
    if _cmp_pow2(x, k) < 0:
        k -= 1
    elif _cmp_pow2(x, k + 1) >= 0:
        k += 1
    assert _cmp_pow2(x, k) >= 0 and _cmp_pow2(x, k + 1) < 0
    return k


def ceil_log2(x: Fraction) -> int:
    k = floor_log2(x)
    return k if _cmp_pow2(x, k) == 0 else k + 1


def is_power_of_two(x: Fraction) -> bool:
    if x <= 0:
        return False
    n, d = x.numerator, x.denominator
    return (n & (n - 1)) == 0 and (d & (d - 1)) == 0


def _shift(x: Fraction, e: int) -> Fraction:
    """x * 2**e, exact."""
    if e >= 0:
        return Fraction(x.numerator << e, x.denominator)
    return Fraction(x.numerator, x.denominator << -e)


def _frac_log2_digits(m: int, prec: int, bits: int, up: bool) -> int:
    """Binary digits of log2(m / 2**prec) for a mantissa in [1, 2).

    Classic squaring extraction with directed rounding: the returned
    accumulator acc satisfies acc/2**bits <= log2(y) for up=False and
    acc/2**bits >= ... for up=True once the caller adds 1 (see log2_bounds).
    """
    acc = 0
    top = 1 << (prec + 1)
    for _ in range(bits):
        m = m * m
        m = -((-m) >> prec) if up else m >> prec
        acc <<= 1
        if m >= top:
            acc |= 1
            m = -((-m) >> 1) if up else m >> 1
    return acc


def log2_bounds(x: Fraction, bits: int = 64) -> Interval:
    """Certified enclosure of log2(x); exact for integer powers of two."""
    if x <= 0:
        raise ValueError("log2 requires a positive argument")
    if is_power_of_two(x):
        return Interval.exact(floor_log2(x))
    k = floor_log2(x)
    y = _shift(x, -k)  # in (1, 2)
    prec = 2 * bits + 8
    scale = 1 << prec
    num, den = y.numerator, y.denominator
    m_lo = (num * scale) // den
    m_hi = -((-num * scale) // den)
    acc_lo = _frac_log2_digits(m_lo, prec, bits, up=False)
    acc_hi = _frac_log2_digits(m_hi, prec, bits, up=True) + 1
    return Interval(k + Fraction(acc_lo, 1 << bits), k + Fraction(acc_hi, 1 << bits))


def log2_interval(iv: Interval, bits: int = 64) -> Interval:
    """Enclosure of log2 over an interval of positive rationals."""
    if iv.lo <= 0:
        raise ValueError("log2 requires a positive interval")
    return Interval(log2_bounds(iv.lo, bits).lo, log2_bounds(iv.hi, bits).hi)


def sqrt_bounds(x: Fraction, bits: int = 64) -> Interval:
    """Certified enclosure of sqrt(x); exact for perfect squares."""
    if x < 0:
        raise ValueError("sqrt requires a nonnegative argument")
    if x == 0:
        return Interval.exact(0)
    t = x.numerator * x.denominator
    scaled = t << (2 * bits)
    r = math.isqrt(scaled)
    den = x.denominator << bits
    lo = Fraction(r, den)
    if r * r == scaled:
        return Interval(lo, lo)
    return Interval(lo, Fraction(r + 1, den))


def ceil_hi(iv: Interval) -> int:
    """Smallest integer >= the certified upper bound (a safe ceiling)."""
    return math.ceil(iv.hi)


def entropy_bounds(weights, precision: int = 30) -> Interval:
    """Enclosure of -sum w*log2(w) over the positive weights.

    The 0*log 0 term is 0 by convention. Interval width <= 2**-precision.
    """
    bits = precision + 8
    total = Interval.exact(0)
    for w in weights:
        w = Fraction(w)
        if w < 0 or w > 1:
            raise ValueError("entropy weights must lie in [0, 1]")
        if w == 0 or w == 1:
            continue
        lw = log2_bounds(w, bits)
        total += Interval(-w * lw.hi, -w * lw.lo)
    return total

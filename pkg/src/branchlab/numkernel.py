"""Exact rational arithmetic and base-q digit extraction primitives.

Everything downstream (sequence engines, carry analysis, checkers, automata)
is built on the operations here.  The number type is `fractions.Fraction`,
aliased as `ExactRational`: arbitrary precision, always in canonical reduced
form, value equality.  No floating point appears in any checked identity.

Positions follow the radix convention: position j is the coefficient of q^j,
so negative j addresses fractional digits.  Infinite fractional expansions
(1/3 in base 2 is periodic) are never materialized; every operation addresses
a single position or an explicit bounded window.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ExactRational = Fraction


class InternalCheckError(AssertionError):
    """An unconditional arithmetic identity failed: implementation bug."""


def rational(text: str) -> Fraction:
    """Parse 'a/b' or integer text into an exact rational.

    Decimal floats are rejected on purpose: exact inputs only.
    """
    s = text.strip()
    if "." in s or "e" in s.lower():
        raise ValueError(f"exact rational required, got {text!r} (use 'a/b' or an integer)")
    if "/" in s:
        num, _, den = s.partition("/")
        return Fraction(int(num), int(den))
    return Fraction(int(s))


def format_rational(x: Fraction) -> str:
    """Inverse of rational(): 'a/b', or 'a' when the denominator is 1."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _check_base(q: int) -> None:
    if not isinstance(q, int) or q < 2:
        raise ValueError(f"base must be an integer >= 2, got {q}")


def _check_nonnegative(x: Fraction) -> None:
    if x < 0:
        raise ValueError(f"nonnegative value required, got {format_rational(Fraction(x))}")


def floor_scale(x: Fraction, q: int, k: int) -> int:
    """floor(x / q**k), exactly.  Negative k multiplies instead of dividing."""
    _check_base(q)
    _check_nonnegative(x)
    x = Fraction(x)
    if k >= 0:
        return x.numerator // (x.denominator * q**k)
    return (x.numerator * q**-k) // x.denominator


def frac_scale(x: Fraction, q: int, k: int) -> Fraction:
    """Fractional part of x / q**k, an exact rational in [0, 1).

    Reconstruction: q**k * (floor_scale + frac_scale) == x.
    """
    scaled = Fraction(x) / Fraction(q) ** k
    return scaled - floor_scale(x, q, k)


def digit_at(x: Fraction, q: int, j: int) -> int:
    """Base-q digit of x at position j (coefficient of q**j)."""
    return floor_scale(x, q, j) % q


@dataclass(frozen=True)
class DigitExpansion:
    """A bounded window of base-q digits, digits[i] at position j_lo + i."""

    base: int
    j_lo: int
    j_hi: int
    digits: tuple[int, ...]

    def digit(self, j: int) -> int:
        if not self.j_lo <= j <= self.j_hi:
            raise IndexError(f"position {j} outside window [{self.j_lo}, {self.j_hi}]")
        return self.digits[j - self.j_lo]

    def value(self) -> Fraction:
        """Sum of digits[j] * base**j over the window."""
        total = Fraction(0)
        for i, d in enumerate(self.digits):
            total += d * Fraction(self.base) ** (self.j_lo + i)
        return total


def digits_window(x: Fraction, q: int, j_lo: int, j_hi: int) -> DigitExpansion:
    """Digits of x at every position j in [j_lo, j_hi], low position first."""
    _check_base(q)
    _check_nonnegative(x)
    if j_lo > j_hi:
        raise ValueError(f"inverted window: [{j_lo}, {j_hi}]")
    # One scaled floor, then peel digits by divmod: O(width) big-int ops.
    x = Fraction(x)
    lo_floor = floor_scale(x, q, j_lo)
    digs = []
    acc = lo_floor
    for _ in range(j_hi - j_lo + 1):
        acc, d = divmod(acc, q)
        digs.append(d)
    exp = DigitExpansion(base=q, j_lo=j_lo, j_hi=j_hi, digits=tuple(digs))
    if exp.digit(j_hi) != digit_at(x, q, j_hi):  # cheap self-check on the top digit
        raise InternalCheckError("digit window disagrees with digit_at")
    return exp


def int_valuation(m: int, q: int) -> int:
    """Largest k with q**k dividing m, for m >= 1 (q-adic valuation)."""
    _check_base(q)
    if not isinstance(m, int) or m < 1:
        raise ValueError(f"valuation requires a positive integer, got {m}")
    if q == 2:
        return (m & -m).bit_length() - 1
    k = 0
    while m % q == 0:
        m //= q
        k += 1
    return k

"""Base-q carry analysis for the addition alpha*x + beta*(x/q) = p*x/q.

Each carry is computed positionally from a closed form, so any single radix
position is addressable in O(1) big-number operations without materializing
an infinite fractional expansion; the sequential column recurrence is used
only as a cross-check over explicit windows.

The identities asserted here are unconditional arithmetic facts; a failure
is an implementation bug, raised as InternalCheckError with the failing
position.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .numkernel import (
    ExactRational,
    InternalCheckError,
    digit_at,
    digits_window,
    floor_scale,
    format_rational,
    frac_scale,
)
from .branch import BranchParams


@dataclass(frozen=True)
class CarryRow:
    """Digit rows and carries of one scaled addition over a window.

    src_digits[i], dst_digits[i], carries[i] sit at position j_lo + i;
    dst digits are those of p*source/q.
    """

    q: int
    alpha: int
    beta: int
    source: Fraction
    j_lo: int
    j_hi: int
    src_digits: tuple[int, ...]
    dst_digits: tuple[int, ...]
    carries: tuple[int, ...]


def carry_at(x: ExactRational, params: BranchParams, j: int) -> int:
    """Carry into position j: floor((beta*s_j + p*{x/q^j}) / q), in [0, q)."""
    x = Fraction(x)
    s_j = digit_at(x, params.q, j)
    value = (params.beta * s_j + params.p * frac_scale(x, params.q, j)) / params.q
    carry = value.numerator // value.denominator
    if not 0 <= carry < params.q:
        raise InternalCheckError(
            f"carry bound violated at j = {j} for x = {format_rational(x)}: {carry}"
        )
    return carry


def transition_report(x: ExactRational, params: BranchParams, j_lo: int, j_hi: int) -> CarryRow:
    """Build the full carry row over [j_lo, j_hi] and assert every identity.

    Asserted, as exact rational equalities:
      column rule     beta*s_{j+1} + alpha*s_j + d_j = s'_j + q*d_{j+1}
                      (interior positions only, so truncation cannot lie)
      carry recurrence d_{j+1} = floor((beta*s_{j+1} + alpha*s_j + d_j)/q)
      frac identity   {p*x/q^{j+1}} = (p/q){x/q^j} - d_j + (beta/q) s_j
      floor identity  floor(p*x/q^{j+1}) = (p/q)floor(x/q^j) + d_j - (beta/q) s_j
      carry bound     0 <= d_j < q
    """
    x = Fraction(x)
    if x < 0:
        raise ValueError(f"nonnegative source required, got {format_rational(x)}")
    if j_lo > j_hi:
        raise ValueError(f"inverted window: [{j_lo}, {j_hi}]")
    q, p, beta = params.q, params.p, params.beta
    dst_value = p * x / q

    src = digits_window(x, q, j_lo, j_hi).digits
    dst = digits_window(dst_value, q, j_lo, j_hi).digits
    deltas = tuple(carry_at(x, params, j) for j in range(j_lo, j_hi + 1))

    for i, j in enumerate(range(j_lo, j_hi + 1)):
        lhs_frac = frac_scale(dst_value, q, j)
        rhs_frac = Fraction(p, q) * frac_scale(x, q, j) - deltas[i] + Fraction(beta * src[i], q)
        if lhs_frac != rhs_frac:
            raise InternalCheckError(f"frac identity fails at j = {j} for x = {format_rational(x)}")
        lhs_floor = floor_scale(dst_value, q, j)
        rhs_floor = Fraction(p, q) * floor_scale(x, q, j) + deltas[i] - Fraction(beta * src[i], q)
        if lhs_floor != rhs_floor:
            raise InternalCheckError(f"floor identity fails at j = {j} for x = {format_rational(x)}")
        if i + 1 <= j_hi - j_lo:
            column = beta * src[i + 1] + params.alpha * src[i] + deltas[i]
            if column != dst[i] + q * deltas[i + 1]:
                raise InternalCheckError(
                    f"column rule fails at j = {j} for x = {format_rational(x)}"
                )
            if deltas[i + 1] != column // q:
                raise InternalCheckError(
                    f"carry recurrence fails at j = {j} for x = {format_rational(x)}"
                )

    return CarryRow(
        q=q,
        alpha=params.alpha,
        beta=beta,
        source=x,
        j_lo=j_lo,
        j_hi=j_hi,
        src_digits=src,
        dst_digits=dst,
        carries=deltas,
    )

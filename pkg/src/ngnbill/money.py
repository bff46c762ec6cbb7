"""Fixed-point money arithmetic.

All monetary values are decimal.Decimal. Rating keeps amounts at their
natural exact scale; quantization to the 4-decimal money scale happens
only where an amount becomes billable (gross charges, content fees,
operator shares). Presentation rounding to 2 decimals is applied solely
when rendering invoices for humans.
"""

from __future__ import annotations

from decimal import Decimal, getcontext, ROUND_HALF_EVEN, ROUND_FLOOR
from fractions import Fraction
from typing import Iterable, Sequence, Union

# High precision so products of prices, distances, durations and modifier
# chains stay exact (operands are finite decimals well under this width).
getcontext().prec = 50

NumberLike = Union[str, int, Decimal]

CENT4 = Decimal("0.0001")
CENT2 = Decimal("0.01")


def D(value: NumberLike) -> Decimal:
    """Convert to Decimal. Floats are refused: money must not pass through
    binary floating point."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        raise TypeError("float is not an acceptable money source; use str")
    return Decimal(str(value))


def q4(value: NumberLike) -> Decimal:
    """Quantize to the internal money scale (4 decimals, half-even)."""
    return D(value).quantize(CENT4, rounding=ROUND_HALF_EVEN)


def q2(value: NumberLike, digits: int = 2) -> Decimal:
    """Presentation rounding (half-even, default 2 decimals)."""
    return D(value).quantize(Decimal(1).scaleb(-digits), rounding=ROUND_HALF_EVEN)


def fmt4(value: NumberLike) -> str:
    """Render with exactly 4 fractional digits, for files on disk."""
    return format(q4(value), "f")


def fmt2(value: NumberLike, digits: int = 2) -> str:
    return format(q2(value, digits), "f")


def money_sum(values: Iterable[Decimal]) -> Decimal:
    total = Decimal(0)
    for v in values:
        total += v
    return total


def q4_fraction(value: Fraction) -> Decimal:
    """Round an exact rational to the 4-decimal money scale, half-even.

    Done in integer space so the result does not depend on context
    precision.
    """
    units = value * 10_000
    floor_units = units.numerator // units.denominator
    remainder = units - floor_units
    half = Fraction(1, 2)
    if remainder > half or (remainder == half and floor_units % 2 != 0):
        floor_units += 1
    return Decimal(floor_units).scaleb(-4)


def allocate(total: Decimal, weights: Sequence[Fraction]) -> list[Decimal]:
    """Split `total` (a 4-decimal amount) into shares proportional to
    `weights`, using largest-remainder rounding at the 0.0001 quantum so
    the shares sum to `total` exactly.

    Zero total yields all-zero shares. A zero weight sum falls back to an
    equal split so the total is still conserved. Remainder ties go to the
    earlier position.
    """
    if not weights:
        raise ValueError("allocate needs at least one weight")
    if any(w < 0 for w in weights):
        raise ValueError("allocation weights must be non-negative")
    total = D(total)
    if total != total.quantize(CENT4, rounding=ROUND_FLOOR):
        raise ValueError("allocate expects a 4-decimal total")
    if total < 0:
        raise ValueError("allocate expects a non-negative total")

    weight_sum = sum(weights, Fraction(0))
    if weight_sum == 0:
        weights = [Fraction(1)] * len(weights)
        weight_sum = Fraction(len(weights))

    total_units = int(total.scaleb(4))
    quotas = [Fraction(total_units) * w / weight_sum for w in weights]
    floors = [q.numerator // q.denominator for q in quotas]
    leftover = total_units - sum(floors)
    # Hand out one quantum per largest fractional remainder.
    order = sorted(range(len(quotas)),
                   key=lambda i: (quotas[i] - floors[i], -i),
                   reverse=True)
    for i in order[:leftover]:
        floors[i] += 1
    return [Decimal(u).scaleb(-4) for u in floors]

"""Money helpers: quantization and largest-remainder allocation."""

from decimal import Decimal
from fractions import Fraction

import pytest

from ngnbill.money import D, allocate, fmt4, q2, q4, q4_fraction


def test_q4_half_even():
    assert q4("0.00005") == Decimal("0.0000")
    assert q4("0.00015") == Decimal("0.0002")
    assert q4("0.00025") == Decimal("0.0002")
    assert q4("1.23456") == Decimal("1.2346")


def test_q2_presentation():
    assert q2("61.7550") == Decimal("61.76")
    assert q2("61.7650") == Decimal("61.76")


def test_fmt4_exact_digits():
    assert fmt4("60") == "60.0000"
    assert fmt4("1.75") == "1.7500"


def test_floats_are_refused():
    with pytest.raises(TypeError):
        D(0.1)


def test_allocate_single():
    assert allocate(Decimal("10.0000"), [Fraction(1)]) == [Decimal("10.0000")]


def test_allocate_even_split():
    shares = allocate(Decimal("120.0000"), [Fraction(1), Fraction(1)])
    assert shares == [Decimal("60.0000"), Decimal("60.0000")]


def test_allocate_conserves_total_with_awkward_weights():
    total = Decimal("0.0001")
    shares = allocate(total, [Fraction(1), Fraction(1), Fraction(1)])
    assert sum(shares) == total
    assert sorted(shares) == [Decimal("0.0000"), Decimal("0.0000"), Decimal("0.0001")]


def test_allocate_zero_total():
    assert allocate(Decimal("0.0000"), [Fraction(3), Fraction(7)]) == [
        Decimal("0.0000"), Decimal("0.0000")]


def test_allocate_zero_weights_falls_back_to_equal_split():
    shares = allocate(Decimal("9.0000"), [Fraction(0), Fraction(0), Fraction(0)])
    assert sum(shares) == Decimal("9.0000")
    assert shares == [Decimal("3.0000")] * 3


def test_allocate_proportionality():
    shares = allocate(Decimal("100.0000"), [Fraction(3), Fraction(1)])
    assert shares == [Decimal("75.0000"), Decimal("25.0000")]


def test_allocate_many_random_cases_conserve():
    from ngnbill.simulate import SplitMix64
    rng = SplitMix64(7)
    for _ in range(500):
        n = rng.between(1, 6)
        total = Decimal(rng.below(10_000_000)).scaleb(-4)
        weights = [Fraction(rng.below(1000)) for _ in range(n)]
        shares = allocate(total, weights)
        assert sum(shares) == total
        assert all(s >= 0 for s in shares)


def test_q4_fraction_matches_decimal_quantize():
    cases = [Fraction(1, 3), Fraction(25, 100000), Fraction(15, 100000),
             Fraction(7, 2), Fraction(0), Fraction(12345, 7)]
    for fr in cases:
        via_decimal = q4(Decimal(fr.numerator) / Decimal(fr.denominator))
        assert q4_fraction(fr) == via_decimal

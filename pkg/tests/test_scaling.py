import math

import pytest

from margmap import Scaled, scaled_max, scaled_product


def test_from_float_round_trips():
    for x in [0.0, 1.0, 0.375, 1e-300, 1e300, 123456.789]:
        assert Scaled.from_float(x).to_float() == x


def test_normalized_mantissa_range():
    s = Scaled(48.0, 3).normalized()
    assert 0.5 <= s.mantissa < 1.0
    assert s.to_float() == 48.0 * 2.0 ** 3


def test_rejects_negative_and_non_finite():
    with pytest.raises(ValueError):
        Scaled(-1.0, 0)
    with pytest.raises(ValueError):
        Scaled(math.inf, 0)
    with pytest.raises(ValueError):
        Scaled.from_float(-0.5)


def test_multiplication_adds_exponents():
    a, b = Scaled(0.5, 10), Scaled(0.5, -4)
    assert (a * b).to_float() == (0.5 * 2.0 ** 10) * (0.5 * 2.0 ** -4)


def test_huge_values_stay_ordered():
    # far beyond double range in both directions
    big = Scaled(0.75, 5000)
    bigger = Scaled(0.8, 5000)
    small = Scaled(0.75, -5000)
    assert small < big < bigger
    assert big.to_float() == math.inf
    assert small.to_float() == 0.0


def test_comparison_handles_unnormalized_inputs():
    assert Scaled(4.0, 0).equals(Scaled(0.5, 3))
    assert Scaled(0.25, 4) < Scaled(0.75, 3)


def test_zero_ordering_and_ratio():
    z = Scaled.zero()
    assert z < Scaled(0.5, -9999)
    assert z.ratio_to(z) == 1.0
    assert Scaled(0.5, 0).ratio_to(z) == math.inf
    assert z.ratio_to(Scaled(0.5, 0)) == 0.0


def test_ratio_to_across_extreme_exponents():
    assert Scaled(0.5, 9000).ratio_to(Scaled(0.5, 0)) == math.inf
    assert Scaled(0.5, -9000).ratio_to(Scaled(0.5, 0)) == 0.0
    assert Scaled(0.5, 7).ratio_to(Scaled(0.5, 7)) == 1.0


def test_scaled_max_and_product():
    vals = [Scaled(0.5, 3), Scaled(0.9, 2), Scaled(0.6, 3)]
    assert scaled_max(vals).equals(Scaled(0.6, 3))
    prod = scaled_product(vals)
    assert prod.to_float() == pytest.approx(4.0 * 3.6 * 4.8)
    with pytest.raises(ValueError):
        scaled_max([])

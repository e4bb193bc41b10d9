"""Non-negative scalars kept as (mantissa, base-2 exponent) pairs.

Partition-function values on larger models overflow or underflow doubles, so every
quantity that crosses a module boundary is carried as mantissa * 2**exponent with the
mantissa renormalized into [0.5, 1). Zero is (0.0, 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_HUGE_EXP = 4000  # beyond any double; ldexp would raise OverflowError


@dataclass(frozen=True)
class Scaled:
    """A non-negative value mantissa * 2**exponent."""

    mantissa: float
    exponent: int = 0

    def __post_init__(self):
        if not (self.mantissa >= 0.0) or math.isinf(self.mantissa) or math.isnan(self.mantissa):
            raise ValueError(f"mantissa must be finite and non-negative, got {self.mantissa}")

    @staticmethod
    def from_float(x: float) -> "Scaled":
        if x < 0:
            raise ValueError("scaled values are non-negative")
        m, e = math.frexp(x)
        return Scaled(m, e)

    @staticmethod
    def zero() -> "Scaled":
        return Scaled(0.0, 0)

    def normalized(self) -> "Scaled":
        if self.mantissa == 0.0:
            return Scaled(0.0, 0)
        m, e = math.frexp(self.mantissa)
        return Scaled(m, self.exponent + e)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def to_float(self) -> float:
        """Plain double where representable; +inf / 0.0 past the exponent range."""
        n = self.normalized()
        if n.is_zero:
            return 0.0
        if n.exponent > _HUGE_EXP:
            return math.inf
        if n.exponent < -_HUGE_EXP:
            return 0.0
        try:
            return math.ldexp(n.mantissa, n.exponent)
        except OverflowError:
            return math.inf

    def __mul__(self, other: "Scaled") -> "Scaled":
        return Scaled(self.mantissa * other.mantissa, self.exponent + other.exponent).normalized()

    def scale_by(self, x: float) -> "Scaled":
        return Scaled(self.mantissa * x, self.exponent).normalized()

    def _key(self):
        n = self.normalized()
        if n.is_zero:
            return (0, -math.inf, 0.0)
        return (1, n.exponent, n.mantissa)

    def __lt__(self, other: "Scaled") -> bool:
        return self._key() < other._key()

    def __le__(self, other: "Scaled") -> bool:
        return self._key() <= other._key()

    def equals(self, other: "Scaled") -> bool:
        return self._key() == other._key()

    def ratio_to(self, other: "Scaled") -> float:
        """self / other as a double; inf when other is zero and self is not, 1.0 for 0/0."""
        a, b = self.normalized(), other.normalized()
        if b.is_zero:
            return 1.0 if a.is_zero else math.inf
        if a.is_zero:
            return 0.0
        de = a.exponent - b.exponent
        if de > _HUGE_EXP:
            return math.inf
        if de < -_HUGE_EXP:
            return 0.0
        return math.ldexp(a.mantissa / b.mantissa, de)

    def __repr__(self):
        return f"Scaled({self.mantissa!r}, {self.exponent})"


def scaled_max(values) -> Scaled:
    """Maximum of an iterable of Scaled values (at least one required)."""
    it = iter(values)
    try:
        best = next(it)
    except StopIteration:
        raise ValueError("scaled_max of empty iterable") from None
    for v in it:
        if best < v:
            best = v
    return best


def scaled_product(values) -> Scaled:
    out = Scaled(1.0, 0)
    for v in values:
        out = out * v
    return out

"""Exact rational arithmetic backend.

All probabilities, rewards and polynomial coefficients are arbitrary
precision rationals.  gmpy2's mpq is used when available (it is roughly an
order of magnitude faster than fractions.Fraction); the stdlib Fraction is a
drop-in fallback.  Engines that opt into float mode convert at the boundary.
"""

from __future__ import annotations

from typing import Union

try:
    from gmpy2 import mpq as _mpq

    _BACKEND = "gmpy2"

    def rational(value, denom=None):
        if denom is not None:
            return _mpq(value, denom)
        if isinstance(value, float):
            # floats are rejected on purpose: 0.1 as a float is not 1/10
            raise TypeError("pass floats as strings to keep them exact")
        return _mpq(value)

    _RAT_TYPES = (type(_mpq(0)), int)

except ImportError:  # pragma: no cover - exercised only without gmpy2
    from fractions import Fraction as _Fraction

    _BACKEND = "fractions"

    def rational(value, denom=None):
        if denom is not None:
            return _Fraction(value, denom)
        if isinstance(value, float):
            raise TypeError("pass floats as strings to keep them exact")
        if isinstance(value, str):
            value = value.strip()
            if "/" in value:
                num, den = value.split("/")
                return _Fraction(int(num), int(den))
            if "." in value or "e" in value or "E" in value:
                from decimal import Decimal

                return _Fraction(Decimal(value))
            return _Fraction(int(value))
        return _Fraction(value)

    _RAT_TYPES = (_Fraction, int)


Rat = Union[int, object]  # concrete type depends on the backend

ZERO = rational(0)
ONE = rational(1)

#: Sentinel for diverging expected rewards (target missed with positive
#: probability).  Compares greater than every rational.
INFINITY = float("inf")


def is_rational(value) -> bool:
    return isinstance(value, _RAT_TYPES)


def parse_rational(text: str):
    """Parse ``1/8``, ``0.125`` or ``3`` into an exact rational."""
    return rational(text.strip())


def rat_str(value) -> str:
    """Canonical text form: integers bare, otherwise ``num/den``."""
    if value == INFINITY:
        return "inf"
    return str(value)


def as_float(value) -> float:
    if value == INFINITY:
        return INFINITY
    return float(value)

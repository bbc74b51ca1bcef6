"""Dual numeric backend: binary64 floats or exact arbitrary-precision rationals.

A chain and every computation derived from it live entirely in one backend.
Rationals are plain ``fractions.Fraction`` values (canonical by construction);
floats are Python floats.  Infinity is ``math.inf`` in both backends: it only
ever tags recurrent states and never enters rational arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction

FLOAT = "float"
RATIONAL = "rational"
BACKENDS = (FLOAT, RATIONAL)

INF = math.inf

# Row-sum defect below this is renormalized away in the float backend;
# the rational backend accepts exact sums only.
ROW_SUM_TOLERANCE = 2.0 ** -40

# Float analogue of the exact 0/0 = 0 convention in relative differences:
# a numerator this small over a zero denominator counts as 0/0.
RELATIVE_ZERO_GUARD = 1e-300


def parse_value(token: str, backend: str):
    """Parse a probability/rate/reward token: decimal literal or num/den."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    try:
        if backend == RATIONAL:
            return Fraction(token)
        if "/" in token:
            num, den = token.split("/", 1)
            return int(num) / int(den)
        return float(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed numeric token {token!r}") from exc


def format_value(value) -> str:
    """Render a scalar for files and reports: ``num/den``, ``num``, repr, or ``inf``."""
    if value == INF:
        return "inf"
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def zero(backend: str):
    return Fraction(0) if backend == RATIONAL else 0.0


def one(backend: str):
    return Fraction(1) if backend == RATIONAL else 1.0


def to_float(value) -> float:
    if value == INF:
        return INF
    return float(value)


def exactify(value) -> Fraction:
    """Exact rational image of a scalar (floats convert bit-exactly)."""
    if isinstance(value, Fraction):
        return value
    return Fraction(value)

"""Shared number formatting: half-up percentage rounding for report tables."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal


def pct(fraction: float, places: int = 2) -> float:
    """Fraction in [0,1] -> percentage rounded half-up to `places` decimals."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(fraction * 100.0)).quantize(q, rounding=ROUND_HALF_UP))


def pct_str(fraction: float, places: int = 2) -> str:
    """Like pct() but formatted with a fixed number of decimals, e.g. '70.00'."""
    return f"{pct(fraction, places):.{places}f}"

"""Fraction-of-set counts shared by subset sampling and flip budgets."""

from decimal import ROUND_FLOOR, Decimal


def fraction_count(fraction: float, n: int) -> int:
    """
    floor(fraction * n), taken on the decimal the fraction was written as.

    0.29 * 100 is 28.999999999999996 in binary floating point; here it is 29.
    A fraction just under a grid point (0.3 - 1e-11 of 10) still floors down.
    """
    if n <= 0 or fraction <= 0.0:
        return 0
    exact = Decimal(repr(float(fraction))) * n
    return min(n, int(exact.to_integral_value(rounding=ROUND_FLOOR)))

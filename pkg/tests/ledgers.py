"""Zero ledgers shared by several test modules."""

from __future__ import annotations

from fractions import Fraction

from spiderweb.entire import EntireFunction, Kind, ZeroEntry, slow_growth_family
from spiderweb.xnum import ExtReal


def single_zero(p: int = 1, log_a: int = 10) -> EntireFunction:
    return EntireFunction((ZeroEntry(ExtReal(log_a), p),))


def two_zeros() -> EntireFunction:
    return EntireFunction((ZeroEntry(ExtReal(10), 1), ZeroEntry(ExtReal(25), 3)))


def slow_growth(count: int = 12) -> EntireFunction:
    return slow_growth_family(10**6, count)


def constructed_like() -> EntireFunction:
    d = Fraction(9, 20)
    return EntireFunction(
        (ZeroEntry.constructed(ExtReal(300), d), ZeroEntry.constructed(ExtReal(6000), d)),
        Kind.TRUNCATED,
    )


def mixed_multiplicity() -> EntireFunction:
    return EntireFunction(
        (ZeroEntry(ExtReal(5), 2), ZeroEntry(ExtReal(12), 7), ZeroEntry(ExtReal(40), 50))
    )


FIVE = {
    "single": single_zero,
    "two": two_zeros,
    "slow": slow_growth,
    "constructed": constructed_like,
    "mixed": mixed_multiplicity,
}


def quarter_delta_zero() -> EntireFunction:
    """One constructed zero (delta = 1/4) sitting on rung 6 of the R = 10 ladder."""
    return EntireFunction((ZeroEntry.constructed(ExtReal(3000), Fraction(1, 4)),))


def single_zero_mid_rung() -> EntireFunction:
    return EntireFunction((ZeroEntry(ExtReal(50), 10**6),))

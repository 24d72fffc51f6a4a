"""Exception types and the three-valued verdict shared by every module."""

from __future__ import annotations

import enum


class Verdict(enum.Enum):
    VERIFIED = "Verified"
    FALSIFIED = "Falsified"
    INDETERMINATE = "Indeterminate"
    VACUOUS = "Vacuous"

    @property
    def ok(self) -> bool:
        return self in (Verdict.VERIFIED, Verdict.VACUOUS)

    @staticmethod
    def combine(verdicts) -> "Verdict":
        """Worst verdict wins: Falsified > Indeterminate > Verified > Vacuous."""
        seen = set(verdicts)
        for v in (Verdict.FALSIFIED, Verdict.INDETERMINATE, Verdict.VERIFIED):
            if v in seen:
                return v
        return Verdict.VACUOUS


class SpiderwebError(Exception):
    """Root of the package's exception tree."""

    #: process exit code the CLI maps this error to
    exit_code = 1


class InvalidInput(SpiderwebError, ValueError):
    exit_code = 2


# -- numeric layer --------------------------------------------------------

class DomainError(SpiderwebError, ValueError):
    exit_code = 2


class IndeterminateComparison(SpiderwebError):
    exit_code = 3


class ExactZero(SpiderwebError):
    """An argument sits exactly on a zero of the evaluated factor."""


class RangeExceeded(SpiderwebError, OverflowError):
    exit_code = 3


class PrecisionLost(SpiderwebError):
    exit_code = 3


# -- function model -------------------------------------------------------

class ConstraintUnverified(SpiderwebError):
    exit_code = 3


class ConstraintViolation(SpiderwebError):
    exit_code = 2


class NotApplicable(SpiderwebError):
    exit_code = 2


# -- ladders and certificates ---------------------------------------------

class BaseNotExpanding(SpiderwebError):
    exit_code = 2


class HypothesisFails(SpiderwebError):
    exit_code = 2


class NoWitnessFound(SpiderwebError):
    exit_code = 3

    def __init__(self, message: str, probes=(), undecided: bool = False):
        super().__init__(message)
        self.probes = list(probes)
        self.undecided = undecided


class NoValidN(SpiderwebError):
    exit_code = 2


class WitnessSearchFailed(SpiderwebError):
    exit_code = 2

    def __init__(self, n: int, message: str = ""):
        super().__init__(message or f"no witness found at n={n}")
        self.n = n


class LadderPrecisionLost(PrecisionLost):
    def __init__(self, n: int, message: str = ""):
        super().__init__(message or f"ladder precision lost at n={n}")
        self.n = n


# -- construction ---------------------------------------------------------

class NonTermination(SpiderwebError):
    exit_code = 3

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class StageBudgetExceeded(SpiderwebError):
    exit_code = 3


class GapConditionFails(SpiderwebError):
    exit_code = 2

"""The product family z**3 * prod (1 + z/a_n)**(2 p_n) evaluated in log coordinates.

Throughout, ``u = log r``.  For functions of this shape with negative real
zeros the maximum modulus on ``|z| = r`` is ``f(r)`` and the minimum modulus is
``|f(-r)|``; both are computed as sums over the zero ledger.

* ``log_M(u) = 3u + sum 2p * softplus(u - A)``
* ``log_m(u) = 3u + sum 2p * log|1 - e**(u - A)|``
* ``log_g(u)`` is the ``log_M`` sum restricted to zeros with ``A <= u``.

Here ``A = log a``.  ``FULL_FAMILY`` functions stand for an infinite product
whose unlisted zeros obey the placement constraints; their evaluations add a
certified allowance for those zeros.  ``TRUNCATED`` functions are exactly the
finite product that is stored.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import ConstraintUnverified, DomainError, InvalidInput, RangeExceeded
from .xnum import (
    EXP_ARG_BITS,
    NEG_INFINITY,
    Enclosure,
    ExtReal,
    ext,
    logabs_one_minus_exp_interval,
    precision,
    softplus,
    softplus_interval,
    working_precision,
)

__all__ = [
    "Kind",
    "ZeroEntry",
    "EntireFunction",
    "TailBudget",
    "p_from_delta",
    "log_M",
    "log_m",
    "log_g",
    "tail_budget",
    "sandwich_gaps",
    "check_placement_constraints",
    "cubic_model",
    "slow_growth_family",
]

LN2 = Enclosure(2).ln()
# contribution below which a distant zero is dropped from an evaluation
DROP_BITS = 200
_DROP_EPS = Enclosure(0, ExtReal.power_of_two(-DROP_BITS))
# allowance for unlisted zeros of a full-family function (log of the tail product)
TAIL_ALLOWANCE = 2
# distance (in u) inside which log m only gets an upper bound
NEAR_ZERO = ExtReal.power_of_two(-40)

UArg = Union[ExtReal, Enclosure, int, float, str]


class Kind(enum.Enum):
    FULL_FAMILY = "FullFamily"
    TRUNCATED = "Truncated"


def p_from_delta(log_a: ExtReal, delta: Fraction) -> Enclosure:
    """p = floor(a**(delta/4) / 4) as an integer-valued enclosure.

    The exponent ``delta*log_a/4`` can be large, so the evaluation runs at a
    precision that grows with its size; the result is a point whenever the
    floor is decided.
    """
    log_a = ext(log_a)
    extra = max(0, log_a.exponent) if not log_a.is_zero() else 0
    if extra > EXP_ARG_BITS:
        raise RangeExceeded(f"a**(delta/4) needs exp of an argument near 2**{extra}")
    with precision(working_precision() + extra + 24):
        x = (Enclosure(log_a) * Enclosure(delta) / 4).exp() / 4
        return x.floor()


@dataclass(frozen=True)
class ZeroEntry:
    """One zero ``-a`` of multiplicity ``2p``; ``delta`` is set for constructed zeros."""

    log_a: ExtReal
    p: Enclosure
    delta: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "log_a", ext(self.log_a))
        p = self.p if isinstance(self.p, Enclosure) else Enclosure(int(self.p))
        object.__setattr__(self, "p", p)
        if self.delta is not None:
            d = Fraction(self.delta)
            object.__setattr__(self, "delta", d)
            if not (0 < d < Fraction(1, 2)):
                raise InvalidInput(f"delta {d} outside (0, 1/2)")
        if p.lo < 1:
            raise InvalidInput(f"p must be at least 1, got {p}")
        if not self.log_a.is_finite() or self.log_a.sign <= 0:
            raise InvalidInput("log_a must be positive and finite")

    @classmethod
    def constructed(cls, log_a: ExtReal, delta: Fraction) -> "ZeroEntry":
        return cls(log_a, p_from_delta(log_a, delta), Fraction(delta))

    @property
    def p_int(self) -> int | None:
        """p as an int when it is known exactly and not astronomically large."""
        if self.p.is_point and self.p.lo.is_finite() and (self.p.lo.is_zero() or self.p.lo.exponent < 4096):
            return int(self.p.lo.to_fraction())
        return None

    def two_p(self) -> Enclosure:
        return self.p * 2

    def to_json(self) -> dict:
        out: dict = {"log_a": str(self.log_a)}
        pi = self.p_int
        out["p"] = pi if pi is not None else {"lo": str(self.p.lo), "hi": str(self.p.hi)}
        if self.delta is not None:
            out["delta"] = f"{self.delta.numerator}/{self.delta.denominator}"
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ZeroEntry":
        log_a = ExtReal.parse(str(data["log_a"]))
        raw_p = data["p"]
        if isinstance(raw_p, dict):
            p = Enclosure(ExtReal.parse(raw_p["lo"]), ExtReal.parse(raw_p["hi"]))
        else:
            p = Enclosure(int(raw_p))
        delta = data.get("delta")
        return cls(log_a, p, Fraction(delta) if delta is not None else None)


@dataclass(frozen=True)
class TailBudget:
    k: int
    factor_log_hi: ExtReal


@dataclass(frozen=True)
class EntireFunction:
    zeros: tuple[ZeroEntry, ...] = ()
    kind: Kind = Kind.TRUNCATED

    def __post_init__(self):
        zeros = tuple(self.zeros)
        object.__setattr__(self, "zeros", zeros)
        for a, b in zip(zeros, zeros[1:]):
            if not a.log_a < b.log_a:
                raise InvalidInput("zero moduli must be strictly increasing")
        # per-zero drop thresholds: ln(2p) + DROP_BITS*ln 2, rounded up
        drops = []
        for z in zeros:
            drops.append((z.two_p().ln() + LN2 * DROP_BITS).hi)
        object.__setattr__(self, "_drop", tuple(drops))

    def __len__(self) -> int:
        return len(self.zeros)

    @property
    def log_a_last(self) -> ExtReal | None:
        return self.zeros[-1].log_a if self.zeros else None

    def with_zero(self, z: ZeroEntry) -> "EntireFunction":
        return EntireFunction(self.zeros + (z,), self.kind)

    def as_kind(self, kind: Kind) -> "EntireFunction":
        return EntireFunction(self.zeros, kind)

    # -- serialisation ---------------------------------------------------
    def to_json(self) -> dict:
        return {"zeros": [z.to_json() for z in self.zeros], "kind": self.kind.value}

    @classmethod
    def from_json(cls, data: dict) -> "EntireFunction":
        try:
            kind = Kind(data.get("kind", Kind.TRUNCATED.value))
        except ValueError as exc:
            raise InvalidInput(f"unknown function kind {data.get('kind')!r}") from exc
        return cls(tuple(ZeroEntry.from_json(z) for z in data.get("zeros", [])), kind)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "EntireFunction":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _bounds(u: UArg) -> tuple[ExtReal, ExtReal]:
    if isinstance(u, Enclosure):
        return u.lo, u.hi
    x = ext(u)
    return x, x


def _as_enclosure(u: UArg) -> Enclosure:
    return u if isinstance(u, Enclosure) else Enclosure(ext(u))


def _dropped(F: EntireFunction, i: int, u_hi: ExtReal) -> bool:
    z = F.zeros[i]
    gap = (Enclosure(z.log_a) - Enclosure(u_hi)).lo
    return gap > F._drop[i]


def _tail_applies(F: EntireFunction, u_hi: ExtReal) -> bool:
    return F.kind is Kind.FULL_FAMILY and F.zeros and u_hi <= F.zeros[-1].log_a


def log_M(F: EntireFunction, u: UArg) -> Enclosure:
    """Enclosure of log M(e**u) = log f(e**u)."""
    lo_u, hi_u = _bounds(u)
    if not (lo_u.is_finite() and hi_u.is_finite()):
        raise DomainError("u must be finite")
    ue = _as_enclosure(u)
    total = ue * 3
    for i, z in enumerate(F.zeros):
        if _dropped(F, i, hi_u):
            total = total + _DROP_EPS
            continue
        arg = ue - z.log_a
        total = total + z.two_p() * softplus_interval(arg)
    if F.kind is Kind.FULL_FAMILY:
        if _tail_applies(F, hi_u):
            total = total + Enclosure(0, TAIL_ALLOWANCE)
        else:
            total = Enclosure(total.lo, ExtReal.parse("+inf"))
    return total


def log_g(F: EntireFunction, u: UArg) -> Enclosure:
    """Enclosure of log g(e**u): only zeros with a <= r contribute (right-continuous)."""
    lo_u, hi_u = _bounds(u)
    if not (lo_u.is_finite() and hi_u.is_finite()):
        raise DomainError("u must be finite")
    if lo_u == hi_u:
        return _log_g_point(F, lo_u)
    # g is non-decreasing, so the endpoint values bracket the range
    return Enclosure(_log_g_point(F, lo_u).lo, _log_g_point(F, hi_u).hi)


def _log_g_point(F: EntireFunction, u: ExtReal) -> Enclosure:
    ue = Enclosure(u)
    total = ue * 3
    for z in F.zeros:
        if z.log_a > u:
            break
        total = total + z.two_p() * softplus_interval(_diff(u, z.log_a))
    if F.kind is Kind.FULL_FAMILY and F.zeros:
        # unlisted zeros satisfy a > a_last**2, so g is exact up to that point
        if not u <= F.zeros[-1].log_a * 2:
            total = Enclosure(total.lo, ExtReal.parse("+inf"))
    return total


def _diff(u: ExtReal, A: ExtReal) -> Enclosure:
    return Enclosure(u) - Enclosure(A)


def log_m(F: EntireFunction, u: UArg) -> Enclosure:
    """Enclosure of log m(e**u) = log|f(-e**u)|.

    Returns an enclosure with ``lo = hi = -inf`` when ``u`` is exactly the
    log-modulus of a zero.  Within 2**-40 of a zero only the upper bound is
    meaningful and ``lo`` is ``-inf``.
    """
    lo_u, hi_u = _bounds(u)
    if not (lo_u.is_finite() and hi_u.is_finite()):
        raise DomainError("u must be finite")
    if lo_u == hi_u:
        for z in F.zeros:
            if z.log_a == lo_u:
                return NEG_INFINITY
    ue = _as_enclosure(u)
    total = ue * 3
    neg_inf_lo = False
    for i, z in enumerate(F.zeros):
        if _dropped(F, i, hi_u):
            # |log(1 - x)| <= 2x for x <= 1/2
            total = total - _DROP_EPS * 2
            continue
        arg = ue - z.log_a
        near = arg.lo.sign <= 0 <= arg.hi.sign or (abs(arg.lo) < NEAR_ZERO and abs(arg.hi) < NEAR_ZERO)
        contrib = z.two_p() * logabs_one_minus_exp_interval(arg)
        if near:
            neg_inf_lo = True
            contrib = Enclosure(ExtReal.parse("-inf"), contrib.hi)
        total = total + contrib
    if F.kind is Kind.FULL_FAMILY:
        if _tail_applies(F, hi_u):
            total = total - Enclosure(0, 2 * TAIL_ALLOWANCE)
        else:
            total = Enclosure(ExtReal.parse("-inf"), total.hi)
    if neg_inf_lo:
        total = Enclosure(ExtReal.parse("-inf"), total.hi)
    return total


def sandwich_gaps(F: EntireFunction, u: UArg) -> tuple[Enclosure, Enclosure]:
    """Enclosures of ``log g - log m`` and ``log M - log g`` at ``u``.

    Subtracting the three separate enclosures loses every term smaller than
    an ulp of ``3u``; summing the per-zero differences directly keeps them,
    and each such difference has a certified sign.
    """
    ue = _as_enclosure(u)
    g_minus_m = Enclosure(0)
    M_minus_g = Enclosure(0)
    inf = ExtReal.parse("+inf")
    for z in F.zeros:
        x = ue - z.log_a
        two_p = z.two_p()
        if x.lo.sign > 0 or (x.is_point and x.lo.is_zero()):
            # zero at or below r: log((1 + e^x)/|1 - e^x|) = softplus(-x) - log(1 - e^-x)
            if x.lo.is_zero():
                g_minus_m = Enclosure(g_minus_m.lo, inf)
                continue
            neg = -x
            g_minus_m = g_minus_m + two_p * (softplus_interval(neg) - logabs_one_minus_exp_interval(neg))
        elif x.hi.sign < 0:
            g_minus_m = g_minus_m - two_p * logabs_one_minus_exp_interval(x)
            M_minus_g = M_minus_g + two_p * softplus_interval(x)
        else:
            raise DomainError("u straddles a zero; the sandwich is undefined there")
    if F.kind is Kind.FULL_FAMILY:
        g_minus_m = Enclosure(g_minus_m.lo, inf)
        M_minus_g = Enclosure(M_minus_g.lo, inf)
    return g_minus_m, M_minus_g


# ---------------------------------------------------------------------------
# constraints and tail bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of checking the growth constraints on consecutive zeros."""

    ok: bool
    decided: bool
    failures: tuple[str, ...] = ()


def check_placement_constraints(F: EntireFunction, slack: int = 1) -> ConstraintReport:
    """Check the spacing constraints on the stored zeros.

    With ``A = log a`` and ``d = delta`` the checks are
    ``d1*A1/4 >= log 4``, ``A_{n+1} > 2 A_n``,
    ``d_{n+1} A_{n+1}/2 > log 16 + d_n A_n`` and
    ``d_{n+1} A_{n+1}/16 > d_n A_n + log A_{n+1}``.  ``slack`` multiplies the
    right-hand sides of the pairwise inequalities (as ``+ log slack``).
    Zeros without ``delta`` only get the squaring check.
    """
    failures: list[str] = []
    decided = True
    zs = F.zeros
    log_slack = Enclosure(slack).ln()

    def record(label: str, lhs: Enclosure, rhs: Enclosure, strict: bool = True):
        nonlocal decided
        ok = lhs.certainly_gt(rhs) if strict else lhs.certainly_ge(rhs)
        if ok:
            return
        bad = lhs.certainly_le(rhs) if strict else lhs.certainly_lt(rhs)
        if not bad:
            decided = False
        failures.append(label)

    for n, z in enumerate(zs, start=1):
        if z.delta is not None and not z.p.overlaps(p_from_delta(z.log_a, z.delta)):
            failures.append(f"p{n} = floor(a{n}^(d{n}/4)/4)")
    if zs and zs[0].delta is not None:
        z = zs[0]
        record("a1^(d1/4) >= 4", Enclosure(z.log_a) * Enclosure(z.delta) / 4, Enclosure(4).ln(), strict=False)
    for n, (a, b) in enumerate(zip(zs, zs[1:]), start=1):
        A, B = Enclosure(a.log_a), Enclosure(b.log_a)
        record(f"a{n+1} > a{n}^2", B, A * 2 + log_slack)
        if a.delta is None or b.delta is None:
            continue
        da, db = Enclosure(a.delta), Enclosure(b.delta)
        record(f"a{n+1}^(d{n+1}/2) > 16 a{n}^d{n}", db * B / 2, Enclosure(16).ln() + da * A + log_slack)
        record(f"a{n+1}^(d{n+1}/16) > a{n}^d{n} log a{n+1}", db * B / 16, da * A + B.ln() + log_slack)
    return ConstraintReport(not failures, decided, tuple(failures))


def tail_budget(F: EntireFunction, k: int) -> TailBudget:
    """Upper bound on the log of prod_{m > k} (1 + r/a_m)**(2 p_m) for r <= a_k.

    ``k`` is 1-based.  Listed zeros are summed with certified bounds; for a
    full-family function the unlisted zeros add ``2**(1 - (L - k))`` where L
    is the number of listed zeros.
    """
    L = len(F.zeros)
    if not 1 <= k <= L:
        raise InvalidInput(f"zero index {k} outside 1..{L}")
    report = check_placement_constraints(F)
    if F.kind is Kind.FULL_FAMILY and not report.ok:
        raise ConstraintUnverified("spacing constraints not confirmed: " + ", ".join(report.failures))
    Ak = F.zeros[k - 1].log_a
    total = Enclosure(0)
    for z in F.zeros[k:]:
        total = total + z.two_p() * softplus(_diff(Ak, z.log_a).hi)
    if F.kind is Kind.FULL_FAMILY:
        total = total + ExtReal.power_of_two(1 - (L - k))
    if total.hi > TAIL_ALLOWANCE:
        raise ConstraintUnverified(f"tail bound {total.hi} exceeds {TAIL_ALLOWANCE}")
    return TailBudget(k, total.hi)


# ---------------------------------------------------------------------------
# stock functions
# ---------------------------------------------------------------------------

def cubic_model() -> EntireFunction:
    """z**3: no zeros besides the origin."""
    return EntireFunction((), Kind.TRUNCATED)


def slow_growth_family(a1: int = 10**6, count: int = 40, p: int = 1) -> EntireFunction:
    """Zeros a_1 = a1, a_{n+1} = a_n**3, all with the same p."""
    zeros = []
    for n in range(count):
        with precision(working_precision() + 64):
            log_a = (Enclosure(a1).ln() * 3**n).mid()
        zeros.append(ZeroEntry(log_a, Enclosure(p)))
    return EntireFunction(tuple(zeros), Kind.TRUNCATED)

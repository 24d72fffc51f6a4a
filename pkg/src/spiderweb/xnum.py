"""Extended-range reals, outward-rounded enclosures and level-index values.

All three value types are immutable.  ``ExtReal`` wraps an mpmath raw float
tuple ``(sign, man, exp, bc)`` whose exponent is an ordinary Python int, so
magnitudes such as ``2**(2**300)`` are representable.  ``Enclosure`` carries a
certified ``[lo, hi]`` pair; every operation on it rounds the lower end down
and the upper end up.  ``LevelReal`` stores ``exp^h(t)`` for values too large
even for an unbounded binary exponent.
"""

from __future__ import annotations

import contextlib
import contextvars
import enum
import math
import re
from fractions import Fraction
from typing import Iterator, Union

from mpmath.libmp import (
    finf,
    fnan,
    fninf,
    fone,
    fzero,
    from_float,
    from_int,
    from_man_exp,
    from_rational,
    from_str,
    mpf_add,
    mpf_ceil,
    mpf_cmp,
    mpf_div,
    mpf_exp,
    mpf_floor,
    mpf_log,
    mpf_mul,
    mpf_neg,
    mpf_shift,
    mpf_sub,
    round_ceiling,
    round_floor,
    round_nearest,
    to_float,
    to_int,
)
from mpmath.libmp.libmpf import to_digits_exp

from .errors import DomainError, ExactZero, IndeterminateComparison, RangeExceeded

__all__ = [
    "ExtReal",
    "Enclosure",
    "LevelReal",
    "Order",
    "ORACLE_PRECISION",
    "DEFAULT_PRECISION",
    "working_precision",
    "precision",
    "softplus",
    "softplus_interval",
    "logabs_one_minus_exp",
    "logabs_one_minus_exp_interval",
    "promote",
    "demote",
    "ext",
    "enc",
]

DEFAULT_PRECISION = 64
ORACLE_PRECISION = 200

# exp() accepts arguments up to 2**EXP_ARG_BITS in magnitude
EXP_ARG_BITS = 4096

_precision: contextvars.ContextVar[int] = contextvars.ContextVar(
    "spiderweb_precision", default=DEFAULT_PRECISION
)


def working_precision() -> int:
    return _precision.get()


@contextlib.contextmanager
def precision(bits: int) -> Iterator[int]:
    """Temporarily change the working precision (significand bits)."""
    if bits < 53:
        raise ValueError("working precision must be at least 53 bits")
    token = _precision.set(int(bits))
    try:
        yield int(bits)
    finally:
        _precision.reset(token)


# ---------------------------------------------------------------------------
# raw helpers (operate on mpmath tuples)
# ---------------------------------------------------------------------------

Raw = tuple

_DEC_RE = re.compile(r"^\s*([+-]?)(\d+)(?:\.(\d*))?(?:[eE]([+-]?\d+))?\s*$")


def _mag(x: Raw) -> int:
    """Position of the leading bit plus one (``x`` non-zero, finite)."""
    return x[2] + x[3]


def _is_special(x: Raw) -> bool:
    return not x[1]


def _exact_cap(prec: int) -> int:
    return max(4 * prec, 256)


def _raw_from(value, prec: int, rnd) -> Raw:
    if isinstance(value, ExtReal):
        return value.raw
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        if value.bit_length() <= _exact_cap(prec):
            return from_int(value)
        return from_int(value, prec, rnd)
    if isinstance(value, float):
        if math.isnan(value):
            raise DomainError("NaN is not an extended real")
        return from_float(value)
    if isinstance(value, Fraction):
        return from_rational(value.numerator, value.denominator, prec, rnd)
    if isinstance(value, str):
        return _parse(value, prec, rnd)
    if isinstance(value, tuple) and len(value) == 4:
        return value
    raise TypeError(f"cannot convert {type(value).__name__} to ExtReal")


def _parse(text: str, prec: int, rnd) -> Raw:
    s = text.strip()
    low = s.lower()
    if low in ("inf", "+inf", "infinity", "+infinity"):
        return finf
    if low in ("-inf", "-infinity"):
        return fninf
    m = _DEC_RE.match(s)
    if not m:
        raise DomainError(f"malformed number {text!r}")
    sign, ipart, fpart, exp = m.groups()
    fpart = fpart or ""
    digits = (ipart + fpart).lstrip("0")
    if not digits:
        return fzero
    # enough bits to reproduce any value that was printed with this many digits
    bits = max(prec, int((len(digits) - 1) * math.log2(10)) - 2)
    k = int(exp or 0) - len(fpart)
    canon = f"{sign}{ipart}{fpart}e{k}"
    return from_str(canon, bits, rnd)


def _format(x: Raw, digits: int | None = None) -> str:
    if x == fzero:
        return "+0"
    if x == finf:
        return "+inf"
    if x == fninf:
        return "-inf"
    if x == fnan:
        return "nan"
    if digits is None:
        digits = max(21, math.ceil(x[3] * math.log10(2)) + 2)
    sign, ds, e = to_digits_exp(x, digits)
    ds = ds[:digits]
    return f"{'-' if x[0] else '+'}{ds[0]}.{ds[1:]}E{e:+d}"


def _add(a: Raw, b: Raw, prec: int, rnd) -> Raw:
    if a == fzero:
        return b if _is_special(b) else _round(b, prec, rnd)
    if b == fzero:
        return a if _is_special(a) else _round(a, prec, rnd)
    if _is_special(a) or _is_special(b):
        r = mpf_add(a, b)
        return r
    span = max(_mag(a), _mag(b)) - min(a[2], b[2])
    if span <= _exact_cap(prec):
        return mpf_add(a, b)
    return mpf_add(a, b, prec, rnd)


def _round(a: Raw, prec: int, rnd) -> Raw:
    if _is_special(a) or a[3] <= _exact_cap(prec):
        return a
    return mpf_add(a, fzero, prec, rnd)


def _mul(a: Raw, b: Raw, prec: int, rnd) -> Raw:
    if a == fzero or b == fzero:
        return fzero
    if _is_special(a) or _is_special(b):
        return mpf_mul(a, b)
    if a[3] + b[3] <= _exact_cap(prec):
        return mpf_mul(a, b)
    return mpf_mul(a, b, prec, rnd)


def _widen(v: Raw, wp: int, ulps_log2: int, prec: int, rnd) -> Raw:
    """Move ``v`` (accurate to a few ulps at ``wp`` bits) outward and round."""
    if _is_special(v):
        return v
    delta = mpf_shift(fone, _mag(v) - wp + ulps_log2)
    if rnd is round_floor:
        return mpf_sub(v, delta, prec, round_floor)
    return mpf_add(v, delta, prec, round_ceiling)


def _exp_bound(x: Raw, prec: int, rnd) -> Raw:
    """One-sided bound on exp(x): below for round_floor, above for round_ceiling."""
    if x == fzero:
        return fone
    if x == finf:
        return finf
    if x == fninf:
        return fzero
    mag = _mag(x)
    if mag > EXP_ARG_BITS:
        if x[0]:
            # exp(x) < 2**x < 2**(-2**EXP_ARG_BITS)
            return fzero if rnd is round_floor else mpf_shift(fone, -(1 << EXP_ARG_BITS))
        raise RangeExceeded(f"exp argument of magnitude 2**{mag} out of range")
    wp = prec + 24
    v = mpf_exp(x, wp, round_nearest)
    return _widen(v, wp, 3, prec, rnd)


def _ln_bound(x: Raw, prec: int, rnd) -> Raw:
    if x == fone:
        return fzero
    if x == finf:
        return finf
    if x == fzero:
        return fninf
    if x[0]:
        raise DomainError("logarithm of a negative number")
    # cancellation near 1: the absolute error of mpf_log is relative to the result
    wp = prec + 24
    v = mpf_log(x, wp, round_nearest)
    return _widen(v, wp, 3, prec, rnd)


def _log1p_bound(y: Raw, prec: int, rnd) -> Raw:
    """Bound on log(1 + y) for 0 <= y (y exact)."""
    if y == fzero:
        return fzero
    if y == finf:
        return finf
    if _mag(y) < -prec - 5:
        if rnd is round_ceiling:
            return y
        # y - y^2/2 <= log(1+y)
        sq = mpf_mul(y, y, prec + 8, round_ceiling)
        return mpf_sub(y, mpf_shift(sq, -1), prec, round_floor)
    one_plus = mpf_add(fone, y)
    wp = 2 * prec + 40
    v = mpf_log(one_plus, wp, round_nearest)
    return _widen(v, wp, 3, prec, rnd)


def _softplus_bound(x: Raw, prec: int, rnd) -> Raw:
    up = rnd is round_ceiling
    if x == fninf:
        return fzero
    if x == finf:
        return finf
    if x == fzero:
        return _ln_bound(from_int(2), prec, rnd)
    if not x[0]:
        # x + log1p(exp(-x))
        if mpf_cmp(x, from_int(2 * prec + 64)) > 0:
            if not up:
                return _round(x, prec, round_floor)
            # exp(-x) < 2**(-2*prec - 64), far below one ulp of x
            return mpf_add(x, mpf_shift(fone, -2 * prec - 64), prec, round_ceiling)
        y = _exp_bound(mpf_neg(x), prec + 16, rnd)
        t = _log1p_bound(y, prec + 16, rnd)
        return mpf_add(x, t, prec, rnd)
    y = _exp_bound(x, prec + 16, rnd)
    return _log1p_bound(y, prec, rnd)


def _log_one_minus_exp_neg(t: Raw, prec: int, rnd) -> Raw:
    """Bound on log(1 - exp(-t)) for t > 0 exact."""
    if t == finf:
        return fzero
    mag = _mag(t)
    if mag > EXP_ARG_BITS or mpf_cmp(t, from_int(2 * prec + 64)) > 0:
        # y = exp(-t) tiny: -y - y^2 <= log(1-y) <= -y
        if rnd is round_ceiling:
            y = _exp_bound(mpf_neg(t), prec + 8, round_floor)
            return mpf_neg(y) if y != fzero else fzero
        y = _exp_bound(mpf_neg(t), prec + 8, round_ceiling)
        y2 = mpf_add(y, mpf_mul(y, y, prec + 8, round_ceiling), prec + 8, round_ceiling)
        return mpf_neg(mpf_add(y2, fzero, prec, round_ceiling))
    if mag < -prec - 10:
        # t - t^2/2 <= 1 - exp(-t) <= t, so log t - t <= value <= log t
        lt = _ln_bound(t, prec + 8, rnd)
        if rnd is round_ceiling:
            return _round(lt, prec, rnd)
        return mpf_sub(lt, t, prec, round_floor)
    wp = prec + 40 + max(0, -mag)
    # 1 - y is decreasing in y, so the lower bound uses the upper y and vice versa
    other = round_ceiling if rnd is round_floor else round_floor
    y = _exp_bound(mpf_neg(t), wp, other)
    one_minus = mpf_sub(fone, y)
    if one_minus == fzero or one_minus[0]:
        return fninf
    return _ln_bound(one_minus, prec, rnd)


def _lome_bound(x: Raw, prec: int, rnd) -> Raw:
    if x == fzero:
        raise ExactZero("log|1 - exp(0)| is -infinity")
    if x == finf:
        return finf
    if x == fninf:
        return fzero
    if x[0]:
        return _log_one_minus_exp_neg(mpf_neg(x), prec, rnd)
    # log(e^x - 1) = x + log(1 - e^-x)
    tail = _log_one_minus_exp_neg(x, prec + 16, rnd)
    return mpf_add(x, tail, prec, rnd)


def _nan_guard(v: Raw, fallback: Raw) -> Raw:
    return fallback if v == fnan else v


# ---------------------------------------------------------------------------
# ExtReal
# ---------------------------------------------------------------------------

Number = Union[int, float, Fraction, str, "ExtReal"]


class ExtReal:
    """A real number with a binary significand and an unbounded exponent.

    Construction from ``int`` and ``float`` is exact; ``Fraction`` and decimal
    strings round to nearest at the working precision.  Comparisons are exact.
    Arithmetic operators round to nearest and are meant for bookkeeping; use
    :class:`Enclosure` wherever a certified bound is required.
    """

    __slots__ = ("_raw",)

    def __init__(self, value: Number = 0, *, rounding=round_nearest, prec: int | None = None):
        raw = _raw_from(value, prec or working_precision(), rounding)
        if raw == fnan:
            raise DomainError("NaN is not an extended real")
        object.__setattr__(self, "_raw", raw)

    @classmethod
    def from_raw(cls, raw: Raw) -> "ExtReal":
        obj = cls.__new__(cls)
        if raw == fnan:
            raise DomainError("NaN is not an extended real")
        if raw[1] and not raw[1] & 1:
            sign, man, e, _ = raw
            raw = from_man_exp(-man if sign else man, e)
        object.__setattr__(obj, "_raw", raw)
        return obj

    @classmethod
    def power_of_two(cls, k: int) -> "ExtReal":
        return cls.from_raw(mpf_shift(fone, int(k)))

    def __setattr__(self, name, value):
        raise AttributeError("ExtReal is immutable")

    def __reduce__(self):
        return (ExtReal.from_raw, (self._raw,))

    # -- structure -------------------------------------------------------
    @property
    def raw(self) -> Raw:
        return self._raw

    @property
    def sign(self) -> int:
        if self._raw == fzero:
            return 0
        if self._raw in (finf,):
            return 1
        if self._raw in (fninf,):
            return -1
        return -1 if self._raw[0] else 1

    @property
    def exponent(self) -> int:
        """Binary exponent e with |x| = mantissa * 2**e."""
        if _is_special(self._raw):
            raise DomainError("zero and infinities have no exponent")
        return self._raw[2] + self._raw[3] - 1

    @property
    def mantissa(self) -> Fraction:
        """Significand in [1, 2) (exact)."""
        if _is_special(self._raw):
            raise DomainError("zero and infinities have no mantissa")
        man, bc = int(self._raw[1]), self._raw[3]
        return Fraction(man, 1 << (bc - 1))

    def is_finite(self) -> bool:
        return self._raw not in (finf, fninf)

    def is_zero(self) -> bool:
        return self._raw == fzero

    # -- conversion ------------------------------------------------------
    def __float__(self) -> float:
        return to_float(self._raw)

    def to_fraction(self) -> Fraction:
        if not self.is_finite():
            raise DomainError("infinite value has no rational form")
        if self._raw == fzero:
            return Fraction(0)
        s, man, e, _ = self._raw
        v = Fraction(int(man)) * (Fraction(2) ** e)
        return -v if s else v

    def floor(self) -> int:
        return int(to_int(mpf_floor(self._raw)))

    def ceil(self) -> int:
        return int(to_int(mpf_ceil(self._raw)))

    def to_decimal_string(self, digits: int | None = None) -> str:
        return _format(self._raw, digits)

    @classmethod
    def parse(cls, text: str) -> "ExtReal":
        return cls.from_raw(_parse(text, working_precision(), round_nearest))

    def __str__(self) -> str:
        return _format(self._raw)

    def __repr__(self) -> str:
        return f"ExtReal('{_format(self._raw, 17)}')"

    # -- order -----------------------------------------------------------
    def _cmp(self, other) -> int:
        if isinstance(other, ExtReal):
            o = other.raw
        elif isinstance(other, int):
            o = from_int(other)
        elif isinstance(other, Fraction):
            # exact: compare numerators after scaling
            if not self.is_finite():
                return self.sign
            f = self.to_fraction()
            return (f > other) - (f < other)
        else:
            o = _raw_from(other, working_precision(), round_nearest)
        return mpf_cmp(self._raw, o)

    def __eq__(self, other) -> bool:
        if isinstance(other, (ExtReal, int, float, Fraction)):
            return self._cmp(other) == 0
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._raw)

    def __lt__(self, other) -> bool:
        return self._cmp(other) < 0

    def __le__(self, other) -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other) -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other) -> bool:
        return self._cmp(other) >= 0

    # -- nearest-rounded convenience arithmetic ----------------------------
    def _bin(self, other, fn) -> "ExtReal":
        prec = working_precision()
        o = other.raw if isinstance(other, ExtReal) else _raw_from(other, prec, round_nearest)
        return ExtReal.from_raw(fn(self._raw, o, prec, round_nearest))

    def __add__(self, other):
        return self._bin(other, mpf_add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._bin(other, mpf_sub)

    def __rsub__(self, other):
        return ExtReal(other) - self

    def __mul__(self, other):
        return self._bin(other, mpf_mul)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin(other, mpf_div)

    def __rtruediv__(self, other):
        return ExtReal(other) / self

    def __neg__(self):
        return ExtReal.from_raw(mpf_neg(self._raw))

    def __abs__(self):
        return -self if self.sign < 0 else self

    def ln(self) -> "ExtReal":
        if self.sign <= 0:
            raise DomainError("ln of a non-positive number")
        return ExtReal.from_raw(mpf_log(self._raw, working_precision(), round_nearest))

    def exp(self) -> "ExtReal":
        if self.is_finite() and self._raw != fzero and _mag(self._raw) > EXP_ARG_BITS and not self._raw[0]:
            raise RangeExceeded("exp argument out of range")
        return ExtReal.from_raw(mpf_exp(self._raw, working_precision(), round_nearest))


def ext(value: Number) -> ExtReal:
    return value if isinstance(value, ExtReal) else ExtReal(value)


ZERO = ExtReal(0)
ONE = ExtReal(1)
INF = ExtReal.from_raw(finf)
NEG_INF = ExtReal.from_raw(fninf)


# ---------------------------------------------------------------------------
# Enclosure
# ---------------------------------------------------------------------------

class Order(enum.Enum):
    LESS = "<"
    GREATER = ">"
    EQUAL = "="
    INDETERMINATE = "?"


def _min_raw(vals):
    best = vals[0]
    for v in vals[1:]:
        if mpf_cmp(v, best) < 0:
            best = v
    return best


def _max_raw(vals):
    best = vals[0]
    for v in vals[1:]:
        if mpf_cmp(v, best) > 0:
            best = v
    return best


class Enclosure:
    """Closed interval ``[lo, hi]`` certified to contain an exact real."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Number, hi: Number | None = None):
        prec = working_precision()
        if isinstance(lo, Enclosure):
            lo, hi = lo.lo, lo.hi
        if hi is None:
            if isinstance(lo, (Fraction, str)) or (isinstance(lo, int) and lo.bit_length() > _exact_cap(prec)):
                l, h = _raw_from(lo, prec, round_floor), _raw_from(lo, prec, round_ceiling)
            else:
                l = h = _raw_from(lo, prec, round_nearest)
        else:
            l = _raw_from(lo, prec, round_floor)
            h = _raw_from(hi, prec, round_ceiling)
        if l == fnan or h == fnan:
            raise DomainError("NaN endpoint")
        if mpf_cmp(l, h) > 0:
            raise DomainError(f"empty enclosure [{_format(l)}, {_format(h)}]")
        object.__setattr__(self, "lo", ExtReal.from_raw(l))
        object.__setattr__(self, "hi", ExtReal.from_raw(h))

    @classmethod
    def _make(cls, l: Raw, h: Raw) -> "Enclosure":
        obj = cls.__new__(cls)
        l = _nan_guard(l, fninf)
        h = _nan_guard(h, finf)
        if mpf_cmp(l, h) > 0:
            raise AssertionError(f"inverted enclosure [{_format(l)}, {_format(h)}]")
        object.__setattr__(obj, "lo", ExtReal.from_raw(l))
        object.__setattr__(obj, "hi", ExtReal.from_raw(h))
        return obj

    @classmethod
    def point(cls, x: Number) -> "Enclosure":
        return cls(x)

    @classmethod
    def hull(cls, *items: "Enclosure") -> "Enclosure":
        return cls._make(_min_raw([e.lo.raw for e in items]), _max_raw([e.hi.raw for e in items]))

    def __setattr__(self, name, value):
        raise AttributeError("Enclosure is immutable")

    def __reduce__(self):
        return (Enclosure._make, (self.lo.raw, self.hi.raw))

    # -- inspection ------------------------------------------------------
    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def is_neg_infinity(self) -> bool:
        return self.hi.raw == fninf

    def mid(self) -> ExtReal:
        if not (self.lo.is_finite() and self.hi.is_finite()):
            if self.lo.is_finite():
                return self.lo
            if self.hi.is_finite():
                return self.hi
            return ZERO
        prec = working_precision()
        s = mpf_add(self.lo.raw, self.hi.raw, prec + 2, round_nearest)
        return ExtReal.from_raw(mpf_shift(s, -1))

    def width(self) -> ExtReal:
        return ExtReal.from_raw(mpf_sub(self.hi.raw, self.lo.raw, working_precision(), round_ceiling))

    def rel_width(self) -> float:
        w = self.width()
        if not w.is_finite():
            return math.inf
        if w.is_zero():
            return 0.0
        scale = max(abs(self.lo), abs(self.hi))
        return float(w / scale)

    def contains(self, x: Number) -> bool:
        if isinstance(x, Enclosure):
            return self.lo <= x.lo and x.hi <= self.hi
        x = ext(x)
        return self.lo <= x <= self.hi

    def overlaps(self, other: "Enclosure") -> bool:
        other = _coerce(other)
        return not (self.hi < other.lo or other.hi < self.lo)

    # -- comparisons -----------------------------------------------------
    def compare(self, other) -> Order:
        other = _coerce(other)
        if self.hi < other.lo:
            return Order.LESS
        if self.lo > other.hi:
            return Order.GREATER
        if self.is_point and other.is_point and self.lo == other.lo:
            return Order.EQUAL
        return Order.INDETERMINATE

    def certainly_lt(self, other) -> bool:
        return self.hi < _coerce(other).lo

    def certainly_le(self, other) -> bool:
        return self.hi <= _coerce(other).lo

    def certainly_gt(self, other) -> bool:
        return self.lo > _coerce(other).hi

    def certainly_ge(self, other) -> bool:
        return self.lo >= _coerce(other).hi

    def decide_lt(self, other) -> bool:
        """True/False if decided; raise IndeterminateComparison otherwise."""
        order = self.compare(other)
        if order is Order.INDETERMINATE:
            raise IndeterminateComparison(f"cannot decide {self} < {_coerce(other)}")
        return order is Order.LESS

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other) -> "Enclosure":
        other = _coerce(other)
        prec = working_precision()
        return Enclosure._make(
            _add(self.lo.raw, other.lo.raw, prec, round_floor),
            _add(self.hi.raw, other.hi.raw, prec, round_ceiling),
        )

    __radd__ = __add__

    def __neg__(self) -> "Enclosure":
        return Enclosure._make(mpf_neg(self.hi.raw), mpf_neg(self.lo.raw))

    def __sub__(self, other) -> "Enclosure":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Enclosure":
        return _coerce(other) - self

    def __mul__(self, other) -> "Enclosure":
        other = _coerce(other)
        prec = working_precision()
        a, b = (self.lo.raw, self.hi.raw), (other.lo.raw, other.hi.raw)
        lows = [_mul(x, y, prec, round_floor) for x in a for y in b]
        highs = [_mul(x, y, prec, round_ceiling) for x in a for y in b]
        return Enclosure._make(_min_raw(lows), _max_raw(highs))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Enclosure":
        other = _coerce(other)
        if other.lo.sign <= 0 <= other.hi.sign:
            raise DomainError("division by an enclosure containing zero")
        prec = working_precision()
        a, b = (self.lo.raw, self.hi.raw), (other.lo.raw, other.hi.raw)
        lows = [_nan_guard(mpf_div(x, y, prec, round_floor), fninf) for x in a for y in b]
        highs = [_nan_guard(mpf_div(x, y, prec, round_ceiling), finf) for x in a for y in b]
        return Enclosure._make(_min_raw(lows), _max_raw(highs))

    def __rtruediv__(self, other) -> "Enclosure":
        return _coerce(other) / self

    def pow_int(self, n: int) -> "Enclosure":
        if n < 0:
            return Enclosure(1) / self.pow_int(-n)
        result = Enclosure(1)
        base = self
        # binary powering keeps the number of roundings logarithmic
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base.sqr()
        return result

    def sqr(self) -> "Enclosure":
        if self.lo.sign >= 0 or self.hi.sign <= 0:
            return self * self
        prec = working_precision()
        top = _max_raw([_mul(self.lo.raw, self.lo.raw, prec, round_ceiling), _mul(self.hi.raw, self.hi.raw, prec, round_ceiling)])
        return Enclosure._make(fzero, top)

    def ln(self) -> "Enclosure":
        if self.lo.sign <= 0:
            raise DomainError("ln requires a positive lower bound")
        prec = working_precision()
        return Enclosure._make(_ln_bound(self.lo.raw, prec, round_floor), _ln_bound(self.hi.raw, prec, round_ceiling))

    def exp(self) -> "Enclosure":
        prec = working_precision()
        return Enclosure._make(_exp_bound(self.lo.raw, prec, round_floor), _exp_bound(self.hi.raw, prec, round_ceiling))

    def pow_real(self, y) -> "Enclosure":
        """self ** y for a positive base."""
        return (_coerce(y) * self.ln()).exp()

    def floor(self) -> "Enclosure":
        return Enclosure._make(mpf_floor(self.lo.raw), mpf_floor(self.hi.raw))

    def max(self, other) -> "Enclosure":
        other = _coerce(other)
        return Enclosure._make(_max_raw([self.lo.raw, other.lo.raw]), _max_raw([self.hi.raw, other.hi.raw]))

    def min(self, other) -> "Enclosure":
        other = _coerce(other)
        return Enclosure._make(_min_raw([self.lo.raw, other.lo.raw]), _min_raw([self.hi.raw, other.hi.raw]))

    # -- serialization ---------------------------------------------------
    def to_json(self):
        if self.is_point:
            return str(self.lo)
        return {"lo": str(self.lo), "hi": str(self.hi)}

    @classmethod
    def from_json(cls, data) -> "Enclosure":
        if isinstance(data, dict):
            return cls._make(ExtReal.parse(data["lo"]).raw, ExtReal.parse(data["hi"]).raw)
        if isinstance(data, int):
            return cls(data)
        return cls._make(ExtReal.parse(data).raw, ExtReal.parse(data).raw)

    def __str__(self) -> str:
        return f"[{_format(self.lo.raw, 17)}, {_format(self.hi.raw, 17)}]"

    def __repr__(self) -> str:
        return f"Enclosure{self}"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Enclosure):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))


def _coerce(x) -> Enclosure:
    if isinstance(x, Enclosure):
        return x
    return Enclosure(x)


def enc(x, hi=None) -> Enclosure:
    return Enclosure(x, hi) if hi is not None else _coerce(x)


NEG_INFINITY = Enclosure._make(fninf, fninf)


# ---------------------------------------------------------------------------
# transcendental helpers used by the product evaluations
# ---------------------------------------------------------------------------

def softplus(x: Number) -> Enclosure:
    """Enclosure of log(1 + e**x)."""
    r = ext(x).raw
    prec = working_precision()
    return Enclosure._make(_softplus_bound(r, prec, round_floor), _softplus_bound(r, prec, round_ceiling))


def softplus_interval(x: Enclosure) -> Enclosure:
    """Monotone extension of :func:`softplus` to an enclosure argument."""
    prec = working_precision()
    return Enclosure._make(_softplus_bound(x.lo.raw, prec, round_floor), _softplus_bound(x.hi.raw, prec, round_ceiling))


def logabs_one_minus_exp(x: Number) -> Enclosure:
    """Enclosure of log|1 - e**x|; raises ExactZero at x = 0."""
    r = ext(x).raw
    prec = working_precision()
    return Enclosure._make(_lome_bound(r, prec, round_floor), _lome_bound(r, prec, round_ceiling))


def logabs_one_minus_exp_interval(x: Enclosure) -> Enclosure:
    """Extension to an enclosure argument.

    The function decreases on x < 0 and increases on x > 0; an argument that
    straddles 0 gets an unbounded lower end.
    """
    prec = working_precision()
    lo, hi = x.lo.raw, x.hi.raw
    if x.lo.sign > 0:
        return Enclosure._make(_lome_bound(lo, prec, round_floor), _lome_bound(hi, prec, round_ceiling))
    if x.hi.sign < 0:
        return Enclosure._make(_lome_bound(hi, prec, round_floor), _lome_bound(lo, prec, round_ceiling))
    tops = [_lome_bound(v, prec, round_ceiling) for v in (lo, hi) if v != fzero]
    top = _max_raw(tops) if tops else fninf
    return Enclosure._make(fninf, top)


# ---------------------------------------------------------------------------
# LevelReal
# ---------------------------------------------------------------------------

class LevelReal:
    """exp^h(t) with h >= 0 and, for h >= 1, residual t in [1, e).

    Level 0 carries an arbitrary ExtReal below e.  Only the operations needed
    by the ladders are provided: log, exp, ordering and (de)serialization.
    """

    __slots__ = ("level", "residual")

    def __init__(self, level: int, residual: Number):
        level = int(level)
        residual = ext(residual)
        if level < 0:
            raise DomainError("level must be non-negative")
        if level > 0 and not (ONE <= residual and residual.raw != finf and _below_e(residual)):
            raise DomainError(f"residual {residual} outside the band [1, e)")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "residual", residual)

    def __setattr__(self, name, value):
        raise AttributeError("LevelReal is immutable")

    def __reduce__(self):
        return (LevelReal, (self.level, self.residual))

    def log(self) -> "LevelReal":
        if self.level == 0:
            return promote(self.residual.ln())
        if self.level == 1:
            return promote(self.residual)
        return LevelReal(self.level - 1, self.residual)

    def exp(self) -> "LevelReal":
        if self.level == 0:
            try:
                return promote(self.residual.exp())
            except RangeExceeded:
                pass
        return LevelReal(self.level + 1, self.residual)

    def _key(self):
        return (self.level, self.residual)

    def _cmp(self, other) -> int:
        if not isinstance(other, LevelReal):
            other = promote(ext(other))
        if self.level != other.level:
            return -1 if self.level < other.level else 1
        return self.residual._cmp(other.residual)

    def __eq__(self, other) -> bool:
        if isinstance(other, (LevelReal, ExtReal, int, float)):
            return self._cmp(other) == 0
        return NotImplemented

    def __hash__(self):
        return hash(self._key())

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __str__(self) -> str:
        return f"L{self.level}:{self.residual}"

    def __repr__(self) -> str:
        return f"LevelReal({self.level}, {self.residual!r})"

    @classmethod
    def parse(cls, text: str) -> "LevelReal":
        m = re.match(r"^\s*L(\d+):(.+)$", text)
        if not m:
            raise DomainError(f"malformed level value {text!r}")
        return cls(int(m.group(1)), ExtReal.parse(m.group(2)))


def _below_e(x: ExtReal) -> bool:
    # e lies strictly between these two bounds at any precision we use
    prec = max(working_precision(), 64)
    e_lo = _exp_bound(fone, prec, round_floor)
    return mpf_cmp(x.raw, e_lo) < 0 or mpf_cmp(mpf_log(x.raw, prec + 24, round_nearest), fone) < 0


def promote(x: Number) -> LevelReal:
    """Rewrite x as exp^h(t) with t in the band [1, e) (or h = 0 below e)."""
    x = ext(x)
    if not x.is_finite():
        raise RangeExceeded("cannot promote an infinite value")
    level = 0
    prec = working_precision() + 24
    cur = x.raw
    # values within a few ulps below a band edge snap upward, so that a
    # rounded e**e still lands on level 2 with residual 1
    snap = mpf_sub(fone, mpf_shift(fone, -(working_precision() - 8)))
    while cur != fzero and not cur[0] and mpf_cmp(cur, fone) >= 0:
        y = mpf_log(cur, prec, round_nearest)
        if mpf_cmp(y, snap) < 0:
            break
        cur = y if mpf_cmp(y, fone) >= 0 else fone
        level += 1
    return LevelReal(level, ExtReal.from_raw(cur))


def demote(x: LevelReal) -> ExtReal:
    """Inverse of :func:`promote`; RangeExceeded when the value is too large."""
    # each exp multiplies the relative error by the size of its argument, so a
    # coarse first pass finds how many guard bits the accurate pass needs
    cur = x.residual.raw
    guard = 0
    for _ in range(x.level):
        if cur != fzero and not cur[0] and _mag(cur) > EXP_ARG_BITS:
            raise RangeExceeded(f"level {x.level} value exceeds the extended exponent range")
        guard += max(0, _mag(cur)) if cur != fzero else 0
        cur = mpf_exp(cur, 53, round_nearest)
    wp = working_precision() + 32 + guard
    cur = x.residual.raw
    for _ in range(x.level):
        cur = mpf_exp(cur, wp, round_nearest)
    return ExtReal.from_raw(mpf_add(cur, fzero, working_precision(), round_nearest))

"""Orbits on the negative real axis and how fast they escape.

For the functions in this package ``f(-r) = -r**3 * prod(1 - r/a)**(2p)``,
so ``f`` maps ``(-inf, 0]`` into itself and ``|f(-r)| = m(r)``.  An orbit is
therefore a sequence of log-magnitudes ``u_{n+1} = log m(e**u_n)``, carried
as enclosures of the true iterates.  Classification compares it with the
ladder ``log M^n(R)`` and only ever reports what holds up to the horizon.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from .entire import EntireFunction, log_m
from .errors import InvalidInput
from .growth import GrowthTable, build_ladder
from .xnum import NEG_INFINITY, Enclosure, ExtReal, ext, precision, working_precision

__all__ = ["OrbitRecord", "EscapeClass", "ScanRow", "orbit", "classify", "ray_scan", "rows_to_csv"]

# an orbit stops once its log-magnitude is known to less than this
MAX_WIDTH = ExtReal(1)


@dataclass
class OrbitRecord:
    x0: ExtReal
    logs: list[Enclosure]
    n_max: int
    degraded_at: int | None = None
    hit_zero: bool = False
    # every iterate of a point of (-inf, 0] stays there
    sign_note: str = "all iterates in (-inf, 0]"

    @property
    def n_reached(self) -> int:
        return len(self.logs) - 1

    def to_json(self) -> dict:
        return {
            "x0": str(self.x0),
            "logs": [e.to_json() for e in self.logs],
            "n_max": self.n_max,
            "degraded_at": self.degraded_at,
            "hit_zero": self.hit_zero,
            "sign_note": self.sign_note,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def orbit(F: EntireFunction, x0, n_max: int, bits: int | None = None) -> OrbitRecord:
    """Iterate ``f`` from ``x0 <= 0`` for up to ``n_max`` steps."""
    x0 = ext(x0)
    if x0.sign > 0:
        raise InvalidInput("orbits start on the negative real axis")
    if n_max < 0:
        raise InvalidInput("n_max must be non-negative")
    rec = OrbitRecord(x0, [], n_max)
    with precision(bits or working_precision()):
        if x0.is_zero():
            rec.logs = [NEG_INFINITY] * (n_max + 1)
            return rec
        cur = Enclosure(abs(x0)).ln()
        rec.logs.append(cur)
        for n in range(1, n_max + 1):
            nxt = log_m(F, cur)
            if nxt.is_neg_infinity:
                rec.hit_zero = True
                rec.logs.extend([NEG_INFINITY] * (n_max + 1 - n))
                return rec
            if not (nxt.lo.is_finite() and nxt.hi.is_finite()) or nxt.width() > MAX_WIDTH:
                rec.degraded_at = n
                return rec
            rec.logs.append(nxt)
            cur = nxt
    return rec


@dataclass(frozen=True)
class EscapeClass:
    kind: str
    lag: int | None = None
    reason: str | None = None
    n_reached: int = 0
    # log of the magnitude bound behind BoundedAtHorizon
    bound: ExtReal | None = None

    def __str__(self) -> str:
        if self.kind == "FastWithLag":
            return f"FastWithLag({self.lag})"
        if self.kind == "Undecided":
            return f"Undecided({self.reason})"
        return self.kind

    @property
    def fast(self) -> bool:
        return self.kind == "FastWithLag"


def _lag_result(rec: OrbitRecord, table: GrowthTable, lag: int, n_max: int):
    """``(passed, first_undecided)`` for ``|f^(n+lag)| >= M^n(R)``, n <= n_max - lag."""
    first = None
    for n in range(0, n_max - lag + 1):
        i = n + lag
        if i > rec.n_reached:
            first = first or f"orbit stops at n = {rec.n_reached}"
            continue
        if n > table.certified_through():
            first = first or f"ladder stops at n = {table.certified_through()}"
            continue
        u, target = rec.logs[i], table.log_R(n)
        if u.certainly_ge(target):
            continue
        if u.certainly_lt(target):
            return False, None
        first = first or f"iterate {i} vs rung {n}"
    return first is None, first


def classify(
    F: EntireFunction,
    x0,
    R,
    lag_max: int,
    n_max: int,
    table: GrowthTable | None = None,
    bits: int | None = None,
) -> EscapeClass:
    """Escape class of ``x0`` at the horizon ``(lag_max, n_max)``.

    FastWithLag(l) is the smallest lag whose comparisons all hold decisively.
    Otherwise an orbit whose later iterates stay within ``max(R, |x0|)`` is
    BoundedAtHorizon, one that ends above that and above every earlier iterate is
    EscapingNotFastAtHorizon, and anything else is Undecided.
    """
    if lag_max < 0 or n_max < 0:
        raise InvalidInput("lag_max and n_max must be non-negative")
    with precision(bits or working_precision()):
        if table is None:
            table = build_ladder(F, R, n_max)
        rec = orbit(F, x0, n_max + lag_max)
        undecided = None
        for lag in range(lag_max + 1):
            ok, why = _lag_result(rec, table, lag, n_max)
            if ok:
                return EscapeClass("FastWithLag", lag, None, rec.n_reached)
            undecided = undecided or why
        if undecided is not None:
            return EscapeClass("Undecided", None, undecided, rec.n_reached)
        bound = table.log_R(0).hi
        if not rec.logs[0].is_neg_infinity:
            bound = max(bound, rec.logs[0].hi)
        if all(u.is_neg_infinity or u.certainly_le(bound) for u in rec.logs[1:]):
            return EscapeClass("BoundedAtHorizon", None, None, rec.n_reached, bound)
        last = rec.logs[-1]
        if last.certainly_gt(bound) and all(last.certainly_gt(u) for u in rec.logs[:-1]):
            return EscapeClass("EscapingNotFastAtHorizon", None, None, rec.n_reached)
    return EscapeClass("Undecided", None, "orbit neither bounded by R nor growing at the horizon", rec.n_reached)


@dataclass(frozen=True)
class ScanRow:
    u: ExtReal
    cls: EscapeClass

    def as_list(self) -> list[str]:
        c = self.cls
        return [
            str(self.u),
            c.kind,
            "" if c.lag is None else str(c.lag),
            str(c.n_reached),
            c.reason or "",
        ]


def ray_scan(
    F: EntireFunction,
    u_lo,
    u_hi,
    samples: int,
    R,
    lag_max: int,
    n_max: int,
    bits: int | None = None,
) -> list[ScanRow]:
    """Classify points ``-e**u`` with ``u`` at cell midpoints of ``[u_lo, u_hi]``."""
    u_lo, u_hi = ext(u_lo), ext(u_hi)
    if not u_lo < u_hi:
        raise InvalidInput("ray_scan needs u_lo < u_hi")
    if samples <= 0:
        return []
    rows = []
    with precision(bits or working_precision()):
        table = build_ladder(F, R, n_max)
        step = (u_hi - u_lo) / samples
        for j in range(samples):
            u = u_lo + step * ExtReal(j) + step / 2
            x0 = -Enclosure(u).exp().mid()
            rows.append(ScanRow(u, classify(F, x0, R, lag_max, n_max, table)))
    return rows


def rows_to_csv(rows: list[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "class", "lag", "n_reached", "first_indeterminate"])
    for row in rows:
        w.writerow(row.as_list())
    return buf.getvalue()

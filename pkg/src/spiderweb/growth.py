"""Iterated maximum modulus ladders and their growth exponents.

The ladder is ``R_0 = R`` and ``R_{n+1} = M(R_n)``, stored as enclosures of
``log R_n``.  For each rung the growth exponent

    eps_n = max over R_n <= r <= R_{n+1} of log log M(r) / log r

is enclosed: the lower end comes from an explicit witness radius and the upper
end from a branch-and-bound over cells, using that ``log M`` is increasing.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from scipy import optimize

from .entire import EntireFunction, log_M
from .errors import BaseNotExpanding, NotApplicable, PrecisionLost, RangeExceeded, Verdict
from .xnum import Enclosure, ExtReal, LevelReal, demote, ext, promote

__all__ = [
    "Rung",
    "EpsEntry",
    "GrowthTable",
    "build_ladder",
    "eps_numeric",
    "eps_certified_hi",
    "zero_rungs",
    "fill_eps",
    "partial_sum_eps",
    "check_M_convexity",
    "convexity_threshold",
]

# a rung whose relative width exceeds this is no longer trusted for certification
CERT_REL_WIDTH = 2.0**-20
EIGHTH = Fraction(1, 8)


@dataclass(frozen=True)
class Rung:
    """One ladder value: ``log_R`` while certified, else a LevelReal estimate of R_n."""

    n: int
    log_R: Enclosure | None
    level: LevelReal | None = None

    @property
    def degraded(self) -> bool:
        return self.log_R is None

    def to_json(self):
        if self.log_R is not None:
            return {"n": self.n, "log_R": self.log_R.to_json()}
        return {"n": self.n, "log_R_level": str(self.level) if self.level else None}


@dataclass(frozen=True)
class EpsEntry:
    n: int
    numeric: Enclosure | None
    witness_u: ExtReal | None = None
    certified_hi: Fraction | None = None
    upper_converged: bool = False
    note: str = ""

    def upper(self) -> ExtReal | None:
        """Smallest available certified upper bound."""
        cands = []
        if self.numeric is not None:
            cands.append(self.numeric.hi)
        if self.certified_hi is not None:
            cands.append(Enclosure(self.certified_hi).hi)
        return min(cands) if cands else None

    def to_json(self):
        return {
            "n": self.n,
            "eps": self.numeric.to_json() if self.numeric is not None else None,
            "witness_u": str(self.witness_u) if self.witness_u is not None else None,
            "certified_hi": _frac_str(self.certified_hi),
            "upper_converged": self.upper_converged,
            "note": self.note,
        }


def _frac_str(q: Fraction | None):
    if q is None:
        return None
    return f"{q.numerator}/{q.denominator}"


@dataclass
class GrowthTable:
    F: EntireFunction
    R: ExtReal
    rungs: list[Rung]
    horizon: int
    eps: dict[int, EpsEntry] = field(default_factory=dict)
    degraded_at: int | None = None
    partial_sum: Enclosure | None = None

    def log_R(self, n: int) -> Enclosure:
        if n >= len(self.rungs):
            raise PrecisionLost(f"rung {n} beyond the computed ladder (0..{len(self.rungs) - 1})")
        r = self.rungs[n]
        if r.log_R is None:
            raise PrecisionLost(f"rung {n} is past the certified range (degraded at {self.degraded_at})")
        return r.log_R

    def certified_through(self) -> int:
        """Largest n whose rung is certified."""
        last = -1
        for r in self.rungs:
            if r.log_R is None:
                break
            last = r.n
        return last

    # -- export ----------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "log_Rn", "eps_lo", "eps_hi", "eps_certified_hi", "cumulative_sum_hi"])
        running = Enclosure(0)
        for rung in self.rungs:
            e = self.eps.get(rung.n)
            log_r = str(rung.log_R.mid()) if rung.log_R is not None else (str(rung.level) if rung.level else "")
            lo = hi = cert = cum = ""
            if e is not None and e.numeric is not None:
                lo, hi = str(e.numeric.lo), str(e.numeric.hi)
            if e is not None and e.certified_hi is not None:
                cert = _frac_str(e.certified_hi)
            if e is not None and e.upper() is not None and running is not None:
                running = running + Enclosure(e.upper())
                cum = str(running.hi)
            elif e is not None:
                running = None
            w.writerow([rung.n, log_r, lo, hi, cert, cum])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "R": str(self.R),
            "horizon": self.horizon,
            "degraded_at": self.degraded_at,
            "rungs": [r.to_json() for r in self.rungs],
            "eps": [self.eps[k].to_json() for k in sorted(self.eps)],
            "partial_sum": self.partial_sum.to_json() if self.partial_sum is not None else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# ladder
# ---------------------------------------------------------------------------

def build_ladder(F: EntireFunction, R, horizon: int) -> GrowthTable:
    """Rungs 0..horizon of R_n = M^n(R)."""
    R = ext(R)
    if R.sign <= 0:
        raise BaseNotExpanding("base radius must be positive")
    u0 = Enclosure(R).ln()
    first = log_M(F, u0)
    if not first.certainly_gt(u0):
        raise BaseNotExpanding(f"M(R) > R is not decisive at R = {R}")
    rungs = [Rung(0, u0)]
    degraded_at = None
    cur = u0
    for n in range(1, horizon + 1):
        if degraded_at is None:
            try:
                nxt = first if n == 1 else log_M(F, cur)
            except RangeExceeded:
                nxt = None
            if nxt is None or not nxt.hi.is_finite() or nxt.rel_width() > CERT_REL_WIDTH:
                degraded_at = n
                rungs.append(Rung(n, None, _level_estimate(F, cur)))
                continue
            rungs.append(Rung(n, nxt))
            cur = nxt
        else:
            prev = rungs[-1].level
            rungs.append(Rung(n, None, _level_next(F, prev)))
    return GrowthTable(F, R, rungs, horizon, degraded_at=degraded_at)


def _level_estimate(F: EntireFunction, cur: Enclosure) -> LevelReal | None:
    try:
        v = log_M(F, cur.mid())
        if v.lo.is_finite():
            # the stored value is log R_n; its level form is one level up
            return promote(v.lo).exp()
    except (RangeExceeded, PrecisionLost):
        pass
    return None


def _level_next(F: EntireFunction, prev: LevelReal | None) -> LevelReal | None:
    # past the certified range only the order of magnitude is tracked
    if prev is None:
        return None
    try:
        return _level_estimate(F, Enclosure(demote(prev.log())))
    except (RangeExceeded, PrecisionLost):
        return None


# ---------------------------------------------------------------------------
# growth exponents
# ---------------------------------------------------------------------------

def _phi(F: EntireFunction, u: ExtReal) -> Enclosure:
    """Enclosure of log(log M(e**u)) / u."""
    L = log_M(F, u)
    return L.ln() / Enclosure(u)


def _phi_cell_upper(F: EntireFunction, a: ExtReal, b: ExtReal, La_hi_cache: dict) -> ExtReal:
    """Upper bound of log(log M(e**u))/u over a <= u <= b (0 < a)."""
    Lb = La_hi_cache.get(b)
    if Lb is None:
        Lb = log_M(F, b).hi
        La_hi_cache[b] = Lb
    num = Enclosure(Lb).ln().hi
    den = a if num.sign >= 0 else b
    return (Enclosure(num) / Enclosure(den)).hi


def _knot_grid(lo: ExtReal, hi: ExtReal, knots: Sequence[ExtReal], density: int) -> list[ExtReal]:
    pts = [lo] + [k for k in knots if lo < k < hi] + [hi]
    grid: list[ExtReal] = []
    for a, b in zip(pts, pts[1:]):
        ratio = b / a
        grid.append(a)
        for j in range(1, density):
            # geometric spacing in u inside each knot interval
            grid.append(a * _fpow(ratio, Fraction(j, density)))
    grid.append(hi)
    # the maximiser usually sits just past a knot; add close probes there
    for k in knots:
        if lo < k < hi:
            for s in (2.0**-30, 2.0**-20, 2.0**-10):
                v = k * (1 + s)
                if v < hi:
                    grid.append(v)
    # rounding in the spacing arithmetic must not push points outside
    return sorted({g for g in grid if lo <= g <= hi})


def _fpow(x: ExtReal, t: Fraction) -> ExtReal:
    if t == 0:
        return ExtReal(1)
    return (x.ln() * ExtReal(t)).exp()


def eps_numeric(
    F: EntireFunction,
    table: GrowthTable,
    n: int,
    grid_density: int = 32,
    budget: int = 400,
    rel_tol: float = 1e-9,
) -> EpsEntry:
    """Enclose eps_n by a witness (lower end) and branch-and-bound (upper end)."""
    un, un1 = table.log_R(n), table.log_R(n + 1)
    inner_lo, inner_hi = un.hi, un1.lo
    outer_lo, outer_hi = un.lo, un1.hi
    if not inner_lo < inner_hi:
        raise PrecisionLost(f"rungs {n} and {n + 1} overlap")
    knots = [z.log_a for z in F.zeros]

    # lower end: grid plus golden-section refinement, inside the certain range
    grid = _knot_grid(inner_lo, inner_hi, knots, grid_density)
    vals = [(_phi(F, u).lo, u) for u in grid]
    best_lo, best_u = max(vals, key=lambda t: t[0])
    j = grid.index(best_u)
    if 0 < j < len(grid) - 1:
        a, c = grid[j - 1], grid[j + 1]
        width = c - a

        def neg(t: float) -> float:
            u = a + width * ExtReal(min(max(t, 0.0), 1.0))
            return -float(_phi(F, u).mid())

        tb = float((best_u - a) / width)
        try:
            t_star = optimize.golden(neg, brack=(0.0, tb, 1.0), tol=1e-12)
            u_star = a + width * ExtReal(min(max(float(t_star), 0.0), 1.0))
            if inner_lo <= u_star <= inner_hi:
                cand = _phi(F, u_star).lo
                if cand > best_lo:
                    best_lo, best_u = cand, u_star
        except (ValueError, RuntimeError):
            pass

    # upper end: cells over the outer range, split where the bound is loosest
    cache: dict = {}
    cells_pts = _knot_grid(outer_lo, outer_hi, knots, grid_density)
    heap: list = []
    for a, b in zip(cells_pts, cells_pts[1:]):
        ub = _phi_cell_upper(F, a, b, cache)
        heapq.heappush(heap, (-float(ub), _Cell(a, b, ub)))
    evals = 0
    converged = False
    tol = ExtReal(rel_tol) * abs(best_lo) + ExtReal(1e-300)
    while heap and evals < budget:
        _, cell = heap[0]
        if cell.ub - best_lo <= tol:
            converged = True
            break
        heapq.heappop(heap)
        mid = (cell.a + cell.b) / 2
        if not (cell.a < mid < cell.b):
            heapq.heappush(heap, (-float(cell.ub), cell))
            break
        evals += 1
        if inner_lo <= mid <= inner_hi:
            v = _phi(F, mid).lo
            if v > best_lo:
                best_lo, best_u = v, mid
                tol = ExtReal(rel_tol) * abs(best_lo) + ExtReal(1e-300)
        for a, b in ((cell.a, mid), (mid, cell.b)):
            ub = min(_phi_cell_upper(F, a, b, cache), cell.ub)
            heapq.heappush(heap, (-float(ub), _Cell(a, b, ub)))
    if not heap:
        converged = True
    upper = max(c.ub for _, c in heap) if heap else best_lo
    if upper < best_lo:
        upper = best_lo
    note = "" if converged else "upper bound not tightened to tolerance within budget"
    return EpsEntry(n, Enclosure(best_lo, upper), best_u, None, converged, note)


@dataclass(frozen=True)
class _Cell:
    a: ExtReal
    b: ExtReal
    ub: ExtReal

    def __lt__(self, other: "_Cell") -> bool:
        return self.a < other.a


def zero_rungs(F: EntireFunction, table: GrowthTable) -> dict[int, int | None]:
    """Map zero index k (1-based) to the rung n with a_k in [R_n, R_{n+1}).

    ``None`` marks zeros whose rung cannot be decided from the certified
    ladder (beyond it, or too close to a rung value).
    """
    out: dict[int, int | None] = {}
    top = table.certified_through()
    for k, z in enumerate(F.zeros, start=1):
        out[k] = None
        for n in range(top):
            lo, hi = table.log_R(n), table.log_R(n + 1)
            if lo.hi <= z.log_a < hi.lo:
                out[k] = n
                break
    return out


def eps_certified_hi(F: EntireFunction, table: GrowthTable, n: int) -> Fraction | None:
    """Analytic upper bound for eps_n on a constructed function.

    With ``n_k`` the rung containing the k-th zero:
    ``eps_{n_k} <= delta_k + 2**-n_k`` and, for ``0 < m`` before the next
    zero's rung, ``eps_{n_k + m} <= delta_k / 3**(m-1) + 2**-(n_k + m)``.
    Returns ``None`` on rungs before the first zero's rung or when the zero
    positions cannot be decided.
    """
    if not F.zeros or any(z.delta is None for z in F.zeros):
        raise NotApplicable("certified bounds need a constructed zero ledger")
    placement = zero_rungs(F, table)
    top = table.certified_through()
    best: tuple[int, int] | None = None
    for k, z in enumerate(F.zeros, start=1):
        nk = placement[k]
        if nk is None:
            # an unplaced zero is harmless only if it lies beyond rung n + 1
            if n + 1 <= top and z.log_a >= table.log_R(n + 1).hi:
                break
            return None
        if nk > n:
            break
        best = (k, nk)
    if best is None:
        return None
    k, nk = best
    delta = F.zeros[k - 1].delta
    m = n - nk
    if m == 0:
        return delta + Fraction(1, 2**nk)
    return delta / 3 ** (m - 1) + Fraction(1, 2 ** (nk + m))


def fill_eps(
    table: GrowthTable,
    upto: int | None = None,
    grid_density: int = 32,
    certified: bool = False,
) -> GrowthTable:
    """Compute eps entries for every rung pair that is certified."""
    top = table.certified_through()
    last = top - 1 if upto is None else min(upto, top - 1)
    for n in range(0, last + 1):
        e = eps_numeric(table.F, table, n, grid_density)
        if certified:
            try:
                bound = eps_certified_hi(table.F, table, n)
            except NotApplicable:
                bound = None
            e = EpsEntry(n, e.numeric, e.witness_u, bound, e.upper_converged, e.note)
        table.eps[n] = e
    for n in range(last + 1, table.horizon):
        table.eps.setdefault(n, EpsEntry(n, None, note="precision lost"))
    return table


def partial_sum_eps(table: GrowthTable, N: int, horizon: int) -> tuple[Enclosure, bool]:
    """Enclosure of sum_{n=N}^{horizon} eps_n and whether it is decisively < 1/8."""
    total = Enclosure(0)
    for n in range(N, horizon + 1):
        e = table.eps.get(n)
        if e is None or e.numeric is None:
            raise PrecisionLost(f"eps_{n} not available")
        hi = e.upper()
        total = total + Enclosure(e.numeric.lo, hi)
    table.partial_sum = total
    return total, total.certainly_lt(Enclosure(EIGHTH))


def check_M_convexity(F: EntireFunction, u, c) -> Verdict:
    """Compare log M(r**c) with c log M(r) at u = log r (non-strict >=)."""
    u = ext(u)
    ce = Enclosure(c) if not isinstance(c, Enclosure) else c
    lhs = log_M(F, Enclosure(u) * ce)
    rhs = log_M(F, u) * ce
    if lhs.certainly_ge(rhs):
        return Verdict.VERIFIED
    if lhs.certainly_lt(rhs):
        return Verdict.FALSIFIED
    return Verdict.INDETERMINATE


def convexity_threshold(
    F: EntireFunction, us: Iterable, cs: Sequence = (1.5, 2, 3, 5)
) -> ExtReal | None:
    """Smallest tested u from which every (u, c) check above it is Verified."""
    us = sorted(ext(u) for u in us)
    threshold = None
    for u in reversed(us):
        if all(check_M_convexity(F, u, c) is Verdict.VERIFIED for c in cs):
            threshold = u
        else:
            break
    return threshold

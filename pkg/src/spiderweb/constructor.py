"""Step-by-step placement of zeros that keeps the negative real axis slow.

The construction runs on the g-ladder ``r_0 = 10``, ``r_{n+1} = g(r_n)``,
where g is the product over the zeros already at or below r.  A stage
starting at index ``m`` follows

    s_0 = r_{m+1},
    s_{k+1} = g(s_k ** (1 - delta/16))   if a zero sits at s_k,
    s_{k+1} = g(s_k)                     otherwise,

placing a zero at ``s_k`` whenever the growth and spacing constraints allow
it, and stops at the first ``K`` with ``s_K <= r_{m+K}``.

Until a stage has placed something, ``s_k`` equals the ladder value
``r_{m+k+1}`` exactly.  That equality is tracked symbolically: a value that
is known to equal ``r_n`` carries ``rung = n``.  A zero placed on such a value
sits exactly on the rung, and g evaluated there includes it (g is
right-continuous).  Enclosure arithmetic alone could never decide this.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

from .entire import EntireFunction, Kind, ZeroEntry, log_M, log_g, log_m, p_from_delta
from .errors import (
    ConstraintViolation,
    GapConditionFails,
    IndeterminateComparison,
    InvalidInput,
    NonTermination,
    PrecisionLost,
    RangeExceeded,
    StageBudgetExceeded,
    Verdict,
)
from .growth import GrowthTable, eps_certified_hi, eps_numeric, zero_rungs
from .xnum import Enclosure, ExtReal, ext, precision, softplus_interval

__all__ = [
    "DeltaSpec",
    "PlacedZero",
    "StepTrace",
    "StageRecord",
    "ConstructionState",
    "LemmaReport",
    "init",
    "extend_ladder",
    "run_step",
    "run_schedule",
    "stage_indices",
    "image_bound",
    "check_ledger",
    "verify_lemma_small",
    "verify_lemma_large",
    "verify_g_convexity",
    "verify_g_cap",
    "verify_R_spacing",
    "verify_eps_bounds",
]

HALF = Fraction(1, 2)
DEFAULT_PREC = 128
DEFAULT_BUDGET = 10_000
DEFAULT_SLACK = 2
# highest ladder index a schedule may touch
LADDER_LIMIT = 100_000


# ---------------------------------------------------------------------------
# exponent rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaSpec:
    """Rule for the exponents delta_n (n counts zeros from 1)."""

    kind: str = "constant"
    c: Fraction = Fraction(9, 20)
    values: tuple[Fraction, ...] = ()
    divergence_note: str = ""

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic", "list"):
            raise InvalidInput(f"unknown delta rule {self.kind!r}")
        if self.kind == "list" and not self.values:
            raise InvalidInput("an explicit delta list needs at least one value")
        first = (self.c,) if self.kind != "harmonic" else (self.delta(1),)
        for v in first + tuple(self.values):
            if not 0 < v < HALF:
                raise InvalidInput(f"delta must lie in (0, 1/2), got {v}")

    @classmethod
    def constant(cls, c) -> "DeltaSpec":
        return cls("constant", Fraction(c), (), "constant sequence; the sum diverges")

    @classmethod
    def harmonic(cls, c) -> "DeltaSpec":
        return cls("harmonic", Fraction(c), (), "c/log(n+2); the sum diverges")

    @classmethod
    def explicit(cls, values: Iterable) -> "DeltaSpec":
        vals = tuple(Fraction(v) for v in values)
        return cls("list", vals[0] if vals else Fraction(1, 4), vals, "finite list; divergence not checked")

    def delta(self, n: int) -> Fraction:
        if n < 1:
            raise InvalidInput("zero indices start at 1")
        if self.kind == "constant":
            return self.c
        if self.kind == "harmonic":
            # a fixed rational stand-in for c / log(n + 2)
            return (self.c / Fraction(math.log(n + 2))).limit_denominator(10**9)
        if n > len(self.values):
            raise InvalidInput(f"explicit delta list has only {len(self.values)} entries")
        return self.values[n - 1]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "c": str(self.c),
            "values": [str(v) for v in self.values],
            "divergence_note": self.divergence_note,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DeltaSpec":
        return cls(
            data["kind"],
            Fraction(data["c"]),
            tuple(Fraction(v) for v in data.get("values", [])),
            data.get("divergence_note", ""),
        )


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlacedZero:
    """A zero at ``-a`` with ``log a`` in ``log_a``.

    ``rung`` is set when ``a`` equals the ladder value ``r_rung`` exactly;
    ``zone`` is the ladder index n with ``r_n <= a < r_{n+1}``.
    """

    index: int
    log_a: Enclosure
    rung: int | None
    zone: int
    delta: Fraction
    p: Enclosure
    stage: int
    step: int

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "log_a": self.log_a.to_json(),
            "rung": self.rung,
            "zone": self.zone,
            "delta": str(self.delta),
            "p": self.p.to_json(),
            "stage": self.stage,
            "step": self.step,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PlacedZero":
        return cls(
            d["index"],
            Enclosure.from_json(d["log_a"]),
            d["rung"],
            d["zone"],
            Fraction(d["delta"]),
            Enclosure.from_json(d["p"]),
            d["stage"],
            d["step"],
        )


@dataclass(frozen=True)
class _Val:
    """A log-radius enclosure, with ``rung`` set when it equals a ladder value."""

    u: Enclosure
    rung: int | None = None


@dataclass
class StepTrace:
    m: int
    s: list[tuple[int, Enclosure]] = field(default_factory=list)
    T: list[Enclosure] = field(default_factory=list)
    placements: list[tuple[int, int]] = field(default_factory=list)
    K: int | None = None
    N: int | None = None
    status: str = "running"
    skipped: list[tuple[int, str]] = field(default_factory=list)
    # per transition k -> k+1: (k, bound on T_{k+1}/T_k, within bound)
    ratio_checks: list[tuple[int, Enclosure, bool]] = field(default_factory=list)
    jump_checks: list[tuple[int, bool]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "s": [[k, u.to_json()] for k, u in self.s],
            "T": [t.to_json() for t in self.T],
            "placements": [list(p) for p in self.placements],
            "K": self.K,
            "N": self.N,
            "status": self.status,
            "skipped": [[k, why] for k, why in self.skipped],
            "ratio_checks": [[k, b.to_json(), ok] for k, b, ok in self.ratio_checks],
            "jump_checks": [list(j) for j in self.jump_checks],
        }

    @classmethod
    def from_json(cls, d: dict) -> "StepTrace":
        return cls(
            d["m"],
            [(k, Enclosure.from_json(u)) for k, u in d["s"]],
            [Enclosure.from_json(t) for t in d["T"]],
            [tuple(p) for p in d["placements"]],
            d["K"],
            d["N"],
            d["status"],
            [tuple(x) for x in d["skipped"]],
            [(k, Enclosure.from_json(b), ok) for k, b, ok in d["ratio_checks"]],
            [tuple(j) for j in d["jump_checks"]],
        )


@dataclass
class StageRecord:
    k: int
    j: int
    m: int
    N: int
    inclusion: bool

    def to_json(self) -> dict:
        return {"k": self.k, "j": self.j, "m": self.m, "N": self.N, "inclusion": self.inclusion}


@dataclass
class ConstructionState:
    delta: DeltaSpec
    log_a1: ExtReal
    prec: int = DEFAULT_PREC
    slack: int = DEFAULT_SLACK
    budget: int = DEFAULT_BUDGET
    zeros: list[PlacedZero] = field(default_factory=list)
    ladder: list[Enclosure] = field(default_factory=list)
    stages: list[StageRecord] = field(default_factory=list)
    N_k: list[int] = field(default_factory=list)
    traces: list[StepTrace] = field(default_factory=list)

    def L(self, m: int) -> int:
        """Number of zeros with ``a <= r_m``."""
        return sum(1 for z in self.zeros if _le_rung(z, m, self))

    def function(self, kind: Kind = Kind.TRUNCATED) -> EntireFunction:
        """The finite product built so far (rung zeros at their midpoints)."""
        with precision(self.prec):
            zs = tuple(ZeroEntry(z.log_a.mid(), z.p, z.delta) for z in self.zeros)
        return EntireFunction(zs, kind)

    def schedule(self) -> list[dict]:
        out = []
        for k in sorted({s.k for s in self.stages}):
            parts = [s.N for s in self.stages if s.k == k]
            done = len(parts) == (2 if k == 1 else 2 * k)
            out.append({"k": k, "N_kj": parts, "N_k": sum(parts) if done else None})
        return out

    def to_json(self) -> dict:
        return {
            "delta": self.delta.to_json(),
            "log_a1": str(self.log_a1),
            "prec": self.prec,
            "slack": self.slack,
            "budget": self.budget,
            "zeros": [z.to_json() for z in self.zeros],
            "ladder": [u.to_json() for u in self.ladder],
            "stages": [s.to_json() for s in self.stages],
            "schedule": self.schedule(),
            "traces": [t.to_json() for t in self.traces],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> "ConstructionState":
        st = cls(
            DeltaSpec.from_json(d["delta"]),
            ExtReal.parse(d["log_a1"]),
            d["prec"],
            d["slack"],
            d["budget"],
        )
        st.zeros = [PlacedZero.from_json(z) for z in d["zeros"]]
        st.ladder = [Enclosure.from_json(u) for u in d["ladder"]]
        st.stages = [StageRecord(**s) for s in d["stages"]]
        st.N_k = [e["N_k"] for e in d["schedule"] if e["N_k"] is not None]
        st.traces = [StepTrace.from_json(t) for t in d["traces"]]
        return st


def _le_rung(z: PlacedZero, n: int, state: ConstructionState) -> bool:
    if z.rung is not None:
        return z.rung <= n
    return z.zone < n or (z.zone == n and z.log_a.hi <= state.ladder[n].lo)


# ---------------------------------------------------------------------------
# g on the state
# ---------------------------------------------------------------------------

def _log_g(state: ConstructionState, v: _Val) -> Enclosure:
    """log g at ``v``; zeros on rungs are compared symbolically."""
    total = v.u * 3
    for z in state.zeros:
        if v.rung is not None and z.rung is not None:
            if z.rung > v.rung:
                continue
            x = Enclosure(0) if z.rung == v.rung else v.u - z.log_a
        else:
            x = v.u - z.log_a
            if x.hi.sign < 0:
                continue
            if x.lo.sign < 0:
                raise PrecisionLost(f"cannot tell whether zero {z.index} lies below the evaluation point")
        total = total + z.p * 2 * softplus_interval(x)
    return total


def init(
    delta: DeltaSpec,
    log_a1,
    *,
    prec: int = DEFAULT_PREC,
    slack: int = DEFAULT_SLACK,
    budget: int = DEFAULT_BUDGET,
) -> ConstructionState:
    """Validate the first-zero size and seed the ladder at r_0 = 10.

    ``log_a1`` is the smallest admissible first zero; zeros are only placed
    by :func:`run_step`.
    """
    log_a1 = ext(log_a1)
    d1 = delta.delta(1)
    with precision(prec):
        if not (Enclosure(log_a1) * d1 / 4).certainly_ge(Enclosure(4).ln()):
            raise ConstraintViolation(f"a1^(d1/4) >= 4 fails for log a1 = {log_a1}, d1 = {d1}")
        try:
            p1 = p_from_delta(log_a1, d1)
        except RangeExceeded as exc:
            raise PrecisionLost(str(exc)) from exc
        if not p1.lo >= 1:
            raise ConstraintViolation("p1 = floor(a1^(d1/4)/4) must be at least 1")
        state = ConstructionState(delta, log_a1, prec, slack, budget)
        state.ladder.append(Enclosure(10).ln())
    return state


def extend_ladder(state: ConstructionState, upto_n: int) -> ConstructionState:
    """Compute ladder entries up to index ``upto_n`` (existing ones stay frozen)."""
    if upto_n > LADDER_LIMIT:
        raise StageBudgetExceeded(f"ladder index {upto_n} beyond the limit {LADDER_LIMIT}")
    with precision(state.prec):
        while len(state.ladder) <= upto_n:
            n = len(state.ladder) - 1
            try:
                nxt = _log_g(state, _Val(state.ladder[n], n))
            except RangeExceeded as exc:
                raise PrecisionLost(f"ladder value r_{n + 1} out of range") from exc
            if not nxt.hi.is_finite():
                raise PrecisionLost(f"ladder value r_{n + 1} is unbounded")
            # equality holds while no zero lies below r_n
            if nxt.certainly_lt(state.ladder[n] * 3):
                raise PrecisionLost(f"r_{n + 1} >= r_{n}^3 fails numerically")
            state.ladder.append(nxt)
    return state


def _u_r(state: ConstructionState, n: int) -> Enclosure:
    extend_ladder(state, n)
    return state.ladder[n]


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------

def _p_enclosure(log_a: Enclosure, d: Fraction) -> Enclosure:
    try:
        lo = p_from_delta(log_a.lo, d)
        hi = p_from_delta(log_a.hi, d) if log_a.hi != log_a.lo else lo
    except RangeExceeded as exc:
        raise PrecisionLost(f"p = floor(a^(d/4)/4) out of range at log a = {log_a.mid()}") from exc
    return Enclosure(lo.lo, hi.hi)


def _gt(a: Enclosure, b: Enclosure) -> bool | None:
    if a.certainly_gt(b):
        return True
    if a.certainly_le(b):
        return False
    return None


def _ge(a: Enclosure, b: Enclosure) -> bool | None:
    if a.certainly_ge(b):
        return True
    if a.certainly_lt(b):
        return False
    return None


def _candidate_failures(state: ConstructionState, A: Enclosure, zone: int, d: Fraction, p: Enclosure):
    """Constraint failures for a new zero (log a = A) behind the existing ones."""
    fails: list[str] = []
    undecided = False
    log_slack = Enclosure(state.slack).ln()

    def need(label: str, ok: bool | None):
        nonlocal undecided
        if ok is None:
            undecided = True
            fails.append(label + " (undecided)")
        elif not ok:
            fails.append(label)

    if not state.zeros:
        need("a1 >= admissible minimum", _ge(A, Enclosure(state.log_a1)))
        need("a1^(d1/4) >= 4", _ge(A * d / 4, Enclosure(4).ln()))
        need("p1 >= 1", p.lo >= 1)
        return fails, undecided
    prev = state.zeros[-1]
    for z in state.zeros:
        if abs(zone - z.zone) < 4:
            fails.append(f"zone {zone} within 4 of zone {z.zone} (zero {z.index})")
    B, dp = prev.log_a, prev.delta
    need("a_{n+1} > a_n^2", _gt(A, B * 2 + log_slack))
    need("a_{n+1}^(d/2) > 16 a_n^d", _gt(A * d / 2, Enclosure(16).ln() + B * dp + log_slack))
    need("a_{n+1}^(d/16) > a_n^d log a_{n+1}", _gt(A * d / 16, B * dp + A.ln() + log_slack))
    need("p_{n+1} >= 2 p_n^2", _ge(p.ln(), Enclosure(2).ln() + prev.p.ln() * 2))
    return fails, undecided


def check_ledger(state: ConstructionState) -> list[tuple[int, str]]:
    """Re-check every stored zero against the constraints in force when it was placed."""
    out: list[tuple[int, str]] = []
    with precision(state.prec):
        for i, z in enumerate(state.zeros):
            before = replace(state, zeros=state.zeros[:i])
            try:
                p = _p_enclosure(z.log_a, z.delta)
            except PrecisionLost as exc:
                out.append((z.index, str(exc)))
                continue
            if not p.overlaps(z.p):
                out.append((z.index, "stored p differs from floor(a^(d/4)/4)"))
            if z.delta != state.delta.delta(z.index):
                out.append((z.index, "stored delta differs from the delta rule"))
            fails, _ = _candidate_failures(before, z.log_a, z.zone, z.delta, z.p)
            out.extend((z.index, f) for f in fails)
    return out


def _jump_holds(state: ConstructionState, z: PlacedZero) -> bool | None:
    """log g(a) >= sqrt(p) log g(a^(1 - d/16)), compared in log form."""
    at = _log_g(state, _Val(z.log_a, z.rung)) if z.rung is not None else _log_g(state, _Val(z.log_a))
    below = _log_g(state, _Val(z.log_a * (1 - z.delta / 16)))
    lhs = at.ln()
    rhs = z.p.ln() / 2 + below.ln()
    if lhs.certainly_ge(rhs):
        return True
    if lhs.certainly_lt(rhs):
        return False
    return None


def _zone_of(state: ConstructionState, v: _Val, k: int, m: int) -> int | None:
    if v.rung is not None:
        return v.rung
    lo_n, hi_n = m + k, m + k + 1
    if v.u.certainly_lt(state.ladder[hi_n]) and v.u.certainly_gt(state.ladder[lo_n]):
        return lo_n
    return None


def _try_place(state: ConstructionState, v: _Val, k: int, m: int, trace: StepTrace) -> PlacedZero | None:
    zone = _zone_of(state, v, k, m)
    if zone is None:
        trace.skipped.append((k, "zone undecided"))
        return None
    # every frozen ladder value r_n was computed from r_{n-1}, which must stay below the new zero
    if zone < len(state.ladder) - 2:
        trace.skipped.append((k, "ladder already fixed above this radius"))
        return None
    index = len(state.zeros) + 1
    d = state.delta.delta(index)
    A = v.u if v.rung is not None else Enclosure(v.u.hi)
    # cheap checks first so an out-of-range p only matters for a real candidate
    if state.zeros:
        cheap, _ = _candidate_failures(state, A, zone, d, state.zeros[-1].p * 4)
        blocking = [f for f in cheap if f.startswith("zone") or f.startswith("a_{n+1} > a_n^2")]
        if blocking:
            trace.skipped.append((k, "; ".join(blocking)))
            return None
    elif not A.certainly_ge(state.log_a1):
        trace.skipped.append((k, "below the admissible first zero"))
        return None
    p = _p_enclosure(A, d)
    fails, _ = _candidate_failures(state, A, zone, d, p)
    if fails:
        trace.skipped.append((k, "; ".join(fails)))
        return None
    z = PlacedZero(index, A, v.rung, zone, d, p, m, k)
    state.zeros.append(z)
    jump = _jump_holds(state, z)
    if not state.zeros[:-1] and jump is not True:
        # the first zero must be large enough for the jump inequality
        state.zeros.pop()
        trace.skipped.append((k, "first zero too small for the jump inequality"))
        return None
    trace.jump_checks.append((index, jump is True))
    if jump is not True:
        raise ConstraintViolation(f"jump inequality fails at zero {index}")
    return z


def _zero_at(state: ConstructionState, v: _Val) -> PlacedZero | None:
    for z in state.zeros:
        if v.rung is not None and z.rung is not None:
            if z.rung == v.rung:
                return z
            continue
        if z.rung is None and v.rung is None and z.log_a.is_point and v.u.hi == z.log_a.lo:
            return z
        if z.log_a.overlaps(v.u):
            raise PrecisionLost(f"cannot decide whether zero {z.index} sits at the current radius")
    return None


# ---------------------------------------------------------------------------
# one stage
# ---------------------------------------------------------------------------

def _ratio_bound(trace: StepTrace, state: ConstructionState, k: int, placed_now: bool) -> Enclosure | None:
    """Bound on T_{k+1}/T_k from the placement bookkeeping, when it applies."""
    ks = [kk for kk, _ in trace.placements]
    prior = [kk for kk in ks if kk < k] if placed_now else [kk for kk in ks if kk <= k]
    if len(prior) < 2:
        return None
    kn = prior[-1]
    q = k - kn
    zn = state.zeros[dict(trace.placements)[kn] - 1]
    root_p = (zn.p.ln() / 2).exp()
    if placed_now and q >= 2:
        d = state.zeros[-1].delta
        return (1 - Enclosure(d) / 16) * (1 + Enclosure(2) / (Enclosure(3).pow_int(q - 2) * root_p))
    if not placed_now and q >= 2:
        return 1 + Enclosure(2) / (Enclosure(3).pow_int(q - 2) * root_p)
    return None


def run_step(state: ConstructionState, m: int):
    """Run the s_k recursion from ``s_0 = r_{m+1}``; return ``(N, trace, state)``."""
    if m < 1:
        raise InvalidInput("stages start at m >= 1")
    trace = StepTrace(m)
    state.traces.append(trace)
    with precision(state.prec):
        try:
            v = _Val(_u_r(state, m + 1), m + 1)
            for k in range(state.budget + 1):
                r_mk = _u_r(state, m + k)
                trace.s.append((k, v.u))
                T = v.u / r_mk
                trace.T.append(T)
                # termination: s_k <= r_{m+k}
                if v.rung is not None:
                    stop = v.rung <= m + k
                else:
                    if v.u.certainly_le(r_mk):
                        stop = True
                    elif v.u.certainly_gt(r_mk):
                        stop = False
                    else:
                        raise IndeterminateComparison(f"T_{k} vs 1 undecided at stage m = {m}")
                if stop:
                    if not T.certainly_le(1):
                        raise IndeterminateComparison(f"T_{k} <= 1 is not decisive")
                    trace.K = trace.N = k
                    trace.status = "terminated"
                    _check_brackets(state, trace)
                    return k, trace, state
                if k == state.budget:
                    break
                _u_r(state, m + k + 1)
                z = _zero_at(state, v) or _try_place(state, v, k, m, trace)
                if z is not None and z.stage == m and z.step == k:
                    trace.placements.append((k, z.index))
                if z is not None:
                    nxt = _Val(_log_g(state, _Val(z.log_a * (1 - z.delta / 16))))
                elif v.rung is not None:
                    nxt = _Val(_u_r(state, v.rung + 1), v.rung + 1)
                else:
                    nxt = _Val(_log_g(state, v))
                if not nxt.u.hi.is_finite():
                    raise PrecisionLost(f"s_{k + 1} is unbounded")
                bound = _ratio_bound(trace, state, k, z is not None and z.step == k and z.stage == m)
                if bound is not None:
                    ratio = (nxt.u / _u_r(state, m + k + 1)) / T
                    trace.ratio_checks.append((k, bound, not ratio.certainly_gt(bound)))
                v = nxt
        except (PrecisionLost, RangeExceeded) as exc:
            trace.status = "precision"
            raise PrecisionLost(f"stage m = {m}, step {len(trace.s) - 1}: {exc}") from exc
    trace.status = "budget"
    raise NonTermination(f"stage m = {m}: no T_K <= 1 within {state.budget} steps", trace)


def _check_brackets(state: ConstructionState, trace: StepTrace) -> None:
    m, N = trace.m, trace.N
    for k, u in trace.s[:N]:
        lo, hi = state.ladder[m + k], state.ladder[m + k + 1]
        if u.certainly_lt(lo) or u.certainly_gt(hi):
            raise ConstraintViolation(f"r_(m+k) <= s_k <= r_(m+k+1) fails at k = {k}")
    if trace.s[N][1].certainly_gt(state.ladder[m + N]):
        raise ConstraintViolation("s_N <= r_(m+N) fails")


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

def stage_indices(N_done: list[int], k: int, parts: list[int]) -> int:
    """Stage index m of sub-step ``len(parts) + 1`` of block ``k``."""
    j = len(parts) + 1
    if k == 1:
        return 1 if j == 1 else parts[0]
    base = sum(N_done)
    return base + sum(parts) + 2 * k - j


def image_bound(state: ConstructionState, m: int, steps: int) -> Enclosure:
    """Upper bound for log|f^steps(x)| over x in (-r_{m+1}, 0].

    Each application maps ``(-s, 0]`` into ``(-g(a^(1-d/16)), 0]`` when a
    zero ``a`` has ``a^(1-d/16) < s <= a``, and into ``(-g(s), 0]`` otherwise.
    """
    with precision(state.prec):
        v = _Val(_u_r(state, m + 1), m + 1)
        for _ in range(steps):
            z = None
            for cand in state.zeros:
                if v.rung is not None and cand.rung == v.rung:
                    z = cand
                    break
                if v.rung is None or cand.rung is None:
                    inside = v.u.certainly_gt(cand.log_a * (1 - cand.delta / 16)) and v.u.hi <= cand.log_a.lo
                    if inside:
                        z = cand
                        break
            if z is not None:
                v = _Val(_log_g(state, _Val(z.log_a * (1 - z.delta / 16))))
            elif v.rung is not None:
                v = _Val(_u_r(state, v.rung + 1), v.rung + 1)
            else:
                v = _Val(_log_g(state, v))
        return v.u


def _inclusion(state: ConstructionState, m: int, N: int) -> bool:
    u = image_bound(state, m, N)
    return u.certainly_le(_u_r(state, m + N)) or u == _u_r(state, m + N)


def run_schedule(state: ConstructionState, k_max: int) -> ConstructionState:
    """Run the blocks k = 1..k_max: two stages for k = 1, then 2k stages each."""
    for k in range(1, k_max + 1):
        parts = [s.N for s in state.stages if s.k == k]
        total = 2 if k == 1 else 2 * k
        while len(parts) < total:
            m = stage_indices(state.N_k, k, parts)
            N, _, _ = run_step(state, m)
            ok = _inclusion(state, m, N)
            if not ok:
                raise ConstraintViolation(f"image of (-r_{m + 1}, 0] not inside (-r_{m + N}, 0]")
            state.stages.append(StageRecord(k, len(parts) + 1, m, N, ok))
            parts.append(N)
        if len(state.N_k) < k:
            state.N_k.append(sum(parts))
    return state


# ---------------------------------------------------------------------------
# lemma checks
# ---------------------------------------------------------------------------

@dataclass
class LemmaReport:
    verdict: Verdict
    items: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.verdict.ok


def _function(obj) -> EntireFunction:
    return obj.function() if isinstance(obj, ConstructionState) else obj


def _entry(F: EntireFunction, k: int) -> ZeroEntry:
    if not 1 <= k <= len(F.zeros):
        raise InvalidInput(f"zero {k} is not placed")
    z = F.zeros[k - 1]
    if z.delta is None:
        raise InvalidInput(f"zero {k} has no delta")
    return z


def _order(lhs: Enclosure, rhs: Enclosure, strict: bool) -> Verdict:
    if (lhs.certainly_gt(rhs) if strict else lhs.certainly_ge(rhs)):
        return Verdict.VERIFIED
    if (lhs.certainly_le(rhs) if strict else lhs.certainly_lt(rhs)):
        return Verdict.FALSIFIED
    return Verdict.INDETERMINATE


def verify_lemma_small(obj, k: int, n_samples: int = 50, bits: int = 256, extra=()) -> LemmaReport:
    """Check log|f(-r)| < 0 at samples with a^(1-d/16) < r < a (uniform in log r).

    Zeros beyond the ledger only shrink |f| on the negative axis, so the
    stored product gives a valid upper bound.  ``extra`` adds explicit log
    radii; those outside the interval are reported as excluded.
    """
    F = _function(obj)
    z = _entry(F, k)
    items = []
    with precision(bits):
        A = Enclosure(z.log_a)
        lo = (A * (1 - z.delta / 16)).hi
        hi = z.log_a
        pts = [lo + (hi - lo) * ExtReal(Fraction(j + 1, n_samples + 1)) for j in range(n_samples)]
        for u in list(pts) + [ext(x) for x in extra]:
            if not lo < u < hi:
                items.append((u, None, "excluded"))
                continue
            val = log_m(F, u)
            v = Verdict.VERIFIED if val.hi.sign < 0 else (Verdict.FALSIFIED if val.lo.sign >= 0 else Verdict.INDETERMINATE)
            items.append((u, val, v))
    verdicts = [it[2] for it in items if isinstance(it[2], Verdict)]
    return LemmaReport(Verdict.combine(verdicts), items)


def verify_lemma_large(obj, k: int, bits: int = 256) -> LemmaReport:
    """log g(a_k) >= sqrt(p_k) log g(a_k^(1 - d_k/16))."""
    F = _function(obj)
    z = _entry(F, k)
    with precision(bits):
        at = log_g(F, z.log_a)
        below = log_g(F, (Enclosure(z.log_a) * (1 - z.delta / 16)).lo)
        lhs, rhs = at.ln(), z.p.ln() / 2 + below.ln()
        v = _order(lhs, rhs, strict=False)
    return LemmaReport(v, [(k, lhs, rhs)])


def verify_g_convexity(obj, u, t, bits: int | None = None) -> Verdict:
    """log g(r^t) >= t log g(r) for t >= 2."""
    F = _function(obj)
    te = Enclosure(t) if not isinstance(t, Enclosure) else t
    if not te.certainly_ge(2):
        raise InvalidInput("convexity needs t >= 2")
    with precision(bits or (obj.prec if isinstance(obj, ConstructionState) else 64)):
        u = ext(u)
        return _order(log_g(F, Enclosure(u) * te), log_g(F, u) * te, strict=False)


def verify_g_cap(obj, u, s, t, bits: int | None = None) -> Verdict:
    """log g(r^t) <= t (1 + 2s) log g(r) when no zero has a in (r^s, r^t]."""
    F = _function(obj)
    s, t = Fraction(s), Fraction(t)
    if not (0 < s < HALF and t > 1):
        raise InvalidInput("the cap needs 0 < s < 1/2 and t > 1")
    with precision(bits or (obj.prec if isinstance(obj, ConstructionState) else 64)):
        u = ext(u)
        ue = Enclosure(u)
        lo, hi = ue * s, ue * t
        for z in F.zeros:
            A = z.log_a
            if not (A <= lo.lo or A > hi.hi):
                raise GapConditionFails(f"zero at log a = {A} may lie in (r^s, r^t]")
        lhs = log_g(F, hi)
        rhs = log_g(F, u) * (Enclosure(t) * (1 + 2 * Enclosure(s)))
        return _order(rhs, lhs, strict=False)


def verify_R_spacing(obj, table: GrowthTable, bits: int = 256) -> LemmaReport:
    """Zeros keep two rungs apart on the M-ladder, and g(R_n^3) > M(R_n)."""
    F = _function(obj)
    items = []
    with precision(bits):
        top = table.certified_through()
        places = zero_rungs(F, table)
        spacing = []
        for k, n in places.items():
            if n is None:
                spacing.append(Verdict.INDETERMINATE)
                items.append(("spacing", k, None, Verdict.INDETERMINATE))
                continue
            for j, other in enumerate(F.zeros, start=1):
                if j == k or n + 2 > top:
                    continue
                A = other.log_a
                clear = A < table.log_R(n).lo or A >= table.log_R(n + 2).hi
                v = Verdict.FALSIFIED if (A >= table.log_R(n).hi and A < table.log_R(n + 2).lo) else (
                    Verdict.VERIFIED if clear else Verdict.INDETERMINATE)
                spacing.append(v)
                items.append(("spacing", k, j, v))
        if not spacing:
            items.append(("spacing", None, None, Verdict.VACUOUS))
            spacing.append(Verdict.VACUOUS)
        second = []
        for n in range(top):
            uR = table.log_R(n)
            v = _order(log_g(F, uR * 3), log_M(F, uR), strict=True)
            second.append(v)
            items.append(("second", n, None, v))
    return LemmaReport(Verdict.combine(spacing + second), items)


def verify_eps_bounds(obj, table: GrowthTable, grid_density: int = 32) -> LemmaReport:
    """Compare eps_n with delta_k + 2^-n_k on zero rungs and the decaying bound after them.

    A rung whose numeric lower end exceeds the bound is Falsified; one whose
    certified upper end is below it is Verified.
    """
    F = _function(obj)
    items = []
    verdicts = []
    top = table.certified_through()
    for n in range(top):
        try:
            bound = eps_certified_hi(F, table, n)
        except PrecisionLost:
            break
        if bound is None:
            continue
        e = table.eps.get(n)
        if e is None or e.numeric is None:
            try:
                e = eps_numeric(F, table, n, grid_density)
            except PrecisionLost:
                break
            table.eps[n] = e
        b = Enclosure(bound)
        if e.numeric.hi <= b.lo:
            v = Verdict.VERIFIED
        elif e.numeric.lo > b.hi:
            v = Verdict.FALSIFIED
        else:
            v = Verdict.INDETERMINATE
        items.append((n, e.numeric, bound, v))
        verdicts.append(v)
    # the bounds assume zero rungs increase with the zero index; flag, don't fail
    rungs = [n for _, n in sorted(zero_rungs(F, table).items()) if n is not None]
    if any(b <= a for a, b in zip(rungs, rungs[1:])):
        items.append(("rung order", tuple(rungs), None, Verdict.INDETERMINATE))
        verdicts.append(Verdict.INDETERMINATE)
    return LemmaReport(Verdict.combine(verdicts) if verdicts else Verdict.VACUOUS, items)

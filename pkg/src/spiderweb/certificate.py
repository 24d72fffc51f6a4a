"""Minimum-modulus witnesses and spider's-web certificates.

A certificate is a finite sequence ``rho_0, ..., rho_H`` checked against the
ladder ``M^n(base)`` with base ``R_{N+1}``:

* ``rho_n > M^n(base)`` (the *rung* check), and
* ``m(rho_n) >= rho_{n+1}`` (the *min-modulus* check).

Every comparison is made on enclosures and must be decisive.  Radii are
stored as ``log rho_n``.

The search follows the classical argument.  After fixing ``N`` so that the
growth exponents from rung ``N`` sum below 1/8, the target radii

    r_n = M^{n+1}(R_{N+1} ** s_n),   s_n = prod_{m=N}^{N+n} (1 - 2 eps_m - 1/(8 m^2))

are formed and each ``rho_n`` is a local minimum-modulus witness in
``(r_n^(1 - 2 eps), r_n)``.  An optional backward pass then moves every
``rho_n`` down to the smallest radius that still satisfies both checks, so
the stored sequence has no slack to spare.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from scipy import optimize

from .entire import EntireFunction, log_M, log_m
from .errors import (
    HypothesisFails,
    InvalidInput,
    LadderPrecisionLost,
    NoValidN,
    NoWitnessFound,
    PrecisionLost,
    RangeExceeded,
    WitnessSearchFailed,
)
from .growth import GrowthTable, build_ladder, eps_numeric
from .xnum import Enclosure, ExtReal, ext, precision, working_precision

__all__ = [
    "LocalCosWitness",
    "CertLadder",
    "RhoCheck",
    "SpidersWebCertificate",
    "CertVerdict",
    "BeurlingReport",
    "log_rf",
    "find_witness",
    "beurling_spotcheck",
    "choose_N",
    "cert_ladder",
    "build_certificate",
    "check_certificate",
]

TWO = Enclosure(2)
UNIFORM_PROBES = 64
NUDGE = ExtReal.power_of_two(-20)
# relative resolution of the tightening bisection, in u = log r
TIGHT_BITS = 40


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _parse_frac(text: str) -> Fraction:
    return Fraction(text)


# ---------------------------------------------------------------------------
# r(f)
# ---------------------------------------------------------------------------

def log_rf(F: EntireFunction, steps_per_octave: int = 8) -> ExtReal:
    """log of the smallest radius 2**(j/steps) with log M >= 2 decisively."""

    def ok(j: int) -> bool:
        u = _grid_u(j, steps_per_octave)
        return log_M(F, u).lo >= 2

    hi = 0
    while not ok(hi):
        hi = 2 * hi + 1
    lo = -1
    while ok(lo):
        lo = 2 * lo
    # ok(lo) is False and ok(hi) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return _grid_u(hi, steps_per_octave)


def _grid_u(j: int, steps: int) -> ExtReal:
    return (Enclosure(2).ln() * Fraction(j, steps)).mid()


# ---------------------------------------------------------------------------
# local witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalCosWitness:
    """A radius ``t`` in ``(r^(1-2 alpha), r)`` with ``log m(t) > log M(r^(1-2 alpha)) - 2``."""

    u_r: ExtReal
    alpha: Fraction
    u_t: ExtReal
    lhs: Enclosure
    rhs: Enclosure

    @property
    def decisive(self) -> bool:
        return self.lhs.lo > self.rhs.hi

    def reverify(self, F: EntireFunction, bits: int | None = None) -> bool:
        """Recompute both sides from scratch at ``bits`` (default: twice the working precision)."""
        with precision(bits or 2 * working_precision()):
            lo_u = Enclosure(self.u_r) * (1 - 2 * self.alpha)
            inside = lo_u.hi < self.u_t < self.u_r
            lhs = log_m(F, self.u_t)
            rhs = log_M(F, lo_u) - TWO
            return inside and lhs.lo > rhs.hi

    def to_json(self) -> dict:
        return {
            "u_r": str(self.u_r),
            "alpha": _frac_str(self.alpha),
            "u_t": str(self.u_t),
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "LocalCosWitness":
        return cls(
            ExtReal.parse(data["u_r"]),
            _parse_frac(data["alpha"]),
            ExtReal.parse(data["u_t"]),
            Enclosure.from_json(data["lhs"]),
            Enclosure.from_json(data["rhs"]),
        )


def _check_hypothesis(F: EntireFunction, u_r: ExtReal, alpha: Fraction, rf: ExtReal) -> Enclosure:
    if not (0 < alpha < Fraction(1, 2)):
        raise InvalidInput(f"alpha must lie in (0, 1/2), got {alpha}")
    if u_r.sign <= 0:
        raise HypothesisFails("r must exceed 1")
    LM = log_M(F, u_r)
    if LM.lo.sign <= 0 or not LM.ln().certainly_le(Enclosure(u_r) * alpha):
        raise HypothesisFails(f"log M(r) <= r^alpha is not decisive at log r = {u_r}")
    lo_u = Enclosure(u_r) * (1 - 2 * alpha)
    if not lo_u.certainly_ge(rf):
        raise HypothesisFails(f"r^(1-2 alpha) >= r(f) is not decisive at log r = {u_r}")
    return lo_u


def _witness_probes(F: EntireFunction, lo: ExtReal, hi: ExtReal) -> list[ExtReal]:
    width = hi - lo
    pts = [lo] + [z.log_a for z in F.zeros if lo < z.log_a < hi] + [hi]
    probes = [(a + b) / 2 for a, b in zip(pts, pts[1:])]
    probes += [lo + width * NUDGE, hi - width * NUDGE]
    probes += [lo + width * ExtReal(Fraction(2 * j + 1, 2 * UNIFORM_PROBES)) for j in range(UNIFORM_PROBES)]
    return sorted({p for p in probes if lo < p < hi})


def find_witness(
    F: EntireFunction, u_r, alpha, rf: ExtReal | None = None
) -> LocalCosWitness:
    """Find ``t`` with ``log m(t) > log M(r^(1-2 alpha)) - 2`` for ``u_r = log r``.

    The hypothesis ``log M(r) <= r^alpha`` and ``r^(1-2 alpha) >= r(f)`` is
    checked first.  Among the probes the one with the largest certified
    ``log m`` is returned.
    """
    u_r = ext(u_r)
    alpha = Fraction(alpha)
    if rf is None:
        rf = log_rf(F)
    lo_u = _check_hypothesis(F, u_r, alpha, rf)
    rhs = log_M(F, lo_u) - TWO
    tried = []
    best = None
    for u in _witness_probes(F, lo_u.hi, u_r):
        lhs = log_m(F, u)
        tried.append((u, lhs))
        if best is None or lhs.lo > best[1].lo:
            best = (u, lhs)
    if best is None or not best[1].lo > rhs.hi:
        # overlapping enclosures, or a window narrower than one ulp, mean the
        # precision ran out rather than the witness
        undecided = best is None or best[1].hi > rhs.lo
        raise NoWitnessFound(
            f"no probe beats log M(r^(1-2a)) - 2 = {rhs} at log r = {u_r}", probes=tried, undecided=undecided
        )
    return LocalCosWitness(u_r, alpha, best[0], best[1], rhs)


# ---------------------------------------------------------------------------
# sampled Beurling estimate (advisory)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BeurlingReport:
    applicable: bool
    E_measure: float
    E_intervals: tuple[tuple[float, float], ...]
    lhs: float
    rhs: float
    holds: bool | None
    resolution: int
    note: str = ""


def _float_log_m(F: EntireFunction, u: float) -> float:
    total = 3 * u
    for z in F.zeros:
        A = float(z.log_a)
        x = u - A
        if x == 0:
            return -math.inf
        tp = 2 * float(z.p.mid())
        if x < 0:
            total += tp * (math.log(-math.expm1(x)) if x > -0.7 else math.log1p(-math.exp(x)))
        else:
            total += tp * (x + math.log(-math.expm1(-x)))
    return total


def beurling_spotcheck(
    F: EntireFunction, u_r1, u_r2, mu_log, samples: int = 10_000
) -> BeurlingReport:
    """Compare both sides of the Beurling estimate on a sampled exceptional set.

    ``E = {t in (r1, r2): m(t) <= mu}`` is measured in ``u = log t`` from a
    uniform grid of ``samples`` cells plus the zero positions, with crossings
    located by bisection.  The result is advisory: nothing here is certified.
    """
    u1, u2, mu = ext(u_r1), ext(u_r2), ext(mu_log)
    LM1, LM2 = log_M(F, u1), log_M(F, u2)
    if not (u1 < u2 and LM1.certainly_gt(mu)):
        return BeurlingReport(False, 0.0, (), 0.0, 0.0, None, samples, "needs r1 < r2 and mu < M(r1)")
    a, b, level = float(u1), float(u2), float(mu)
    if not all(math.isfinite(v) for v in (a, b, level)):
        return BeurlingReport(False, 0.0, (), 0.0, 0.0, None, samples, "outside float range")

    def inE(u: float) -> bool:
        return _float_log_m(F, u) <= level

    grid = [a + (b - a) * i / samples for i in range(samples + 1)]
    grid += [float(z.log_a) for z in F.zeros if a < float(z.log_a) < b]
    grid.sort()

    def crossing(lo: float, hi: float, lo_in: bool) -> float:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if inE(mid) == lo_in:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    flags = [inE(u) for u in grid]
    intervals: list[list[float]] = []
    start = grid[0] if flags[0] else None
    for (p, fp), (q, fq) in zip(zip(grid, flags), zip(grid[1:], flags[1:])):
        if fp and not fq:
            intervals.append([start, crossing(p, q, True)])
            start = None
        elif fq and not fp:
            start = crossing(p, q, False)
    if start is not None:
        intervals.append([start, grid[-1]])
    measure = sum(hi - lo for lo, hi in intervals)
    lhs = float(LM2.mid()) - level
    rhs = 0.5 * math.exp(0.5 * measure) * (float(LM1.mid()) - level)
    return BeurlingReport(
        True, measure, tuple((lo, hi) for lo, hi in intervals), lhs, rhs, lhs > rhs, samples
    )


# ---------------------------------------------------------------------------
# certificate ladder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertLadder:
    """Shrink factors ``s_n`` and target radii ``log r_n`` for n = 0..H."""

    N: int
    shrink: tuple[Enclosure, ...]
    u_rn: tuple[Enclosure, ...]

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "shrink": [s.to_json() for s in self.shrink],
            "u_rn": [u.to_json() for u in self.u_rn],
        }


def _eps_hi(table: GrowthTable, n: int) -> ExtReal:
    e = table.eps.get(n)
    if e is None or e.numeric is None:
        try:
            e = eps_numeric(table.F, table, n)
        except PrecisionLost as exc:
            raise LadderPrecisionLost(n, str(exc)) from exc
        table.eps[n] = e
    return e.upper()


def _size_conditions(table: GrowthTable, N: int, last: int, rf: ExtReal) -> bool:
    try:
        for n in range(N, last + 1):
            # R_{n+1}^(1/(8 n^2)) >= e^2
            if not table.log_R(n + 1).certainly_ge(Enclosure(16 * n * n)):
                return False
        LN, LN1 = table.log_R(N), table.log_R(N + 1)
    except PrecisionLost:
        return False
    return LN1.certainly_ge(LN * 4) and LN.certainly_ge(rf)


def choose_N(table: GrowthTable, horizon: int, rf: ExtReal, max_N: int) -> int:
    """Smallest N with a decisive partial sum below 1/8 and the size conditions."""
    for N in range(1, max_N + 1):
        last = N + horizon + 1
        if last + 1 > table.certified_through():
            break
        if not _size_conditions(table, N, last, rf):
            continue
        total = Enclosure(0)
        for n in range(N, last + 1):
            total = total + Enclosure(_eps_hi(table, n))
        if total.certainly_lt(Fraction(1, 8)):
            return N
    raise NoValidN(f"no N <= {max_N} meets the size and summability conditions on this ladder")


def cert_ladder(table: GrowthTable, N: int, horizon: int) -> CertLadder:
    F = table.F
    base = table.log_R(N + 1)
    shrink, targets = [], []
    s = Enclosure(1)
    for n in range(horizon + 1):
        m = N + n
        s = s * (1 - 2 * Enclosure(_eps_hi(table, m)) - Enclosure(Fraction(1, 8 * m * m)))
        u = base * s
        try:
            for _ in range(n + 1):
                u = log_M(F, u)
        except RangeExceeded as exc:
            raise LadderPrecisionLost(n, str(exc)) from exc
        if not u.hi.is_finite():
            raise LadderPrecisionLost(n, f"r_{n} is unbounded")
        shrink.append(s)
        targets.append(u)
    return CertLadder(N, tuple(shrink), tuple(targets))


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RhoCheck:
    n: int
    log_bound: Enclosure
    rung: bool
    log_m: Enclosure | None = None
    min_modulus: bool | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "log_Mn_base": self.log_bound.to_json(),
            "rung": self.rung,
            "log_m_rho": self.log_m.to_json() if self.log_m is not None else None,
            "min_modulus": self.min_modulus,
        }


@dataclass
class SpidersWebCertificate:
    """``rho`` holds ``(n, log rho_n)``; the base of the checks is ``R_{N+1}``."""

    R: ExtReal
    N: int
    rho: list[tuple[int, ExtReal]]
    checks: list[RhoCheck] = field(default_factory=list)
    status: str = ""
    witnesses: list[LocalCosWitness] = field(default_factory=list)
    ladder: CertLadder | None = None

    @property
    def horizon(self) -> int:
        return len(self.rho) - 1

    @property
    def complete(self) -> bool:
        return self.status.startswith("Complete")

    def with_rho(self, n: int, u: ExtReal) -> "SpidersWebCertificate":
        """Copy with ``log rho_n`` replaced and the derived records dropped."""
        rho = [(k, u if k == n else v) for k, v in self.rho]
        return SpidersWebCertificate(self.R, self.N, rho, status="Unchecked")

    def to_json(self) -> dict:
        return {
            "R": str(self.R),
            "N": self.N,
            "rho": [[n, str(u)] for n, u in self.rho],
            "checks": [c.to_json() for c in self.checks],
            "status": self.status,
            "witnesses": [w.to_json() for w in self.witnesses],
            "ladder": self.ladder.to_json() if self.ladder is not None else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "SpidersWebCertificate":
        rho = [(int(n), ExtReal.parse(u)) for n, u in data["rho"]]
        wit = [LocalCosWitness.from_json(w) for w in data.get("witnesses", [])]
        return cls(ExtReal.parse(data["R"]), int(data["N"]), rho, status=data.get("status", ""), witnesses=wit)


@dataclass(frozen=True)
class CertVerdict:
    kind: str  # "Valid", "InvalidAt" or "Indeterminate"
    n: int | None = None
    which: str | None = None

    @property
    def exit_code(self) -> int:
        return {"Valid": 0, "InvalidAt": 2}.get(self.kind, 3)

    def __str__(self) -> str:
        if self.kind == "Valid":
            return "Valid"
        return f"{self.kind}({self.n}, {self.which})"


def _run_checks(
    F: EntireFunction, table: GrowthTable, N: int, rho: Sequence[tuple[int, ExtReal]]
) -> tuple[list[RhoCheck], CertVerdict]:
    checks: list[RhoCheck] = []
    verdict = CertVerdict("Valid")
    H = len(rho) - 1
    for idx, (n, u) in enumerate(rho):
        if n != idx:
            return checks, CertVerdict("InvalidAt", idx, "index")
        try:
            bound = table.log_R(N + 1 + n)
        except PrecisionLost:
            return checks, CertVerdict("Indeterminate", n, "rung")
        ue = Enclosure(u)
        rung = ue.certainly_gt(bound)
        lm = ok = None
        if n < H:
            lm = log_m(F, u)
            ok = lm.certainly_ge(rho[n + 1][1])
        checks.append(RhoCheck(n, bound, rung, lm, ok))
        if verdict.kind == "Valid":
            if not rung:
                kind = "InvalidAt" if ue.certainly_le(bound) else "Indeterminate"
                verdict = CertVerdict(kind, n, "rung")
            elif ok is False:
                kind = "InvalidAt" if lm.certainly_lt(rho[n + 1][1]) else "Indeterminate"
                verdict = CertVerdict(kind, n, "min-modulus")
    return checks, verdict


def check_certificate(F: EntireFunction, cert: SpidersWebCertificate) -> CertVerdict:
    """Re-verify both inequality families on a freshly built ladder."""
    if not cert.rho:
        return CertVerdict("InvalidAt", 0, "empty")
    try:
        table = build_ladder(F, cert.R, cert.N + 1 + cert.horizon)
    except Exception:
        return CertVerdict("Indeterminate", 0, "ladder")
    _, verdict = _run_checks(F, table, cert.N, cert.rho)
    return verdict


def _lowest_point(F: EntireFunction, lo: ExtReal, hi: ExtReal, c: ExtReal) -> ExtReal:
    """Smallest u in (lo, hi] found with log m(u) >= c decisively; ``hi`` must qualify.

    Between consecutive zeros ``log m`` is concave in u, so each zero-free
    segment has an interval of qualifying points, found from its maximum.
    """

    def good(u: ExtReal) -> bool:
        return log_m(F, u).lo >= c

    knots = [lo] + [z.log_a for z in F.zeros if lo < z.log_a < hi] + [hi]
    for a, b in zip(knots, knots[1:]):
        top = b if b == hi else None
        if top is None:
            width = b - a

            def neg(t: float) -> float:
                u = a + width * ExtReal(min(max(t, 0.0), 1.0))
                v = log_m(F, u).mid()
                return -float(v) if v.is_finite() else math.inf

            t_star = optimize.minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12}).x
            cand = a + width * ExtReal(float(t_star))
            if not (a < cand < b and good(cand)):
                continue
            top = cand
        # good(a) is false or a is the excluded lower end; bisect up to top
        left, right = a, top
        while right - left > abs(right) * ExtReal.power_of_two(-TIGHT_BITS):
            mid = (left + right) / 2
            if not (left < mid < right):
                break
            if good(mid):
                right = mid
            else:
                left = mid
        return right
    return hi


def _tighten(
    F: EntireFunction, table: GrowthTable, N: int, rho: list[tuple[int, ExtReal]]
) -> list[tuple[int, ExtReal]]:
    H = len(rho) - 1
    out: list[ExtReal] = [ExtReal(0)] * (H + 1)
    top = table.log_R(N + 1 + H).hi
    cand = top + abs(top) * ExtReal.power_of_two(-TIGHT_BITS)
    out[H] = min(cand, rho[H][1])
    for n in range(H - 1, -1, -1):
        floor_u = table.log_R(N + 1 + n).hi
        floor_u = floor_u + abs(floor_u) * ExtReal.power_of_two(-TIGHT_BITS - 8)
        w = rho[n][1]
        if not (floor_u < w and log_m(F, w).lo >= out[n + 1]):
            out[n] = w
            continue
        out[n] = _lowest_point(F, floor_u, w, out[n + 1])
    return list(enumerate(out))


def build_certificate(
    F: EntireFunction,
    R,
    horizon: int,
    *,
    max_N: int = 8,
    tighten: bool = True,
    table: GrowthTable | None = None,
) -> SpidersWebCertificate:
    """Search for ``rho_0..rho_horizon`` over the base ``R_{N+1}``.

    ``N`` is the smallest value meeting the summability and size conditions.
    Witness radii come from :func:`find_witness` with ``alpha = eps_{n+N+1}``;
    with ``tighten`` they are then lowered to the smallest radii that still
    pass both checks.
    """
    R = ext(R)
    if horizon < 0:
        raise InvalidInput("horizon must be non-negative")
    if table is None:
        table = build_ladder(F, R, max_N + horizon + 2)
    rf = log_rf(F)
    N = choose_N(table, horizon, rf, max_N)
    ladder = cert_ladder(table, N, horizon)
    witnesses = []
    for n in range(horizon + 1):
        alpha = _eps_hi(table, n + N + 1).to_fraction()
        try:
            w = find_witness(F, ladder.u_rn[n].mid(), alpha, rf)
        except NoWitnessFound as exc:
            if exc.undecided:
                raise LadderPrecisionLost(n + N + 1, f"rung {n}: witness comparison undecided: {exc}") from exc
            raise WitnessSearchFailed(n, f"rung {n}: {exc}") from exc
        except (HypothesisFails, InvalidInput) as exc:
            raise WitnessSearchFailed(n, f"rung {n}: {exc}") from exc
        witnesses.append(w)
    rho = [(n, w.u_t) for n, w in enumerate(witnesses)]
    checks, verdict = _run_checks(F, table, N, rho)
    if verdict.kind == "Valid" and tighten:
        rho = _tighten(F, table, N, rho)
        checks, verdict = _run_checks(F, table, N, rho)
    status = f"Complete({horizon})" if verdict.kind == "Valid" else f"FailedAt({verdict.n})"
    return SpidersWebCertificate(R, N, rho, checks, status, witnesses, ladder)

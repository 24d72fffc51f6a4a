import math
import random
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
import xnum_trials
from spiderweb.errors import DomainError, ExactZero, IndeterminateComparison, RangeExceeded
from spiderweb.xnum import (
    Enclosure,
    ExtReal,
    LevelReal,
    Order,
    demote,
    logabs_one_minus_exp,
    logabs_one_minus_exp_interval,
    precision,
    promote,
    softplus,
    softplus_interval,
    working_precision,
)

LN2 = Decimal(2).ln()


def ext_values(min_exp=-80, max_exp=80):
    return st.builds(
        lambda man, e, neg: (-1 if neg else 1) * ExtReal.from_raw((0, man | (1 << 52), e - 52, 53)),
        st.integers(0, (1 << 52) - 1),
        st.integers(min_exp, max_exp),
        st.booleans(),
    )


# -- ExtReal ------------------------------------------------------------


class TestExtReal:
    def test_normalised_fields(self):
        x = ExtReal(12)
        assert x.sign == 1
        assert x.mantissa == Fraction(3, 2)
        assert x.exponent == 3
        assert ExtReal(0).sign == 0
        assert ExtReal(-0.375).sign == -1
        assert ExtReal(-0.375).mantissa == Fraction(3, 2)
        assert ExtReal(-0.375).exponent == -2

    def test_huge_exponent_is_exact_int(self):
        x = ExtReal.power_of_two(2**300)
        assert x.exponent == 2**300
        assert x > ExtReal.power_of_two(2**300 - 1)

    def test_immutable(self):
        x = ExtReal(3)
        with pytest.raises(AttributeError):
            x.foo = 1

    def test_decimal_format_shape(self):
        assert str(ExtReal(1024)).startswith("+1.024")
        assert str(ExtReal(1024)).endswith("E+3")
        assert str(ExtReal(-0.5)).endswith("E-1")
        assert str(ExtReal(0)) == "+0"

    @given(ext_values(-3000, 3000))
    @settings(max_examples=300, deadline=None)
    def test_serialization_round_trip_exact(self, x):
        assert ExtReal.parse(str(x)) == x

    def test_round_trip_wide_mantissa(self):
        rng = random.Random(5)
        for _ in range(200):
            man = rng.getrandbits(200) | (1 << 199)
            x = ExtReal.from_raw((0, man, rng.randint(-10**6, 10**6), 200))
            assert ExtReal.parse(str(x)) == x

    def test_short_string_parse(self):
        assert ExtReal.parse("+1.5E+2") == 150
        assert ExtReal.parse("-2E0") == -2
        assert ExtReal.parse("+inf") > ExtReal.power_of_two(10**9)
        with pytest.raises(DomainError):
            ExtReal.parse("1.2.3")

    @given(ext_values(), ext_values(), ext_values())
    @settings(max_examples=300, deadline=None)
    def test_total_order(self, a, b, c):
        # antisymmetry
        if a <= b and b <= a:
            assert a == b
        # transitivity
        if a <= b and b <= c:
            assert a <= c
        assert (a < b) + (a == b) + (a > b) == 1

    def test_order_matches_fractions(self):
        rng = random.Random(11)
        for _ in range(10_000):
            a = xnum_trials.random_ext(rng)
            b = xnum_trials.random_ext(rng)
            assert (a < b) == (a.to_fraction() < b.to_fraction())

    def test_order_on_random_triples(self):
        rng = random.Random(12)
        for _ in range(10_000):
            a, b, c = (xnum_trials.random_ext(rng, -3000, 3000) for _ in range(3))
            lo, mid, hi = sorted((a, b, c))
            assert lo <= mid <= hi
            assert lo <= hi


# -- Enclosure -----------------------------------------------------------


class TestEnclosure:
    def test_pow_int_exact(self):
        r = Enclosure(2).pow_int(10)
        assert r.is_point and r.lo == 1024

    def test_ln_exp_inverse_pair(self):
        x = 12345.678
        r = Enclosure(x).exp().ln()
        assert r.contains(ExtReal(x))
        assert r.width() <= ExtReal(2.0**-40) * abs(x)

    def test_product_beyond_double_range(self):
        big = Enclosure("1E400")
        r = big * big
        assert oracle.inside(r, Decimal("1E800"), Decimal("1e-17"))
        assert r.rel_width() < 2.0**-55

    def test_division_by_zero_rejected(self):
        with pytest.raises(DomainError):
            Enclosure(1) / Enclosure(-1, 1)

    def test_ln_requires_positive(self):
        with pytest.raises(DomainError):
            Enclosure(0, 2).ln()
        with pytest.raises(DomainError):
            Enclosure(-3).ln()

    def test_compare_outcomes(self):
        a, b = Enclosure(1, 2), Enclosure(3, 4)
        assert a.compare(b) is Order.LESS
        assert b.compare(a) is Order.GREATER
        assert Enclosure(5).compare(Enclosure(5)) is Order.EQUAL
        assert a.compare(Enclosure(Fraction(3, 2), 3)) is Order.INDETERMINATE
        with pytest.raises(IndeterminateComparison):
            a.decide_lt(Enclosure(Fraction(3, 2), 3))
        assert a.decide_lt(b)

    def test_empty_interval_rejected(self):
        with pytest.raises(DomainError):
            Enclosure(2, 1)

    def test_exp_range_limit(self):
        with pytest.raises(RangeExceeded):
            Enclosure(ExtReal.power_of_two(5000)).exp()
        tiny = Enclosure(-ExtReal.power_of_two(5000)).exp()
        assert tiny.lo.sign >= 0 and tiny.hi < ExtReal.power_of_two(-(2**4000))

    def test_huge_exp_argument_within_range(self):
        r = Enclosure(1e6).exp()
        v = oracle.exp(Decimal(10**6))
        assert oracle.inside(r, v)

    def test_json_round_trip(self):
        e = Enclosure(Fraction(1, 3))
        assert Enclosure.from_json(e.to_json()) == e
        p = Enclosure(7)
        assert p.to_json() == str(ExtReal(7))

    def test_rational_point_is_bracketed(self):
        e = Enclosure(Fraction(1, 3))
        assert not e.is_point
        assert e.lo.to_fraction() < Fraction(1, 3) < e.hi.to_fraction()

    def test_randomised_containment_sample(self):
        assert xnum_trials.run_trials(2000, seed=99) == []

    @pytest.mark.parametrize("op", xnum_trials.OPS)
    def test_containment_per_operation(self, op):
        rng = random.Random(hash(op) & 0xFFFF)
        for _ in range(200):
            desc, got, ref = xnum_trials.trial(rng, op)
            assert oracle.inside(got, ref), desc

    def test_interval_operands_contain_endpoint_results(self):
        rng = random.Random(3)
        for _ in range(500):
            a = xnum_trials.random_ext(rng, -20, 20)
            b = xnum_trials.random_ext(rng, -20, 20)
            c = xnum_trials.random_ext(rng, -20, 20)
            d = xnum_trials.random_ext(rng, -20, 20)
            x = Enclosure(min(a, b), max(a, b))
            y = Enclosure(min(c, d), max(c, d))
            for u in (x.lo, x.hi):
                for v in (y.lo, y.hi):
                    du, dv = oracle.dec(u), oracle.dec(v)
                    assert oracle.inside(x + y, du + dv)
                    assert oracle.inside(x - y, du - dv)
                    assert oracle.inside(x * y, du * dv)
                    if y.lo.sign == y.hi.sign:
                        assert oracle.inside(x / y, du / dv)

    def test_doubled_precision_narrows(self):
        wide = Enclosure(3).ln()
        with precision(128):
            narrow = Enclosure(3).ln()
        assert narrow.width() < wide.width()
        assert wide.contains(narrow)
        assert working_precision() == 64


# -- softplus / log|1 - e^x| --------------------------------------------


class TestSoftplus:
    def test_zero(self):
        r = softplus(0)
        assert oracle.inside(r, LN2)
        assert r.width() <= ExtReal(2.0**-48)

    def test_negative_infinity(self):
        r = softplus(ExtReal.parse("-inf"))
        assert r.is_point and r.lo == 0

    def test_large_argument(self):
        r = softplus(1000)
        ref = oracle.softplus(Decimal(1000))
        assert oracle.inside(r, ref)
        assert r.lo == 1000

    def test_tiny_tail(self):
        r = softplus(-1000)
        assert oracle.inside(r, oracle.softplus(Decimal(-1000)))
        assert r.lo.sign == 1

    def test_enormous_arguments(self):
        big = ExtReal.power_of_two(10**5)
        assert softplus(big).lo == big
        r = softplus(-big)
        assert r.lo.sign >= 0 and r.hi < ExtReal.power_of_two(-(10**4))

    @given(ext_values(-40, 10), ext_values(-40, 10))
    @settings(max_examples=300, deadline=None)
    def test_no_decisive_inversion(self, a, b):
        x, y = min(a, b), max(a, b)
        sx, sy = softplus(x), softplus(y)
        assert sx.lo <= sx.hi
        assert not sx.certainly_gt(sy)

    def test_interval_version_brackets(self):
        x = Enclosure(-3, 2)
        r = softplus_interval(x)
        assert r.contains(softplus(-3).lo) and r.contains(softplus(2).hi)


class TestLogAbsOneMinusExp:
    def test_at_log2(self):
        x = ExtReal(math.log(2))
        r = logabs_one_minus_exp(x)
        assert oracle.inside(r, oracle.logabs_one_minus_exp(oracle.dec(x)))
        assert abs(r.lo) < 1e-15 and abs(r.hi) < 1e-15

    def test_at_minus_log2(self):
        x = ExtReal(-math.log(2))
        r = logabs_one_minus_exp(x)
        assert oracle.inside(r, oracle.logabs_one_minus_exp(oracle.dec(x)))
        assert abs(float(r.mid()) + 0.693147) < 1e-6

    def test_small_positive(self):
        r = logabs_one_minus_exp(1e-6)
        ref = oracle.logabs_one_minus_exp(oracle.dec(ExtReal(1e-6)))
        assert oracle.inside(r, ref)
        assert abs(float(r.mid()) - (math.log(1e-6) + 5e-7)) < 1e-12

    def test_exact_zero(self):
        with pytest.raises(ExactZero):
            logabs_one_minus_exp(0)

    @pytest.mark.parametrize("x", ["1E-30", "-1E-30", "1E-300", "-3E-5", "700", "-700", "0.5", "-0.5"])
    def test_cancellation_regimes(self, x):
        v = ExtReal.parse(x)
        assert oracle.inside(logabs_one_minus_exp(v), oracle.logabs_one_minus_exp(oracle.dec(v)))

    def test_monotone_both_sides(self):
        xs = [ExtReal(v) for v in (-5.0, -1.0, -0.1, -1e-3)]
        vals = [logabs_one_minus_exp(x) for x in xs]
        assert all(a.certainly_gt(b) for a, b in zip(vals, vals[1:]))
        xs = [ExtReal(v) for v in (1e-3, 0.1, 1.0, 5.0)]
        vals = [logabs_one_minus_exp(x) for x in xs]
        assert all(a.certainly_lt(b) for a, b in zip(vals, vals[1:]))

    def test_interval_straddling_zero(self):
        r = logabs_one_minus_exp_interval(Enclosure(-1, 1))
        assert not r.lo.is_finite()
        assert r.hi >= logabs_one_minus_exp(1).hi


# -- LevelReal -----------------------------------------------------------


class TestLevelReal:
    def test_e_to_the_e(self):
        x = Enclosure(1).exp().exp()
        lv = promote(x.hi)
        assert lv.level == 2
        assert abs(lv.residual - 1) <= 2.0**-40

    def test_level_zero_demote(self):
        assert demote(LevelReal(0, ExtReal(1.5))) == ExtReal(1.5)

    def test_ten_to_ten_to_thirty(self):
        with precision(128):
            x = ExtReal.parse("1E+1000000000000000000000000000000")
        lv = promote(x)
        # ln ln ln ln x against the decimal oracle
        d = Decimal(10**30) * Decimal(10).ln()  # ln x
        for _ in range(3):
            d = d.ln()
        assert lv.level == 4
        assert abs(oracle.dec(lv.residual) - d) < Decimal(2) ** -40

    def test_round_trip(self):
        rng = random.Random(8)
        for _ in range(200):
            lv = LevelReal(rng.randint(0, 3), ExtReal(1 + rng.random() * 1.718))
            back = promote(demote(lv))
            assert back.level == lv.level
            assert abs(back.residual - lv.residual) <= abs(lv.residual) * 2.0**-40

    def test_demote_out_of_range(self):
        with pytest.raises(RangeExceeded):
            demote(LevelReal(6, ExtReal(2)))

    def test_band_enforced(self):
        with pytest.raises(DomainError):
            LevelReal(2, ExtReal(3))

    def test_ordering_agrees_with_ext(self):
        rng = random.Random(9)
        for _ in range(2000):
            a = xnum_trials.random_ext(rng, -50, 3000, signed=False)
            b = xnum_trials.random_ext(rng, -50, 3000, signed=False)
            assert (promote(a) < promote(b)) == (a < b) or promote(a) == promote(b)

    def test_higher_level_dominates(self):
        assert LevelReal(3, ExtReal(1)) > LevelReal(2, ExtReal(2.7))

    def test_log_exp(self):
        lv = LevelReal(5, ExtReal(1.25))
        assert lv.log() == LevelReal(4, ExtReal(1.25))
        assert lv.exp() == LevelReal(6, ExtReal(1.25))
        assert promote(ExtReal(100)).log().level == promote(ExtReal(100).ln()).level

    def test_serialisation(self):
        lv = LevelReal(3, ExtReal(1.5))
        assert str(lv).startswith("L3:+1.5")
        assert LevelReal.parse(str(lv)) == lv

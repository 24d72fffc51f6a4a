import math
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

import ledgers
import oracle
from spiderweb.certificate import (
    CertVerdict,
    SpidersWebCertificate,
    beurling_spotcheck,
    build_certificate,
    cert_ladder,
    check_certificate,
    choose_N,
    find_witness,
    log_rf,
)
from spiderweb.entire import EntireFunction, cubic_model, log_M, log_m, slow_growth_family
from spiderweb.errors import (
    HypothesisFails,
    InvalidInput,
    NoValidN,
    LadderPrecisionLost,
    WitnessSearchFailed,
)
from spiderweb.growth import build_ladder
from spiderweb.xnum import Enclosure, ExtReal, precision


@pytest.fixture(scope="module")
def slow():
    return slow_growth_family()


@pytest.fixture(scope="module")
def slow_cert(slow):
    return build_certificate(slow, 10, 4)


def _dense_float_log_m(F, u):
    return float(oracle.log_m(F, oracle.dec(ExtReal(u))))


class TestRf:
    def test_cubic_grid_point(self):
        # 3u >= 2 first holds at u = ln 2 on the 2**(j/8) grid
        u = log_rf(cubic_model())
        assert abs(float(u) - math.log(2)) < 1e-15

    def test_value_reaches_e_squared(self, slow):
        u = log_rf(slow)
        assert log_M(slow, u).lo >= 2
        below = ExtReal(float(u) - math.log(2) / 8)
        assert not log_M(slow, below).lo >= 2


class TestFindWitness:
    def test_zero_free_interval(self):
        w = find_witness(cubic_model(), 100, Fraction(1, 10))
        assert 80 < float(w.u_t) < 100
        assert w.decisive
        # m = M here, and M increases
        assert w.lhs.lo >= 3 * 80

    def test_interval_containing_a_zero(self):
        F = ledgers.constructed_like()
        F = EntireFunction(F.zeros[:1], F.kind)
        alpha = Fraction(1, 5)
        w = find_witness(F, 310, alpha)
        lo = 310 * (1 - 2 * float(alpha))
        assert lo < float(w.u_t) < 310
        ref = oracle.log_m(F, oracle.dec(w.u_t))
        assert oracle.inside(w.lhs, ref)
        rhs_ref = oracle.log_M(F, Decimal(lo)) - 2
        assert ref > rhs_ref
        assert w.reverify(F)

    def test_hypothesis_failure(self):
        with pytest.raises(HypothesisFails):
            find_witness(ledgers.single_zero(), 1, Fraction(2, 5))

    def test_small_radius_below_rf(self):
        with pytest.raises(HypothesisFails):
            find_witness(cubic_model(), ExtReal("0.7"), Fraction(49, 100))

    @pytest.mark.parametrize("alpha", [Fraction(0), Fraction(1, 2), Fraction(3, 4)])
    def test_alpha_range(self, alpha):
        with pytest.raises(InvalidInput):
            find_witness(cubic_model(), 100, alpha)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=30, max_value=2e5), st.floats(min_value=0.01, max_value=0.2))
    def test_witness_sound_at_double_precision(self, u, margin):
        F = slow_growth_family(count=12)
        need = math.log(float(log_M(F, ExtReal(u)).hi)) / u
        alpha = Fraction(need + margin).limit_denominator(10**6)
        if not need < alpha < Fraction(1, 2):
            return
        w = find_witness(F, ExtReal(u), alpha)
        assert w.decisive and w.reverify(F)

    def test_json_round_trip(self):
        w = find_witness(cubic_model(), 100, Fraction(1, 10))
        from spiderweb.certificate import LocalCosWitness

        assert LocalCosWitness.from_json(w.to_json()) == w


class TestBeurling:
    def test_zero_free_interval_has_empty_set(self):
        F = cubic_model()
        rep = beurling_spotcheck(F, 10, 20, 5)
        assert rep.applicable and rep.E_measure == 0.0
        assert rep.holds
        assert rep.lhs == pytest.approx(60 - 5)
        assert rep.rhs == pytest.approx(0.5 * (30 - 5))

    def test_single_zero_measured(self):
        F = ledgers.single_zero_mid_rung()
        mu = float(log_M(F, ExtReal(45)).mid()) - 5
        rep = beurling_spotcheck(F, 45, 60, mu)
        assert rep.holds
        # the set is an interval starting at r1 and ending past the zero
        (lo, hi), = rep.E_intervals
        assert lo == 45 and hi > 50
        assert _dense_float_log_m(F, hi + 1e-6) > mu
        assert _dense_float_log_m(F, hi - 1e-6) <= mu
        assert rep.E_measure == pytest.approx(hi - lo)

    def test_mu_near_M_r1(self):
        F = ledgers.two_zeros()
        mu = float(log_M(F, ExtReal(12)).lo) - 1e-9
        rep = beurling_spotcheck(F, 12, 30, mu)
        assert rep.holds and rep.rhs < 1e-6 * max(1.0, math.exp(0.5 * rep.E_measure))

    def test_not_applicable(self):
        rep = beurling_spotcheck(cubic_model(), 10, 20, 31)
        assert not rep.applicable and rep.holds is None
        assert not beurling_spotcheck(cubic_model(), 20, 10, 1).applicable


class TestLadder:
    def test_shrink_factors_exceed_half(self, slow):
        T = build_ladder(slow, 10, 10)
        N = choose_N(T, 4, log_rf(slow), 6)
        L = cert_ladder(T, N, 4)
        for s in L.shrink:
            assert s.certainly_gt(Fraction(1, 2))
        for n, u in enumerate(L.u_rn):
            # R_{N+n+1}^2 < r_n < R_{N+n+2}
            assert u.certainly_gt(T.log_R(N + n + 1) * 2)
            assert u.certainly_lt(T.log_R(N + n + 2))

    def test_cubic_never_meets_size_condition(self):
        # M(r) = r^3 cannot give R_{N+1} >= R_N^4
        with pytest.raises(NoValidN):
            build_certificate(cubic_model(), 10, 4)


class TestCertificate:
    def test_slow_growth_complete(self, slow, slow_cert):
        assert slow_cert.status == "Complete(4)"
        assert slow_cert.horizon == 4
        assert check_certificate(slow, slow_cert) == CertVerdict("Valid")
        assert all(w.reverify(slow) for w in slow_cert.witnesses)

    def test_direct_check_in_decimal(self, slow, slow_cert):
        N, rho = slow_cert.N, slow_cert.rho
        u = oracle.dec(ExtReal(10).ln())
        bounds = [u]
        for _ in range(N + 1 + slow_cert.horizon):
            bounds.append(oracle.log_M(slow, bounds[-1]))
        for n, un in rho:
            d = oracle.dec(un)
            assert d > bounds[N + 1 + n]
            if n < slow_cert.horizon:
                assert oracle.log_m(slow, d) >= oracle.dec(rho[n + 1][1])

    def test_one_percent_tamper_flips(self, slow, slow_cert):
        for n, u in slow_cert.rho:
            assert check_certificate(slow, slow_cert.with_rho(n, u * ExtReal("0.99"))).kind == "InvalidAt"
            if n > 0:
                assert check_certificate(slow, slow_cert.with_rho(n, u * ExtReal("1.01"))).kind == "InvalidAt"

    @pytest.mark.xfail(strict=True, reason="raising rho_0 only strengthens both checks")
    def test_raising_first_radius_flips(self, slow, slow_cert):
        u = slow_cert.rho[0][1]
        assert check_certificate(slow, slow_cert.with_rho(0, u * ExtReal("1.01"))).kind == "InvalidAt"

    def test_forced_rung_violation(self, slow, slow_cert):
        T = build_ladder(slow, 10, slow_cert.N + 2)
        low = T.log_R(slow_cert.N + 2).lo * ExtReal("0.9")
        v = check_certificate(slow, slow_cert.with_rho(1, low))
        assert v == CertVerdict("InvalidAt", 1, "rung")

    def test_forced_min_modulus_violation(self, slow, slow_cert):
        n = 2
        above = log_m(slow, slow_cert.rho[n][1]).hi * ExtReal("1.5")
        v = check_certificate(slow, slow_cert.with_rho(n + 1, above))
        assert v == CertVerdict("InvalidAt", n, "min-modulus")

    def test_larger_base_also_succeeds(self, slow, slow_cert):
        other = build_certificate(slow, 20, 4)
        assert other.complete and check_certificate(slow, other).kind == "Valid"

    def test_json_round_trip(self, slow, slow_cert):
        back = SpidersWebCertificate.from_json(slow_cert.to_json())
        assert back.rho == slow_cert.rho and back.N == slow_cert.N
        assert check_certificate(slow, back).kind == "Valid"

    def test_deterministic(self, slow, slow_cert):
        again = build_certificate(slow, 10, 4)
        assert again.dumps() == slow_cert.dumps()

    def test_hand_built_cubic(self):
        # m = M for z^3, so rho_n = 2 R_{n+1} works over the base R_1
        F = cubic_model()
        T = build_ladder(F, 10, 6)
        rho = [(n, (T.log_R(n + 1) + Enclosure(2).ln()).hi) for n in range(5)]
        cert = SpidersWebCertificate(ExtReal(10), 0, rho)
        assert check_certificate(F, cert).kind == "Valid"

    def test_verdict_exit_codes(self):
        assert CertVerdict("Valid").exit_code == 0
        assert CertVerdict("InvalidAt", 1, "rung").exit_code == 2
        assert CertVerdict("Indeterminate", 0, "ladder").exit_code == 3

    def test_constructed_function_observed(self):
        # growth too fast for the argument: the witness window drops below one ulp
        with pytest.raises((WitnessSearchFailed, NoValidN, LadderPrecisionLost)):
            build_certificate(ledgers.constructed_like(), 10, 3)

    def test_precision_does_not_change_outcome(self, slow):
        with precision(96):
            cert = build_certificate(slow, 10, 2)
        assert cert.complete and check_certificate(slow, cert).kind == "Valid"

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from config import DEFAULT_CONFIG
from errors import DivisionByZero, EmptyIntersection, InvalidInput, PrecisionExhausted, ZeroMagnitude
from magnitude import (
    ONE, ZERO, GroupKind, Magnitude, Ordering, ValueGroup, _log_sign, coset_of,
    dyadic_search, mag_cmp, mag_div, mag_mul, mag_root, representative_in,
)
from strategies import exponents, magnitudes, positive_rationals, primes

F = Fraction
DISCRETE_2 = ValueGroup(2, GroupKind.DISCRETE)
DENSE_2 = ValueGroup(2, GroupKind.DENSE)


def two(e) -> Magnitude:
    return Magnitude.power(2, F(e))


class TestArithmetic:
    def test_mul_adds_exponents(self):
        assert mag_mul(two(F(-1, 2)), two(F(-1, 2))) == two(-1)

    def test_root_divides_exponents(self):
        expected = Magnitude.from_factors([(2, F(-2, 3)), (3, F(1, 3))])
        assert mag_root(Magnitude.of(F(3, 4)), 3) == expected

    def test_div_inverts(self):
        assert mag_div(ONE, two(F(1, 3))) == two(F(-1, 3))

    def test_zero_is_absorbing(self):
        assert mag_mul(ZERO, two(5)) == ZERO
        assert mag_div(ZERO, two(5)) == ZERO

    def test_division_by_zero(self):
        with pytest.raises(DivisionByZero):
            mag_div(ONE, ZERO)

    def test_root_of_zero(self):
        with pytest.raises(ZeroMagnitude):
            mag_root(ZERO, 2)

    def test_bad_factors_rejected(self):
        with pytest.raises(InvalidInput):
            Magnitude(((4, F(1)),))
        with pytest.raises(InvalidInput):
            Magnitude(((3, F(1)), (2, F(1))))

    def test_str(self):
        assert str(Magnitude.of(F(3, 4))) == "2^-2*3^1"
        assert str(two(F(-1, 2))) == "2^-1/2"
        assert str(ONE) == "1"
        assert str(ZERO) == "0"


class TestComparison:
    def test_half_above_third(self):
        assert mag_cmp(two(-1), Magnitude.power(3, -1)) == Ordering.GT

    def test_interval_refinement(self):
        assert mag_cmp(two(F(-1, 2)), Magnitude.of(F(3, 4))) == Ordering.LT

    def test_canonical_equality(self):
        assert mag_cmp(two(F(3, 6)), two(F(1, 2))) == Ordering.EQ

    def test_zero_is_minimal(self):
        assert ZERO < Magnitude.power(7, -30)

    def test_close_values(self):
        # 2^10 = 1024 against 1000 = 2^3 * 5^3
        assert Magnitude.of(1000) < two(10)

    def test_refinement_budget_exhausted(self, monkeypatch):
        monkeypatch.setattr(DEFAULT_CONFIG.arithmetic, "max_log_bits", 32)
        _log_sign.cache_clear()
        try:
            with pytest.raises(PrecisionExhausted):
                mag_cmp(Magnitude.power(3, F(1, 7)), Magnitude.power(5, F(1, 11)))
        finally:
            _log_sign.cache_clear()


class TestCosets:
    def test_integer_exponent_is_trivial(self):
        assert coset_of(two(3), DISCRETE_2).is_trivial

    def test_fractional_exponent_kept(self):
        assert coset_of(two(F(1, 2)), DISCRETE_2).factors == ((2, F(1, 2)),)

    def test_dense_drops_p(self):
        m = Magnitude.from_factors([(2, F(5, 7)), (3, 1)])
        assert coset_of(m, DENSE_2).factors == ((3, F(1)),)

    def test_zero_has_no_coset(self):
        with pytest.raises(ZeroMagnitude):
            coset_of(ZERO, DISCRETE_2)


class TestValueGroup:
    def test_exponent_of_absent_prime(self):
        m = Magnitude.from_factors([(2, F(-3, 2)), (5, 1)])
        assert m.exponent(2) == F(-3, 2)
        assert m.exponent(3) == 0

    @pytest.mark.parametrize("m,discrete,dense", [
        (two(3), True, True),
        (two(F(1, 2)), False, True),
        (Magnitude.power(3, 1), False, False),
        (ZERO, False, False),
    ])
    def test_contains(self, m, discrete, dense):
        assert DISCRETE_2.contains(m) is discrete
        assert DENSE_2.contains(m) is dense


class TestRepresentatives:
    half = Magnitude.of(F(1, 2))

    def test_discrete_half_coset(self):
        c = coset_of(two(F(1, 2)), DISCRETE_2)
        assert representative_in(c, self.half, ONE, DISCRETE_2) == two(F(-1, 2))

    def test_discrete_trivial(self):
        c = coset_of(ONE, DISCRETE_2)
        assert representative_in(c, self.half, ONE, DISCRETE_2) == ONE

    def test_dense_search(self):
        c = coset_of(Magnitude.power(3, 1), DENSE_2)
        assert representative_in(c, self.half, ONE, DENSE_2) == Magnitude.of(F(3, 4))

    def test_discrete_short_interval(self):
        c = coset_of(ONE, DISCRETE_2)
        with pytest.raises(EmptyIntersection):
            representative_in(c, Magnitude.of(F(3, 5)), Magnitude.of(F(9, 10)), DISCRETE_2)

    def test_empty_interval(self):
        with pytest.raises(EmptyIntersection):
            representative_in(coset_of(ONE, DENSE_2), ONE, self.half, DENSE_2)

    def test_dyadic_search_open_end(self):
        q = dyadic_search(ONE, 2, Magnitude.of(F(9, 10)), ONE, include_hi=False)
        assert q == F(-1, 8)


class TestProperties:
    @given(positive_rationals)
    def test_rational_round_trip(self, value):
        assert Magnitude.of(value).as_fraction() == value

    @given(positive_rationals, positive_rationals)
    def test_order_agrees_with_rationals(self, a, b):
        assert (Magnitude.of(a) < Magnitude.of(b)) == (a < b)
        assert (Magnitude.of(a) == Magnitude.of(b)) == (a == b)

    @given(magnitudes, magnitudes, magnitudes)
    def test_group_laws(self, a, b, c):
        assert mag_mul(mag_mul(a, b), c) == mag_mul(a, mag_mul(b, c))
        assert mag_mul(a, b) == mag_mul(b, a)
        assert mag_mul(a, ONE) == a
        assert mag_root(mag_mul(a, a), 2) == a

    @given(magnitudes, magnitudes, magnitudes)
    def test_order_compatible_with_product(self, a, b, c):
        if a < b:
            assert mag_mul(a, c) < mag_mul(b, c)

    @given(magnitudes, primes, st.integers(min_value=-6, max_value=6), exponents)
    def test_coset_soundness(self, m, p, k, q):
        discrete = ValueGroup(p, GroupKind.DISCRETE)
        dense = ValueGroup(p, GroupKind.DENSE)
        assert coset_of(m, discrete) == coset_of(m * Magnitude.power(p, k), discrete)
        assert coset_of(m, dense) == coset_of(m * Magnitude.power(p, q), dense)

"""Hypothesis strategies shared by the test modules"""

from fractions import Fraction

from hypothesis import strategies as st

from magnitude import Magnitude

primes = st.sampled_from([2, 3, 5, 7])

positive_rationals = st.builds(
    Fraction,
    st.integers(min_value=1, max_value=10_000),
    st.integers(min_value=1, max_value=10_000),
)

exponents = st.builds(
    Fraction,
    st.integers(min_value=-12, max_value=12),
    st.sampled_from([1, 2, 3, 4, 6]),
)

magnitudes = st.lists(st.tuples(primes, exponents), max_size=3).map(
    lambda items: Magnitude.from_factors([(p, e) for p, e in items])
)

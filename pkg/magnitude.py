"""
Gurarii Toolkit - Exact Magnitudes

Positive reals of the form p1^e1 * ... * pk^ek with rational exponents, plus
a distinguished zero. Every norm, weight and threshold lives here; ordering is
decided symbolically when possible and by interval refinement of logarithms
otherwise.
"""

import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum, IntEnum
from fractions import Fraction
from functools import lru_cache, total_ordering
from typing import Dict, Iterable, Optional, Tuple, Union

from mpmath import iv
from sympy import factorint, isprime

from config import DEFAULT_CONFIG
from errors import (
    DivisionByZero, EmptyIntersection, InvalidInput, PrecisionExhausted, ZeroMagnitude,
)

logger = logging.getLogger("gurarii.magnitude")

Factors = Tuple[Tuple[int, Fraction], ...]

# mpmath interval contexts carry global precision
_IV_LOCK = threading.Lock()

# Dyadic searches give up after denominators 2^MAX_DYADIC_DEPTH
MAX_DYADIC_DEPTH = 48


class Ordering(IntEnum):
    """Result of mag_cmp"""
    LT = -1
    EQ = 0
    GT = 1


class GroupKind(Enum):
    """Value group kinds"""
    DISCRETE = "discrete"
    DENSE = "dense"


@lru_cache(maxsize=4096)
def _is_prime(n: int) -> bool:
    return bool(isprime(n))


def _canonical(items: Iterable[Tuple[int, Fraction]]) -> Factors:
    """Merge exponents per prime, drop zeros, sort by prime"""
    acc: Dict[int, Fraction] = {}
    for p, e in items:
        acc[p] = acc.get(p, Fraction(0)) + Fraction(e)
    return tuple(sorted((p, e) for p, e in acc.items() if e != 0))


@total_ordering
@dataclass(frozen=True)
class Magnitude:
    """
    Exact positive magnitude as a formal prime product.

    `factors` is sorted by prime with nonzero Fraction exponents; the empty
    product is 1. `zero` marks the norm of the zero vector.
    """
    factors: Factors = ()
    zero: bool = False

    def __post_init__(self):
        if self.zero and self.factors:
            raise InvalidInput("zero magnitude cannot carry factors")
        previous = 1
        for p, e in self.factors:
            if not isinstance(e, Fraction) or e == 0:
                raise InvalidInput(f"exponent of {p} must be a nonzero Fraction, got {e!r}")
            if p <= previous or not _is_prime(p):
                raise InvalidInput(f"factor base {p} is not a prime in ascending order")
            previous = p

    # ==================== Constructors ====================

    @classmethod
    def of(cls, value: Union[int, Fraction]) -> "Magnitude":
        """Factor a nonnegative rational"""
        value = Fraction(value)
        if value < 0:
            raise InvalidInput(f"magnitudes are nonnegative, got {value}")
        if value == 0:
            return ZERO
        items = [(p, Fraction(k)) for p, k in factorint(value.numerator).items()]
        items += [(p, Fraction(-k)) for p, k in factorint(value.denominator).items()]
        return cls(_canonical(items))

    @classmethod
    def power(cls, prime: int, exponent: Union[int, Fraction]) -> "Magnitude":
        return cls(_canonical([(prime, Fraction(exponent))]))

    @classmethod
    def from_factors(cls, items: Iterable[Tuple[int, Union[int, Fraction]]]) -> "Magnitude":
        return cls(_canonical(items))

    # ==================== Queries ====================

    def exponent(self, prime: int) -> Fraction:
        for p, e in self.factors:
            if p == prime:
                return e
        return Fraction(0)

    def as_fraction(self) -> Optional[Fraction]:
        """The rational value when every exponent is an integer"""
        if self.zero:
            return Fraction(0)
        if any(e.denominator != 1 for _, e in self.factors):
            return None
        value = Fraction(1)
        for p, e in self.factors:
            value *= Fraction(p) ** int(e)
        return value

    def log_value(self) -> float:
        """Approximate natural logarithm (only for initial guesses)"""
        if self.zero:
            return -math.inf
        return sum(float(e) * math.log(p) for p, e in self.factors)

    # ==================== Arithmetic ====================

    def __mul__(self, other: "Magnitude") -> "Magnitude":
        return mag_mul(self, other)

    def __truediv__(self, other: "Magnitude") -> "Magnitude":
        return mag_div(self, other)

    def __pow__(self, exponent: Union[int, Fraction]) -> "Magnitude":
        exponent = Fraction(exponent)
        if self.zero:
            if exponent > 0:
                return ZERO
            raise ZeroMagnitude("zero magnitude raised to a nonpositive power")
        return Magnitude(_canonical((p, e * exponent) for p, e in self.factors))

    def root(self, k: int) -> "Magnitude":
        return mag_root(self, k)

    def __lt__(self, other: "Magnitude") -> bool:
        if not isinstance(other, Magnitude):
            return NotImplemented
        return mag_cmp(self, other) == Ordering.LT

    def __str__(self) -> str:
        if self.zero:
            return "0"
        if not self.factors:
            return "1"
        return "*".join(f"{p}^{e}" for p, e in self.factors)

    def __repr__(self) -> str:
        return f"Magnitude({self})"


ZERO = Magnitude((), True)
ONE = Magnitude(())


# ==================== Operations ====================

def mag_mul(a: Magnitude, b: Magnitude) -> Magnitude:
    if a.zero or b.zero:
        return ZERO
    return Magnitude(_canonical(a.factors + b.factors))


def mag_div(a: Magnitude, b: Magnitude) -> Magnitude:
    if b.zero:
        raise DivisionByZero(f"division of {a} by the zero magnitude")
    if a.zero:
        return ZERO
    return Magnitude(_canonical(a.factors + tuple((p, -e) for p, e in b.factors)))


def mag_root(a: Magnitude, k: int) -> Magnitude:
    if k < 1:
        raise InvalidInput(f"root index must be a positive integer, got {k}")
    if a.zero:
        raise ZeroMagnitude("root of the zero magnitude")
    return Magnitude(tuple((p, e / k) for p, e in a.factors))


def mag_cmp(a: Magnitude, b: Magnitude) -> Ordering:
    """
    Exact comparison.

    Identical factor maps are EQ; otherwise the sign of the logarithm of a/b
    decides, which is nonzero because logs of distinct primes are linearly
    independent over Q.
    """
    if a.zero or b.zero:
        if a.zero and b.zero:
            return Ordering.EQ
        return Ordering.LT if a.zero else Ordering.GT
    if a.factors == b.factors:
        return Ordering.EQ
    quotient = _canonical(a.factors + tuple((p, -e) for p, e in b.factors))
    return _log_sign(quotient)


@lru_cache(maxsize=1 << 16)
def _log_sign(factors: Factors) -> Ordering:
    if all(e > 0 for _, e in factors):
        return Ordering.GT
    if all(e < 0 for _, e in factors):
        return Ordering.LT

    cfg = DEFAULT_CONFIG.arithmetic
    bits = cfg.initial_log_bits
    with _IV_LOCK:
        saved = iv.prec
        try:
            while bits <= cfg.max_log_bits:
                iv.prec = bits
                total = iv.mpf(0)
                for p, e in factors:
                    total += iv.log(p) * e.numerator / e.denominator
                if total.a > 0:
                    return Ordering.GT
                if total.b < 0:
                    return Ordering.LT
                logger.debug("log interval of %s straddles 0 at %d bits", factors, bits)
                bits *= 2
        finally:
            iv.prec = saved
    raise PrecisionExhausted(
        f"log refinement did not separate {factors} from 0 within {cfg.max_log_bits} bits"
    )


# ==================== Value groups and cosets ====================

@dataclass(frozen=True)
class ValueGroup:
    """|K*| as p^Z (discrete) or p^Q (dense)"""
    prime: int
    kind: GroupKind

    def __post_init__(self):
        if not _is_prime(self.prime):
            raise InvalidInput(f"value group prime must be prime, got {self.prime}")

    @property
    def uniformizer_magnitude(self) -> Optional[Magnitude]:
        if self.kind == GroupKind.DISCRETE:
            return Magnitude.power(self.prime, -1)
        return None

    @property
    def is_dense(self) -> bool:
        return self.kind == GroupKind.DENSE

    def contains(self, m: Magnitude) -> bool:
        if m.zero:
            return False
        if any(p != self.prime for p, _ in m.factors):
            return False
        return self.is_dense or m.exponent(self.prime).denominator == 1


@dataclass(frozen=True)
class Coset:
    """
    Canonical representative of m |K*|.

    Discrete groups keep the p-exponent reduced into [0, 1); dense groups
    delete it.
    """
    factors: Factors
    kind: GroupKind
    prime: int

    @property
    def is_trivial(self) -> bool:
        return not self.factors

    @property
    def base(self) -> Magnitude:
        return Magnitude(self.factors)

    def sort_key(self) -> Factors:
        return self.factors

    def __str__(self) -> str:
        return f"[{self.base}]"


def coset_of(m: Magnitude, g: ValueGroup) -> Coset:
    if m.zero:
        raise ZeroMagnitude("the zero magnitude has no coset")
    items = []
    for p, e in m.factors:
        if p == g.prime:
            if g.is_dense:
                continue
            e = e - math.floor(e)
            if e == 0:
                continue
        items.append((p, e))
    return Coset(tuple(items), g.kind, g.prime)


def ladder_point_at_most(base: Magnitude, prime: int, hi: Magnitude) -> Tuple[int, Magnitude]:
    """Largest base * prime^k (k integer) not exceeding hi"""
    k = math.floor((hi.log_value() - base.log_value()) / math.log(prime))
    point = base * Magnitude.power(prime, k)
    while point > hi:
        k -= 1
        point = base * Magnitude.power(prime, k)
    step = Magnitude.power(prime, 1)
    while point * step <= hi:
        k += 1
        point = point * step
    return k, point


def ladder_point_above(base: Magnitude, prime: int, lo: Magnitude) -> Tuple[int, Magnitude]:
    """Smallest base * prime^k (k integer) strictly above lo"""
    k, point = ladder_point_at_most(base, prime, lo)
    return k + 1, point * Magnitude.power(prime, 1)


def _dyadic_candidates(low: float, high: float, depth: int):
    """Numerators with denominator 2^depth in [low, high], by |n| then sign"""
    denominator = 1 << depth
    first = math.floor(low * denominator) - 1
    last = math.ceil(high * denominator) + 1
    numerators = [n for n in range(first, last + 1) if depth == 0 or n % 2 != 0]
    numerators.sort(key=lambda n: (abs(n), n < 0))
    return [Fraction(n, denominator) for n in numerators]


def dyadic_search(
    base: Magnitude,
    prime: int,
    lo: Magnitude,
    hi: Magnitude,
    include_hi: bool = True
) -> Fraction:
    """
    Deterministic q with lo < base * prime^q <= hi (or < hi).

    Smallest denominator 2^d first, then smallest |numerator|, positive
    before negative.
    """
    if hi.zero or (not lo.zero and lo >= hi):
        raise EmptyIntersection(f"empty interval ({lo}, {hi}]", witness=(lo, hi))
    log_p = math.log(prime)
    high = (hi.log_value() - base.log_value()) / log_p
    low = (lo.log_value() - base.log_value()) / log_p if not lo.zero else min(high, 0.0) - 1.0
    for depth in range(MAX_DYADIC_DEPTH + 1):
        for q in _dyadic_candidates(low, high, depth):
            m = base * Magnitude.power(prime, q)
            if not lo.zero and m <= lo:
                continue
            if m > hi or (not include_hi and m == hi):
                continue
            return q
    raise EmptyIntersection(f"no dyadic exponent found in ({lo}, {hi})", witness=(lo, hi))


def representative_in(c: Coset, lo: Magnitude, hi: Magnitude, g: ValueGroup) -> Magnitude:
    """
    Element of coset c inside (lo, hi].

    Discrete groups need hi/lo >= p and return the largest ladder point not
    exceeding hi; dense groups use dyadic_search.
    """
    if hi.zero or (not lo.zero and lo >= hi):
        raise EmptyIntersection(f"empty interval ({lo}, {hi}]", witness=(lo, hi))
    if g.kind == GroupKind.DISCRETE:
        if not lo.zero and hi < lo * Magnitude.power(g.prime, 1):
            raise EmptyIntersection(
                f"interval ({lo}, {hi}] is shorter than one period of {g.prime}^Z",
                witness=(lo, hi)
            )
        _, point = ladder_point_at_most(c.base, g.prime, hi)
        return point
    q = dyadic_search(c.base, g.prime, lo, hi, include_hi=True)
    return c.base * Magnitude.power(g.prime, q)

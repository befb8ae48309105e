"""
Gurarii Toolkit - Scalars

Two valued-field backends with exact absolute values:
- PADIC: rationals with the p-adic absolute value (value group p^Z)
- HAHN: truncated Hahn series in t with rational exponents, |t| = 1/p
  (value group p^Q)
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple, Union

from sympy import multiplicity

from config import DEFAULT_CONFIG, Backend
from errors import (
    BackendMismatch, DivisionByZero, EmptyIntersection, InvalidInput,
    NotInValueGroup, PrecisionExhausted,
)
from magnitude import (
    ONE, ZERO, GroupKind, Magnitude, ValueGroup, coset_of, dyadic_search,
    ladder_point_at_most,
)

logger = logging.getLogger("gurarii.scalar")

Rational = Union[int, Fraction]
Terms = Tuple[Tuple[Fraction, Fraction], ...]


# ==================== p-adic backend ====================

@dataclass(frozen=True)
class PadicScalar:
    """A rational a/b viewed inside Q_p"""
    value: Fraction
    prime: int

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    @property
    def backend(self) -> Backend:
        return Backend.PADIC

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    @property
    def is_negligible(self) -> bool:
        return self.value == 0

    def tail_magnitude(self) -> Optional[Magnitude]:
        return None

    def valuation(self) -> int:
        if self.value == 0:
            raise DivisionByZero("valuation of zero")
        return (multiplicity(self.prime, self.value.numerator)
                - multiplicity(self.prime, self.value.denominator))

    def __abs__(self) -> Magnitude:
        if self.value == 0:
            return ZERO
        return Magnitude.power(self.prime, -self.valuation())

    def _peer(self, other) -> "PadicScalar":
        if isinstance(other, (int, Fraction)):
            return PadicScalar(Fraction(other), self.prime)
        if not isinstance(other, PadicScalar) or other.prime != self.prime:
            raise BackendMismatch(f"cannot combine {self!r} with {other!r}")
        return other

    def __add__(self, other) -> "PadicScalar":
        return PadicScalar(self.value + self._peer(other).value, self.prime)

    __radd__ = __add__

    def __sub__(self, other) -> "PadicScalar":
        return PadicScalar(self.value - self._peer(other).value, self.prime)

    def __rsub__(self, other) -> "PadicScalar":
        return self._peer(other) - self

    def __mul__(self, other) -> "PadicScalar":
        return PadicScalar(self.value * self._peer(other).value, self.prime)

    __rmul__ = __mul__

    def __neg__(self) -> "PadicScalar":
        return PadicScalar(-self.value, self.prime)

    def inv(self, tail_order: Optional[Fraction] = None) -> "PadicScalar":
        if self.value == 0:
            raise DivisionByZero("inverse of zero")
        return PadicScalar(1 / self.value, self.prime)

    def __truediv__(self, other) -> "PadicScalar":
        return self * self._peer(other).inv()

    def __str__(self) -> str:
        return str(self.value)


# ==================== Hahn backend ====================

def _normalize(coeffs: Dict[Fraction, Fraction], tail: Optional[Fraction]) -> Terms:
    return tuple(
        (c, e) for e, c in sorted(coeffs.items())
        if c != 0 and (tail is None or e < tail)
    )


@dataclass(frozen=True)
class HahnScalar:
    """
    Finite sum of c * t^e with ascending exponents, plus an optional tail
    marker O(t^tail). No tail means the sum is exact.
    """
    terms: Terms
    tail: Optional[Fraction]
    prime: int

    def __post_init__(self):
        coeffs: Dict[Fraction, Fraction] = {}
        for c, e in self.terms:
            e = Fraction(e)
            if e in coeffs:
                raise InvalidInput(f"repeated exponent {e} in Hahn scalar")
            coeffs[e] = Fraction(c)
        tail = None if self.tail is None else Fraction(self.tail)
        object.__setattr__(self, "terms", _normalize(coeffs, tail))
        object.__setattr__(self, "tail", tail)

    @classmethod
    def monomial(cls, coeff: Rational, exponent: Rational, prime: int) -> "HahnScalar":
        return cls(((Fraction(coeff), Fraction(exponent)),), None, prime)

    @classmethod
    def constant(cls, value: Rational, prime: int) -> "HahnScalar":
        return cls.monomial(value, 0, prime)

    @property
    def backend(self) -> Backend:
        return Backend.HAHN

    @property
    def is_zero(self) -> bool:
        """True only for the exact zero"""
        return not self.terms and self.tail is None

    @property
    def is_negligible(self) -> bool:
        """No known term: zero at working precision"""
        return not self.terms

    def tail_magnitude(self) -> Optional[Magnitude]:
        """|t^tail|, the largest size the unknown remainder can have"""
        if self.tail is None:
            return None
        return Magnitude.power(self.prime, -self.tail)

    @property
    def is_monomial(self) -> bool:
        return len(self.terms) == 1 and self.tail is None

    def valuation(self) -> Fraction:
        """Leading exponent"""
        if self.terms:
            return self.terms[0][1]
        if self.tail is None:
            raise DivisionByZero("valuation of zero")
        raise PrecisionExhausted(
            f"O(t^{self.tail}) has no known leading term", witness=self.tail
        )

    def _lower_bound(self) -> Optional[Fraction]:
        """Smallest exponent that can occur; None for the exact zero"""
        if self.terms:
            return self.terms[0][1]
        return self.tail

    def __abs__(self) -> Magnitude:
        if self.is_zero:
            return ZERO
        return Magnitude.power(self.prime, -self.valuation())

    def _peer(self, other) -> "HahnScalar":
        if isinstance(other, (int, Fraction)):
            return HahnScalar.constant(other, self.prime) if other != 0 else HahnScalar((), None, self.prime)
        if not isinstance(other, HahnScalar) or other.prime != self.prime:
            raise BackendMismatch(f"cannot combine {self!r} with {other!r}")
        return other

    def _coeffs(self) -> Dict[Fraction, Fraction]:
        return {e: c for c, e in self.terms}

    def __add__(self, other) -> "HahnScalar":
        other = self._peer(other)
        coeffs = self._coeffs()
        for c, e in other.terms:
            coeffs[e] = coeffs.get(e, Fraction(0)) + c
        tail = _min_tail(self.tail, other.tail)
        return HahnScalar(_normalize(coeffs, tail), tail, self.prime)

    __radd__ = __add__

    def __neg__(self) -> "HahnScalar":
        return HahnScalar(tuple((-c, e) for c, e in self.terms), self.tail, self.prime)

    def __sub__(self, other) -> "HahnScalar":
        return self + (-self._peer(other))

    def __rsub__(self, other) -> "HahnScalar":
        return self._peer(other) - self

    def __mul__(self, other) -> "HahnScalar":
        other = self._peer(other)
        if self.is_zero or other.is_zero:
            return HahnScalar((), None, self.prime)
        coeffs: Dict[Fraction, Fraction] = {}
        for c1, e1 in self.terms:
            for c2, e2 in other.terms:
                coeffs[e1 + e2] = coeffs.get(e1 + e2, Fraction(0)) + c1 * c2
        tail = None
        if self.tail is not None:
            tail = _min_tail(tail, self.tail + other._lower_bound())
        if other.tail is not None:
            tail = _min_tail(tail, other.tail + self._lower_bound())
        return HahnScalar(_normalize(coeffs, tail), tail, self.prime)

    __rmul__ = __mul__

    def inv(self, tail_order: Optional[Fraction] = None) -> "HahnScalar":
        """
        1/a for a = c0 t^e0 (1 + u): geometric series in -u, truncated
        tail_order above the leading exponent. Monomials invert exactly.
        """
        if self.is_zero:
            raise DivisionByZero("inverse of zero")
        c0, e0 = self.terms[0] if self.terms else (None, self.valuation())
        if self.is_monomial:
            return HahnScalar.monomial(1 / c0, -e0, self.prime)

        window = Fraction(tail_order if tail_order is not None
                          else DEFAULT_CONFIG.arithmetic.default_tail_order)
        if self.tail is not None:
            window = min(window, self.tail - e0)
        u = {e - e0: c / c0 for c, e in self.terms[1:] if e - e0 < window}

        series = {Fraction(0): Fraction(1)}
        power = {Fraction(0): Fraction(1)}
        while power:
            step: Dict[Fraction, Fraction] = {}
            for e1, c1 in power.items():
                for e2, c2 in u.items():
                    e = e1 + e2
                    if e < window:
                        step[e] = step.get(e, Fraction(0)) - c1 * c2
            power = {e: c for e, c in step.items() if c != 0}
            for e, c in power.items():
                series[e] = series.get(e, Fraction(0)) + c

        coeffs = {e - e0: c / c0 for e, c in series.items()}
        tail = window - e0
        logger.debug("inverted %s up to O(t^%s)", self, tail)
        return HahnScalar(_normalize(coeffs, tail), tail, self.prime)

    def __truediv__(self, other) -> "HahnScalar":
        return self * self._peer(other).inv()

    def __str__(self) -> str:
        parts = []
        for c, e in self.terms:
            if e == 0:
                parts.append(str(c))
            elif c == 1:
                parts.append(f"t^({e})")
            else:
                parts.append(f"{c}*t^({e})")
        if self.tail is not None:
            parts.append(f"O(t^({self.tail}))")
        return "+".join(parts) if parts else "0"


def _min_tail(a: Optional[Fraction], b: Optional[Fraction]) -> Optional[Fraction]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


Scalar = Union[PadicScalar, HahnScalar]


# ==================== Field descriptor ====================

@dataclass(frozen=True)
class FieldDescriptor:
    """Backend, prime and (Hahn only) relative truncation order"""
    backend: Backend
    prime: int
    default_tail_order: Fraction = field(
        default_factory=lambda: DEFAULT_CONFIG.arithmetic.default_tail_order
    )

    def __post_init__(self):
        if not isinstance(self.backend, Backend):
            object.__setattr__(self, "backend", Backend(self.backend))
        object.__setattr__(self, "default_tail_order", Fraction(self.default_tail_order))
        if self.default_tail_order <= 0:
            raise InvalidInput(f"tail order must be positive, got {self.default_tail_order}")
        # validates the prime
        _ = self.value_group

    @property
    def value_group(self) -> ValueGroup:
        kind = GroupKind.DISCRETE if self.backend == Backend.PADIC else GroupKind.DENSE
        return ValueGroup(self.prime, kind)

    @property
    def spherically_complete_meta(self) -> bool:
        """Q_p and the full Hahn field are both spherically complete"""
        return True

    @property
    def is_dense(self) -> bool:
        return self.backend == Backend.HAHN

    def from_rational(self, value: Rational) -> Scalar:
        if self.backend == Backend.PADIC:
            return PadicScalar(Fraction(value), self.prime)
        if value == 0:
            return HahnScalar((), None, self.prime)
        return HahnScalar.constant(value, self.prime)

    def zero(self) -> Scalar:
        return self.from_rational(0)

    def one(self) -> Scalar:
        return self.from_rational(1)

    def inv(self, a: Scalar) -> Scalar:
        self.check(a)
        return a.inv(self.default_tail_order)

    def check(self, a: Scalar) -> Scalar:
        if a.backend != self.backend or a.prime != self.prime:
            raise BackendMismatch(f"scalar {a} does not belong to {self.backend.value} p={self.prime}")
        return a

    def to_dict(self) -> dict:
        data = {"backend": self.backend.value, "prime": self.prime}
        if self.backend == Backend.HAHN:
            data["tail_order"] = str(self.default_tail_order)
        return data


# ==================== Operations ====================

def scalar_arith(op: str, a: Scalar, b: Optional[Scalar] = None,
                 tail_order: Optional[Fraction] = None) -> Scalar:
    """add / sub / mul / div on a pair, inv on a alone"""
    if op == "inv":
        return a.inv(tail_order)
    if b is None:
        raise InvalidInput(f"operation {op} needs two operands")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a * b.inv(tail_order)
    raise InvalidInput(f"unknown scalar operation {op!r}")


def scalar_with_abs(m: Magnitude, f: FieldDescriptor) -> Scalar:
    """The canonical scalar (power of p, or monomial t^e) with |scalar| = m"""
    group = f.value_group
    if not group.contains(m):
        witness = None if m.zero else coset_of(m, group)
        raise NotInValueGroup(f"{m} is not in the value group of {f.backend.value} p={f.prime}",
                              witness=witness)
    exponent = m.exponent(f.prime)
    if f.backend == Backend.PADIC:
        return PadicScalar(Fraction(f.prime) ** (-int(exponent)), f.prime)
    return HahnScalar.monomial(1, -exponent, f.prime)


def scalar_with_abs_in(lo: Magnitude, hi: Magnitude, f: FieldDescriptor) -> Scalar:
    """
    Deterministic scalar with |scalar| in the interval from lo to hi.

    Discrete: the largest power of p not exceeding hi, which must lie above
    lo. Dense: the dyadic search over the open interior (lo, hi).
    """
    if f.backend == Backend.PADIC:
        _, point = ladder_point_at_most(ONE, f.prime, hi)
        if point <= lo:
            raise EmptyIntersection(
                f"no power of {f.prime} in ({lo}, {hi}]", witness=(lo, hi)
            )
        return scalar_with_abs(point, f)
    q = dyadic_search(ONE, f.prime, lo, hi, include_hi=False)
    return scalar_with_abs(Magnitude.power(f.prime, q), f)


def random_scalar(rng: random.Random, f: FieldDescriptor, window: int = 3,
                  zero_weight: float = 0.15) -> Scalar:
    """
    Seeded sample: a small unit times p^k (PADIC) or one or two monomials
    with dyadic exponents (HAHN), occasionally zero.
    """
    if rng.random() < zero_weight:
        return f.zero()
    p = f.prime
    if f.backend == Backend.PADIC:
        units = [u for u in range(1, p + 3) if u % p != 0]
        unit = Fraction(rng.choice(units), rng.choice(units)) * rng.choice((1, -1))
        return PadicScalar(unit * Fraction(p) ** rng.randint(-window, window), p)
    total = HahnScalar((), None, p)
    for _ in range(rng.randint(1, 2)):
        exponent = Fraction(rng.randint(-4 * window, 4 * window), 4)
        total = total + HahnScalar.monomial(rng.choice((1, -1, 2, Fraction(1, 2))), exponent, p)
    return total if not total.is_zero else f.one()

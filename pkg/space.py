"""
Gurarii Toolkit - Weighted Spaces

Finite-dimensional spaces K^n with the weighted sup-norm
||(x_i)|| = max_i w_i |x_i|, their subspaces, and the exact ultrametric
linear algebra built on pivot elimination: orthogonal bases, distances,
t-orthogonality defects, orthocomplements, base extension, operator norms
and isometry certificates.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

from errors import (
    DefectTooLow, DimensionMismatch, InconsistentMap, InvalidInput, NotInDomain,
    PrecisionExhausted,
)
from magnitude import ONE, ZERO, Magnitude, mag_root
from scalar import FieldDescriptor, HahnScalar, PadicScalar, Scalar

logger = logging.getLogger("gurarii.space")


# ==================== Spaces and vectors ====================

@dataclass(frozen=True)
class WeightedSpace:
    """K^n with per-coordinate weights (one finite stage of c0(I:s))"""
    field: FieldDescriptor
    weights: Tuple[Magnitude, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        for w in self.weights:
            if not isinstance(w, Magnitude) or w.zero:
                raise InvalidInput(f"weights must be nonzero magnitudes, got {w!r}")

    @property
    def dim(self) -> int:
        return len(self.weights)

    def vector(self, coords: Sequence[Union[Scalar, int]]) -> "Vector":
        coords = tuple(coords)
        if len(coords) != self.dim:
            raise DimensionMismatch(f"expected {self.dim} coordinates, got {len(coords)}")
        converted = tuple(
            self.field.check(c) if isinstance(c, (PadicScalar, HahnScalar)) else self.field.from_rational(c)
            for c in coords
        )
        return Vector(self, converted)

    def unit(self, i: int) -> "Vector":
        zero, one = self.field.zero(), self.field.one()
        return Vector(self, tuple(one if j == i else zero for j in range(self.dim)))

    def zero(self) -> "Vector":
        return Vector(self, tuple(self.field.zero() for _ in range(self.dim)))

    def extend(self, weights: Sequence[Magnitude]) -> "WeightedSpace":
        """Next stage: the same coordinates followed by fresh ones"""
        return WeightedSpace(self.field, self.weights + tuple(weights))

    def is_stage_of(self, other: "WeightedSpace") -> bool:
        """True when `other` extends this space"""
        return (self.field == other.field
                and other.weights[:self.dim] == self.weights)

    def lift(self, v: "Vector") -> "Vector":
        """Pad a vector of an earlier stage with zero coordinates"""
        if v.space == self:
            return v
        if not v.space.is_stage_of(self):
            raise DimensionMismatch(f"{v} does not live in an earlier stage of this space")
        padding = tuple(self.field.zero() for _ in range(self.dim - v.space.dim))
        return Vector(self, v.coords + padding)

    def as_subspace(self) -> "Subspace":
        return Subspace(self, [self.unit(i) for i in range(self.dim)])

    def __str__(self) -> str:
        weights = ", ".join(str(w) for w in self.weights)
        return f"{self.field.backend.value}(p={self.field.prime})^{self.dim} [{weights}]"


@dataclass(frozen=True)
class Vector:
    space: WeightedSpace
    coords: Tuple[Scalar, ...]

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.coords)

    @property
    def is_negligible(self) -> bool:
        return all(c.is_negligible for c in self.coords)

    def norm(self) -> Magnitude:
        return norm(self)

    def _check(self, other: "Vector"):
        if other.space != self.space:
            raise DimensionMismatch(f"vectors live in different spaces: {self.space} / {other.space}")

    def __add__(self, other: "Vector") -> "Vector":
        self._check(other)
        return Vector(self.space, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "Vector") -> "Vector":
        self._check(other)
        return Vector(self.space, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "Vector":
        return Vector(self.space, tuple(-c for c in self.coords))

    def scale(self, scalar: Scalar) -> "Vector":
        return Vector(self.space, tuple(scalar * c for c in self.coords))

    def with_coord(self, i: int, value: Scalar) -> "Vector":
        coords = list(self.coords)
        coords[i] = value
        return Vector(self.space, tuple(coords))

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coords) + ")"


def norm(v: Vector) -> Magnitude:
    """max_i w_i |v_i|; ZERO exactly for the zero vector"""
    best = ZERO
    for w, c in zip(v.space.weights, v.coords):
        if c.is_zero:
            continue
        best = max(best, w * abs(c))
    return best


def _common_space(vectors: Sequence[Vector]) -> WeightedSpace:
    space = vectors[0].space
    for v in vectors[1:]:
        if v.space != space:
            raise DimensionMismatch("vectors must share one ambient space")
    return space


def combine(coefficients: Sequence[Scalar], vectors: Sequence[Vector], space: WeightedSpace) -> Vector:
    """sum_i c_i v_i"""
    total = space.zero()
    for c, v in zip(coefficients, vectors):
        if not c.is_zero:
            total = total + v.scale(c)
    return total


# ==================== Pivot elimination ====================

def negligible_residual(residual: Vector, reference: Vector) -> bool:
    """
    Whether a reduction residual is zero at working precision.

    Exact zeros and residuals with a known term decide themselves. A
    residual made only of O(t^N) markers counts as zero while its largest
    possible size stays below ||reference||; otherwise the truncation hides
    the answer.
    """
    if residual.is_zero:
        return True
    if not residual.is_negligible:
        return False
    bound = max(
        w * c.tail_magnitude()
        for w, c in zip(residual.space.weights, residual.coords)
        if not c.is_zero
    )
    if bound >= norm(reference):
        raise PrecisionExhausted(
            f"residual {residual} may be as large as {reference}", witness=residual
        )
    return True

def _pivot(v: Vector) -> Optional[int]:
    """Coordinate attaining the norm; lowest index on ties"""
    best, best_index = None, None
    for j, (w, c) in enumerate(zip(v.space.weights, v.coords)):
        if c.is_zero:
            continue
        m = w * abs(c)
        if best is None or m > best:
            best, best_index = m, j
    return best_index


def _reduce(v: Vector, base: Sequence[Vector], pivots: Sequence[int]) -> Tuple[Vector, Tuple[Scalar, ...]]:
    """
    Subtract base vectors in order so the residual vanishes at every pivot.
    Returns the residual and the coefficients used.
    """
    field_ = v.space.field
    zero = field_.zero()
    residual = v
    mus = []
    for b, j in zip(base, pivots):
        c = residual.coords[j]
        if c.is_zero:
            mus.append(zero)
            continue
        mu = c * field_.inv(b.coords[j])
        # truncated Hahn inverses must not leave O(t^N) noise at the pivot
        residual = (residual - b.scale(mu)).with_coord(j, zero)
        mus.append(mu)
    return residual, tuple(mus)


@dataclass(frozen=True)
class Dependency:
    """vectors[index] = sum_i coefficients[i] * vectors[i]"""
    index: int
    coefficients: Tuple[Scalar, ...]


@dataclass(frozen=True)
class EchelonForm:
    """
    Output of orthogonalize.

    base[k] = sum_i change[k][i] * vectors[i]; every base vector attains its
    norm at pivots[k] and vanishes at the pivots of earlier base vectors.
    """
    vectors: Tuple[Vector, ...]
    base: Tuple[Vector, ...]
    pivots: Tuple[int, ...]
    change: Tuple[Tuple[Scalar, ...], ...]
    dependencies: Tuple[Dependency, ...]


def orthogonalize(vectors: Sequence[Vector]) -> EchelonForm:
    """Orthogonal base of span(vectors) by ultrametric pivot elimination"""
    vectors = tuple(vectors)
    if not vectors:
        return EchelonForm((), (), (), (), ())
    space = _common_space(vectors)
    zero, one = space.field.zero(), space.field.one()
    n = len(vectors)

    base: List[Vector] = []
    pivots: List[int] = []
    change: List[Tuple[Scalar, ...]] = []
    dependencies: List[Dependency] = []

    for idx, v in enumerate(vectors):
        residual, mus = _reduce(v, base, pivots)
        if negligible_residual(residual, v):
            coefficients = [zero] * n
            for mu, row in zip(mus, change):
                if not mu.is_zero:
                    coefficients = [c + mu * r for c, r in zip(coefficients, row)]
            dependencies.append(Dependency(idx, tuple(coefficients)))
            logger.debug("vector %d is dependent, dropped", idx)
            continue
        combo = [one if i == idx else zero for i in range(n)]
        for mu, row in zip(mus, change):
            if not mu.is_zero:
                combo = [c - mu * r for c, r in zip(combo, row)]
        base.append(residual)
        pivots.append(_pivot(residual))
        change.append(tuple(combo))

    return EchelonForm(vectors, tuple(base), tuple(pivots), tuple(change), tuple(dependencies))


class Subspace:
    """Span of vectors in a weighted space; the echelon base is computed once"""

    def __init__(self, ambient: WeightedSpace, vectors: Sequence[Vector] = ()):
        self.ambient = ambient
        self.vectors = tuple(vectors)
        for v in self.vectors:
            if v.space != ambient:
                raise DimensionMismatch(f"{v} is not a vector of {ambient}")

    @classmethod
    def whole(cls, space: WeightedSpace) -> "Subspace":
        return space.as_subspace()

    @cached_property
    def echelon(self) -> EchelonForm:
        return orthogonalize(self.vectors)

    @property
    def base(self) -> Tuple[Vector, ...]:
        return self.echelon.base

    @property
    def pivots(self) -> Tuple[int, ...]:
        return self.echelon.pivots

    @property
    def dim(self) -> int:
        return len(self.base)

    def reduce(self, v: Vector) -> Tuple[Vector, Tuple[Scalar, ...]]:
        if v.space != self.ambient:
            raise DimensionMismatch(f"{v} is not a vector of {self.ambient}")
        return _reduce(v, self.base, self.pivots)

    def contains(self, v: Vector) -> bool:
        residual, _ = self.reduce(v)
        return negligible_residual(residual, v)

    def echelon_coefficients(self, v: Vector) -> Tuple[Scalar, ...]:
        """Coordinates of v with respect to the echelon base"""
        residual, mus = self.reduce(v)
        if not negligible_residual(residual, v):
            raise NotInDomain(f"{v} is not in the subspace", witness=residual)
        return mus

    def coefficients(self, v: Vector) -> Tuple[Scalar, ...]:
        """Coordinates of v with respect to the spanning vectors"""
        mus = self.echelon_coefficients(v)
        zero = self.ambient.field.zero()
        total = [zero] * len(self.vectors)
        for mu, row in zip(mus, self.echelon.change):
            if not mu.is_zero:
                total = [c + mu * r for c, r in zip(total, row)]
        return tuple(total)

    def is_subspace_of(self, other: "Subspace") -> bool:
        return all(other.contains(b) for b in self.base)

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient={self.ambient})"


# ==================== Distances and defects ====================

def distance(v: Vector, D: Subspace) -> Tuple[Magnitude, Vector]:
    """dist(v, D) and a point of D attaining it (the pivot projection)"""
    residual, _ = D.reduce(v)
    return norm(residual), v - residual


@dataclass(frozen=True)
class OrthoCertificate:
    """
    t-orthogonality level of a finite set.

    `equality_tuple` is a scalar tuple at which
    ||sum l_i x_i|| = level * max_i ||l_i x_i||.
    """
    vectors: Tuple[Vector, ...]
    level: Magnitude
    distances: Tuple[Magnitude, ...]
    ratios: Tuple[Magnitude, ...]
    witnesses: Tuple[Vector, ...]
    equality_tuple: Tuple[Scalar, ...]

    @property
    def is_orthogonal(self) -> bool:
        return self.level == ONE

    def meets(self, t: Magnitude) -> bool:
        return self.level >= t


def t_defect(vectors: Sequence[Vector]) -> OrthoCertificate:
    vectors = tuple(vectors)
    if not vectors:
        return OrthoCertificate((), ONE, (), (), (), ())
    space = _common_space(vectors)
    distances, ratios, witnesses = [], [], []
    for i, x in enumerate(vectors):
        if x.is_zero:
            raise InvalidInput(f"t-orthogonality of a set containing zero (vector {i + 1})")
        others = Subspace(space, vectors[:i] + vectors[i + 1:])
        dist, d = distance(x, others)
        distances.append(dist)
        ratios.append(dist / norm(x))
        witnesses.append(d)

    level = min(ratios)
    i_min = ratios.index(level)
    others = Subspace(space, vectors[:i_min] + vectors[i_min + 1:])
    coefficients = list(others.coefficients(witnesses[i_min]))
    equality = [-c for c in coefficients]
    equality.insert(i_min, space.field.one())

    return OrthoCertificate(vectors, level, tuple(distances), tuple(ratios),
                            tuple(witnesses), tuple(equality))


def orthocomplement(D: Subspace, within: Optional[Subspace] = None) -> Subspace:
    """
    D0 with D + D0 = E and D orthogonal to D0.

    For the whole ambient space the complement is spanned by the unit
    vectors at non-pivot coordinates; inside a subspace E the base of E is
    reduced against D and kept in echelon form.
    """
    space = D.ambient
    if within is None or within.dim == space.dim:
        candidates = [space.unit(j) for j in range(space.dim) if j not in D.pivots]
    else:
        if not D.is_subspace_of(within):
            raise NotInDomain("orthocomplement: D is not contained in E")
        candidates = list(within.base)

    base, pivots = list(D.base), list(D.pivots)
    added = []
    for c in candidates:
        residual, _ = _reduce(c, base, pivots)
        if negligible_residual(residual, c):
            continue
        base.append(residual)
        pivots.append(_pivot(residual))
        added.append(residual)
    return Subspace(space, added)


@dataclass(frozen=True)
class OrthogonalityVerdict:
    orthogonal: bool
    certificate: Optional[OrthoCertificate]
    # scalars on base(D) + base(D0) where ||x + y|| < max(||x||, ||y||)
    witness: Optional[Tuple[Scalar, ...]]


def subspaces_orthogonal(D: Subspace, D0: Subspace) -> OrthogonalityVerdict:
    if D.ambient != D0.ambient:
        raise DimensionMismatch("subspaces live in different spaces")
    if D.dim == 0 or D0.dim == 0:
        return OrthogonalityVerdict(True, None, None)
    certificate = t_defect(D.base + D0.base)
    if certificate.is_orthogonal:
        return OrthogonalityVerdict(True, certificate, None)
    return OrthogonalityVerdict(False, certificate, certificate.equality_tuple)


@dataclass(frozen=True)
class ExtendedBase:
    vectors: Tuple[Vector, ...]
    certificate: OrthoCertificate


def extend_base(F_base: Sequence[Vector], E: Union[WeightedSpace, Subspace], t: Magnitude) -> ExtendedBase:
    """
    Extend a sqrt(t)-orthogonal list to a t-orthogonal base of E by
    appending an orthocomplement of its span.
    """
    if t.zero or t > ONE:
        raise InvalidInput(f"orthogonality level must lie in (0, 1], got {t}")
    within = None if isinstance(E, WeightedSpace) else E
    space = E if isinstance(E, WeightedSpace) else E.ambient
    F_base = tuple(F_base)

    if F_base:
        start = t_defect(F_base)
        required = mag_root(t, 2)
        if start.level < required:
            raise DefectTooLow(
                f"input defect {start.level} is below sqrt(t) = {required}", witness=start.level
            )
    F = Subspace(space, F_base)
    if within is not None and not F.is_subspace_of(within):
        raise NotInDomain("extend_base: span(F) is not contained in E")
    if F.dim != len(F_base):
        raise DefectTooLow("extend_base: input vectors are linearly dependent", witness=ZERO)

    complement = orthocomplement(F, within)
    vectors = F_base + complement.base
    certificate = t_defect(vectors)
    if not certificate.meets(t):
        raise DefectTooLow(f"extended base has defect {certificate.level} < {t}",
                           witness=certificate.level)
    logger.debug("extended %d vectors by %d at level %s", len(F_base), complement.dim, certificate.level)
    return ExtendedBase(vectors, certificate)


# ==================== Linear maps ====================

class LinearMap:
    """
    Linear map given by images of spanning vectors of its domain.

    The domain is orthogonalized on construction and the images are carried
    over to the echelon base; dependent spanning vectors must have
    consistent images.
    """

    def __init__(
        self,
        base: Sequence[Vector],
        images: Sequence[Vector],
        codomain: Optional[WeightedSpace] = None,
        domain_space: Optional[WeightedSpace] = None
    ):
        base, images = tuple(base), tuple(images)
        if len(base) != len(images):
            raise DimensionMismatch(f"{len(base)} base vectors but {len(images)} images")
        if domain_space is None:
            if not base:
                raise InvalidInput("empty map needs an explicit domain space")
            domain_space = base[0].space
        if codomain is None:
            if not images:
                raise InvalidInput("empty map needs an explicit codomain")
            codomain = images[0].space
        for y in images:
            if y.space != codomain:
                raise DimensionMismatch(f"image {y} is not in the codomain {codomain}")

        self.domain = Subspace(domain_space, base)
        self.codomain = codomain
        echelon = self.domain.echelon
        self.images = tuple(combine(row, images, codomain) for row in echelon.change)
        for dep in echelon.dependencies:
            if not (combine(dep.coefficients, images, codomain) - images[dep.index]).is_negligible:
                raise InconsistentMap(
                    f"spanning vector {dep.index + 1} is dependent but its image disagrees",
                    witness=base[dep.index]
                )

    @classmethod
    def identity(cls, subspace: Subspace) -> "LinearMap":
        return cls(subspace.base, subspace.base, subspace.ambient, subspace.ambient)

    @property
    def base(self) -> Tuple[Vector, ...]:
        return self.domain.base

    @property
    def image(self) -> Subspace:
        return Subspace(self.codomain, self.images)

    def evaluate(self, v: Vector) -> Vector:
        mus = self.domain.echelon_coefficients(v)
        return combine(mus, self.images, self.codomain)

    def images_of(self, vectors: Sequence[Vector]) -> Tuple[Vector, ...]:
        return tuple(self.evaluate(v) for v in vectors)

    def difference(self, other: "LinearMap") -> "LinearMap":
        """self - other on the domain of self"""
        if other.codomain != self.codomain:
            raise DimensionMismatch("maps have different codomains")
        images = [y - other.evaluate(b) for b, y in zip(self.base, self.images)]
        return LinearMap(self.base, images, self.codomain, self.domain.ambient)

    def restrict(self, subspace: Subspace) -> "LinearMap":
        return LinearMap(subspace.base, self.images_of(subspace.base), self.codomain, subspace.ambient)

    def inverse(self) -> "LinearMap":
        """Map from the image back to the domain (self must be injective)"""
        return LinearMap(self.images, self.base, self.domain.ambient, self.codomain)

    def compose(self, inner: "LinearMap") -> "LinearMap":
        """self after inner"""
        images = [self.evaluate(y) for y in inner.images]
        return LinearMap(inner.base, images, self.codomain, inner.domain.ambient)

    def agrees_with(self, other: "LinearMap", vectors: Sequence[Vector]) -> bool:
        return all((self.evaluate(v) - other.evaluate(v)).is_negligible for v in vectors)

    def __repr__(self) -> str:
        return f"LinearMap(dim={self.domain.dim}, codomain={self.codomain})"


def operator_norm_attained(L: LinearMap) -> Tuple[Magnitude, Optional[Vector]]:
    """max_k ||L b_k|| / ||b_k|| and the base vector attaining it"""
    best, witness = ZERO, None
    for b, y in zip(L.base, L.images):
        ratio = norm(y) / norm(b)
        if witness is None or ratio > best:
            best, witness = ratio, b
    return best, witness


def operator_norm(L: LinearMap) -> Magnitude:
    return operator_norm_attained(L)[0]


@dataclass(frozen=True)
class IsometryCertificate:
    holds: bool
    domain_norms: Tuple[Magnitude, ...]
    image_norms: Tuple[Magnitude, ...]
    image_defect: Optional[OrthoCertificate]
    # a vector x with ||L x|| != ||x|| when the map is not an isometry
    refutation: Optional[Vector] = None
    reason: str = ""


def certify_isometry(L: LinearMap) -> IsometryCertificate:
    """
    Isometry iff the base norms are preserved and the images are exactly
    orthogonal (the domain base is orthogonal by construction).
    """
    domain_norms = tuple(norm(b) for b in L.base)
    image_norms = tuple(norm(y) for y in L.images)
    for k, (a, b) in enumerate(zip(domain_norms, image_norms)):
        if a != b:
            return IsometryCertificate(
                False, domain_norms, image_norms, None, L.base[k],
                f"base vector {k + 1} has norm {a} but its image has norm {b}"
            )
    if not L.images:
        return IsometryCertificate(True, domain_norms, image_norms, None)

    defect = t_defect(L.images)
    if defect.is_orthogonal:
        return IsometryCertificate(True, domain_norms, image_norms, defect)
    x = combine(defect.equality_tuple, L.base, L.domain.ambient)
    return IsometryCertificate(
        False, domain_norms, image_norms, defect, x,
        f"images are only {defect.level}-orthogonal"
    )

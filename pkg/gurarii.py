"""
Gurarii Toolkit - Constructions

Constructions on finite stages of non-archimedean Gurarii-type
spaces: epsilon-isometry synthesis, value-set gap certificates, isometry
patching, embeddings into the universal stage, universal-disposition
extensions, classification up to isometry and the shrinking-balls
demonstration.
"""

import logging
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from config import DEFAULT_CONFIG, Backend
from errors import (
    AllocatorExhausted, BackendMismatch, DimensionMismatch,
    InvalidInput, NoGap, NonDecreasingStream, NotDenselyValued, NotImmediate,
    NotInDomain, NotIsometric, OperatorNormNotBelowOne, Unsupported,
)
from magnitude import (
    ONE, Coset, GroupKind, Magnitude, ValueGroup, coset_of, dyadic_search,
    ladder_point_above, ladder_point_at_most, mag_root, representative_in,
)
from scalar import (
    FieldDescriptor, Scalar, random_scalar, scalar_with_abs, scalar_with_abs_in,
)
from space import (
    IsometryCertificate, LinearMap, OrthogonalityVerdict, Subspace, Vector,
    WeightedSpace, certify_isometry, combine, extend_base, norm,
    operator_norm_attained, orthocomplement, subspaces_orthogonal, t_defect,
)

logger = logging.getLogger("gurarii.gurarii")


# ==================== Registry and ambient stages ====================

@dataclass
class RegistryEntry:
    representative: Magnitude
    indices: List[int] = field(default_factory=list)


class CosetRegistry:
    """
    Representatives s_g in (r, 1] of the cosets of the value group, and
    the coordinate indices I_g allocated to each coset.
    """

    def __init__(self, group: ValueGroup, r: Optional[Magnitude] = None):
        if r is None:
            if group.kind == GroupKind.DISCRETE:
                r = group.uniformizer_magnitude
            else:
                r = Magnitude.of(DEFAULT_CONFIG.construction.dense_r)
        if r.zero or r >= ONE:
            raise InvalidInput(f"registry bound r must lie in (0, 1), got {r}")
        if group.kind == GroupKind.DISCRETE and r > group.uniformizer_magnitude:
            raise InvalidInput(f"discrete registries need r <= 1/{group.prime}, got {r}")
        self.group = group
        self.r = r
        self._entries: Dict[Coset, RegistryEntry] = {}
        self._lock = threading.Lock()

    def representative(self, coset: Coset) -> Magnitude:
        with self._lock:
            entry = self._entries.get(coset)
            if entry is None:
                entry = RegistryEntry(representative_in(coset, self.r, ONE, self.group))
                self._entries[coset] = entry
                logger.debug("registered coset %s with representative %s", coset, entry.representative)
            return entry.representative

    def register_index(self, coset: Coset, index: int):
        self.representative(coset)
        with self._lock:
            self._entries[coset].indices.append(index)

    def indices(self, coset: Coset) -> Tuple[int, ...]:
        entry = self._entries.get(coset)
        return tuple(entry.indices) if entry else ()

    def entries(self) -> Dict[Coset, RegistryEntry]:
        with self._lock:
            return {c: RegistryEntry(e.representative, list(e.indices)) for c, e in self._entries.items()}

    def __len__(self) -> int:
        return len(self._entries)


class Ambient:
    """
    Growing chain of weighted stages.

    Allocation appends fresh coordinates and never touches existing
    weights; every embedding returned by disposition_extend is recorded so
    it can be re-certified in later stages.
    """

    def __init__(
        self,
        space: WeightedSpace,
        registry: Optional[CosetRegistry] = None,
        max_dim: Optional[int] = None
    ):
        self._stages: List[WeightedSpace] = [space]
        self.registry = registry or CosetRegistry(space.field.value_group)
        if self.registry.group != space.field.value_group:
            raise BackendMismatch("registry value group does not match the stage field")
        self.max_dim = max_dim
        self._lock = threading.RLock()
        self._embeddings: List[LinearMap] = []

    @classmethod
    def standard(cls, f: FieldDescriptor, dim: int, **kwargs) -> "Ambient":
        return cls(WeightedSpace(f, tuple(ONE for _ in range(dim))), **kwargs)

    @property
    def stage(self) -> WeightedSpace:
        return self._stages[-1]

    @property
    def stages(self) -> Tuple[WeightedSpace, ...]:
        return tuple(self._stages)

    @property
    def field(self) -> FieldDescriptor:
        return self.stage.field

    @property
    def dense(self) -> bool:
        """Density of the value set, declared by the backend"""
        return self.field.is_dense

    def allocate(self, weights: Sequence[Magnitude]) -> List[int]:
        with self._lock:
            start = self.stage.dim
            if self.max_dim is not None and start + len(weights) > self.max_dim:
                raise AllocatorExhausted(
                    f"stage of dimension {start} cannot grow by {len(weights)} (cap {self.max_dim})"
                )
            self._stages.append(self.stage.extend(weights))
            logger.debug("allocated coordinates %d..%d", start, start + len(weights) - 1)
            return list(range(start, start + len(weights)))

    def allocate_for_coset(self, coset: Coset) -> Tuple[int, Magnitude]:
        """Fresh coordinate in I_g whose weight is the representative s_g"""
        with self._lock:
            s_g = self.registry.representative(coset)
            index = self.allocate([s_g])[0]
            self.registry.register_index(coset, index)
            return index, s_g

    def lift(self, v: Vector) -> Vector:
        return self.stage.lift(v)

    def lift_map(self, L: LinearMap) -> LinearMap:
        stage = self.stage
        return LinearMap(L.base, [stage.lift(y) for y in L.images], stage, L.domain.ambient)

    def subspace(self, vectors: Sequence[Vector]) -> Subspace:
        return Subspace(self.stage, [self.lift(v) for v in vectors])

    def record_embedding(self, f: LinearMap):
        with self._lock:
            self._embeddings.append(f)

    def embeddings(self) -> List[LinearMap]:
        return list(self._embeddings)

    def recheck_embeddings(self) -> List[bool]:
        """Chain coherence: every recorded embedding stays isometric in the latest stage"""
        return [certify_isometry(self.lift_map(f)).holds for f in self.embeddings()]


def _as_subspace(E: Union[WeightedSpace, Subspace]) -> Subspace:
    return E.as_subspace() if isinstance(E, WeightedSpace) else E


def _scalar_for_ratio(numerator: Magnitude, denominator: Magnitude, f: FieldDescriptor) -> Scalar:
    return scalar_with_abs(numerator / denominator, f)


# ==================== Value-set density ====================

@dataclass(frozen=True)
class DensityVerdict:
    dense: bool
    # open interval missing the value set when not dense
    gap: Optional[Tuple[Magnitude, Magnitude]] = None


def value_set_dense(E: Union[WeightedSpace, Subspace, Ambient]) -> DensityVerdict:
    """Is the union of w_i |K*| dense in (0, inf)?"""
    if isinstance(E, Ambient):
        if E.dense:
            return DensityVerdict(True)
        E = E.stage
    space = E if isinstance(E, WeightedSpace) else E.ambient
    group = space.field.value_group
    if group.is_dense:
        return DensityVerdict(True)

    p = group.prime
    points = sorted({ladder_point_at_most(coset_of(w, group).base, p, ONE)[1] for w in space.weights})
    if not points:
        points = [ONE]
    if len(points) >= 2:
        gap = (points[-2], points[-1])
    else:
        gap = (points[0] / Magnitude.power(p, 1), points[0])
    return DensityVerdict(False, gap)


# ==================== Epsilon-isometries ====================

@dataclass(frozen=True)
class EpsIsometryReport:
    """
    f: Y -> A with f(i(x)) = x. `bounds_hold` asserts the non-strict
    (1-eps)||y|| <= ||f(y)|| <= (1+eps)||y||; `strict_holds` asserts
    (1+eps)^-1 < ||f(y)||/||y|| < 1+eps on the same vectors.
    """
    map: LinearMap
    epsilon: Fraction
    t: Magnitude
    lower: Magnitude
    upper: Magnitude
    retraction_holds: bool
    bounds_hold: bool
    strict_holds: bool
    t_squared_bound: bool
    t_cubed_bound: bool
    samples_checked: int
    allocated: Tuple[int, ...] = ()
    predicate: str = "non-strict (1-eps)||y|| <= ||f(y)|| <= (1+eps)||y||"


def _epsilon_bounds(eps: Fraction) -> Tuple[Magnitude, Magnitude, Magnitude]:
    """(1 - eps, 1 + eps, (1 + eps)^-1)"""
    return Magnitude.of(1 - eps), Magnitude.of(1 + eps), Magnitude.of(1 / (1 + eps))


def _check_ratio(y_norm: Magnitude, fy_norm: Magnitude, bounds) -> Tuple[bool, bool, Magnitude]:
    low, high, inv_high = bounds
    ratio = fy_norm / y_norm
    non_strict = low <= ratio <= high
    strict = inv_high < ratio < high
    return non_strict, strict, ratio


def _rescale_into(v: Vector, t: Magnitude, f: FieldDescriptor) -> Scalar:
    """Scalar moving ||v|| to exactly 1 when possible, otherwise into (t, 1]"""
    n = norm(v)
    if f.value_group.contains(n):
        return scalar_with_abs(ONE / n, f)
    return scalar_with_abs_in(t / n, ONE / n, f)


def epsilon_isometry(
    A: Ambient,
    X: Subspace,
    i: LinearMap,
    eps: Fraction,
    samples: Optional[int] = None,
    seed: int = 0
) -> EpsIsometryReport:
    """
    Pull Y = codomain(i) back into the ambient stage with an
    epsilon-isometry that inverts i on X.
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise InvalidInput(f"epsilon must lie in (0, 1), got {eps}")
    if samples is None:
        samples = DEFAULT_CONFIG.construction.eps_samples
    bounds = _epsilon_bounds(eps)

    certificate = certify_isometry(i)
    if not certificate.holds:
        raise NotIsometric(f"i is not an isometry: {certificate.reason}", witness=certificate.refutation)
    if X.ambient != i.domain.ambient or X.dim != i.domain.dim or not X.is_subspace_of(i.domain):
        raise NotInDomain("X must be the domain of i")
    Y = i.codomain
    f_field = A.field
    xs = list(X.base)
    ys = [i.evaluate(x) for x in xs]

    if Y.dim == X.dim:
        inverse = i.inverse()
        f_map = LinearMap(inverse.base, [A.lift(v) for v in inverse.images], A.stage, Y)
        logger.debug("dim Y = dim X: returning the inverse of i")
        return EpsIsometryReport(f_map, eps, ONE, ONE, ONE, True, True, True, True, True, 0)

    density = value_set_dense(A)
    if not density.dense:
        raise NotDenselyValued(
            "value set of the ambient stage is not dense; use nonexistence_certificate",
            witness=density.gap,
        )

    p = f_field.prime
    lo = mag_root(bounds[2], 3)
    t = Magnitude.power(p, dyadic_search(ONE, p, lo, ONE, include_hi=False))

    y_ext = extend_base(ys, Y, t)
    need = len(y_ext.vectors) - len(xs)
    room = A.stage.dim - len(xs)
    allocated: Tuple[int, ...] = ()
    if room < need:
        allocated = tuple(A.allocate([ONE] * (need - room)))
    xs = [A.lift(x) for x in xs]
    x_ext = extend_base(xs, A.stage, t)

    domain_vectors, image_vectors = [], []
    for k, y in enumerate(y_ext.vectors):
        if k < len(xs):
            lam = _rescale_into(y, t, f_field)
            domain_vectors.append(y.scale(lam))
            image_vectors.append(xs[k].scale(lam))
        else:
            x = x_ext.vectors[k]
            domain_vectors.append(y.scale(_rescale_into(y, t, f_field)))
            image_vectors.append(x.scale(_rescale_into(x, t, f_field)))
    f_map = LinearMap(domain_vectors, image_vectors, A.stage, Y)

    lower, upper = None, None
    bounds_hold, strict_holds = True, True
    for y, x in zip(domain_vectors, image_vectors):
        ok, strict, ratio = _check_ratio(norm(y), norm(x), bounds)
        bounds_hold &= ok
        strict_holds &= strict
        lower = ratio if lower is None else min(lower, ratio)
        upper = ratio if upper is None else max(upper, ratio)

    rng = random.Random(seed)
    checked = 0
    for _ in range(samples):
        coefficients = [random_scalar(rng, f_field) for _ in domain_vectors]
        y = combine(coefficients, domain_vectors, Y)
        if y.is_zero:
            continue
        fy = combine(coefficients, image_vectors, A.stage)
        ok, strict, _ = _check_ratio(norm(y), norm(fy), bounds)
        bounds_hold &= ok
        strict_holds &= strict
        checked += 1

    retraction = all(
        (f_map.evaluate(i.evaluate(x)) - A.lift(x)).is_negligible for x in X.base
    )
    t_squared = t * t >= bounds[0]
    t_cubed = ONE / (t * t * t) <= bounds[1]
    if not (bounds_hold and retraction):
        logger.error("epsilon_isometry failed its own checks (eps=%s, t=%s)", eps, t)
    return EpsIsometryReport(f_map, eps, t, lower, upper, retraction, bounds_hold,
                             strict_holds, t_squared, t_cubed, checked, allocated)


# ==================== Gap certificates ====================

@dataclass(frozen=True)
class WeightLadder:
    """Neighbours of s1 on the ladder w * p^Z"""
    weight: Magnitude
    below: Magnitude
    above: Magnitude


@dataclass(frozen=True)
class CandidateRefutation:
    image_norm: Magnitude
    side: str  # "below" or "above" the forbidden interval


@dataclass(frozen=True)
class GapCertificate:
    """
    No eps-isometry Y -> E exists for Y = (K^2, max(|x1|, s1 |x2|)):
    ||f(0,1)|| lies in the value set of E, which misses (a, b), while the
    eps-isometry bounds force it into [(1-eps)s1, (1+eps)s1] inside (a, b).
    """
    space: WeightedSpace
    s1: Magnitude
    epsilon: Fraction
    gap: Tuple[Magnitude, Magnitude]
    interval: Tuple[Magnitude, Magnitude]
    ladders: Tuple[WeightLadder, ...]
    test_space: WeightedSpace
    predicate: str = "[(1-eps)s1, (1+eps)s1] strictly inside the value-set gap (a, b)"

    def recheck(self) -> bool:
        """Independent recomputation from the raw weights"""
        a, b = self.gap
        lo, hi = self.interval
        if not (a < lo and hi < b):
            return False
        if lo != Magnitude.of(1 - self.epsilon) * self.s1 or hi != Magnitude.of(1 + self.epsilon) * self.s1:
            return False
        step = Magnitude.power(self.space.field.prime, 1)
        for w in self.space.weights:
            _, below = ladder_point_at_most(w, self.space.field.prime, a)
            if below * step < b:
                return False
        return True

    def refute(self, candidate_image: Vector) -> Optional[CandidateRefutation]:
        """Why a proposed image of (0,1) violates the eps-isometry bound"""
        n = norm(candidate_image)
        lo, hi = self.interval
        if n < lo:
            return CandidateRefutation(n, "below")
        if n > hi:
            return CandidateRefutation(n, "above")
        return None

    def refute_map(self, candidate: LinearMap) -> Optional[CandidateRefutation]:
        """Refutation of a proposed f: test_space -> space, read off at (0,1)"""
        if candidate.domain.ambient != self.test_space or candidate.codomain != self.space:
            raise DimensionMismatch("candidate must map the test space into the certified space")
        return self.refute(candidate.evaluate(self.test_space.unit(1)))


def nonexistence_certificate(
E: WeightedSpace, s1: Magnitude, eps: Fraction) -> GapCertificate:
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise InvalidInput(f"epsilon must lie in (0, 1), got {eps}")
    if s1.zero:
        raise InvalidInput("s1 must be positive")
    lo = Magnitude.of(1 - eps) * s1
    hi = Magnitude.of(1 + eps) * s1
    group = E.field.value_group
    p = group.prime

    if group.is_dense:
        blocking = None
        if E.dim:
            blocking = E.weights[0] * Magnitude.power(p, dyadic_search(E.weights[0], p, lo, hi))
        raise NoGap("the value set of a densely valued space has no gaps", witness=blocking)

    ladders = []
    for w in E.weights:
        _, below = ladder_point_at_most(w, p, s1)
        if below == s1:
            raise NoGap(f"s1 = {s1} lies in the value set", witness=s1)
        _, above = ladder_point_above(w, p, s1)
        ladders.append(WeightLadder(w, below, above))
    if not ladders:
        raise InvalidInput("the zero space has no value set to certify against")

    a = max(ladder.below for ladder in ladders)
    b = min(ladder.above for ladder in ladders)
    if lo <= a:
        raise NoGap(f"(1-eps)s1 = {lo} does not clear the value-set point {a}", witness=a)
    if hi >= b:
        raise NoGap(f"(1+eps)s1 = {hi} does not clear the value-set point {b}", witness=b)

    test_space = WeightedSpace(E.field, (ONE, s1))
    logger.debug("gap (%s, %s) contains [%s, %s]", a, b, lo, hi)
    return GapCertificate(E, s1, eps, (a, b), (lo, hi), tuple(ladders), test_space)


# ==================== Perturbation and splitting ====================

@dataclass(frozen=True)
class PerturbationVerdict:
    """
    `hypothesis_failed` is the 1-based index i with ||x_i - z_i|| >= t||x_i||
    (0 when xs itself is not t-orthogonal); None when the hypotheses hold.
    """
    hypothesis_failed: Optional[int]
    norms_preserved: bool = False
    defect: Optional[Magnitude] = None
    certified: bool = False


def check_perturbation(xs: Sequence[Vector], zs: Sequence[Vector], t: Magnitude) -> PerturbationVerdict:
    xs, zs = tuple(xs), tuple(zs)
    if len(xs) != len(zs):
        raise DimensionMismatch(f"{len(xs)} vectors but {len(zs)} perturbations")
    if xs and not t_defect(xs).meets(t):
        return PerturbationVerdict(0)
    for i, (x, z) in enumerate(zip(xs, zs), start=1):
        if not norm(x - z) < t * norm(x):
            return PerturbationVerdict(i)

    norms_preserved = all(norm(x) == norm(z) for x, z in zip(xs, zs))
    defect = t_defect(zs).level if zs else ONE
    return PerturbationVerdict(None, norms_preserved, defect, norms_preserved and defect >= t)


@dataclass(frozen=True)
class SplitResult:
    u: Tuple[Vector, ...]
    m_x: int
    complement: Subspace
    verdict: OrthogonalityVerdict


def maximal_orthogonal_split(Y: Subspace, X: Subspace) -> SplitResult:
    """Orthogonal base of Y whose first elements span X; the rest span F_Y with F_Y orthogonal to X"""
    if not X.is_subspace_of(Y):
        raise NotInDomain("maximal_orthogonal_split: X is not contained in Y")
    complement = orthocomplement(X, Y)
    verdict = subspaces_orthogonal(complement, X)
    return SplitResult(X.base + complement.base, X.dim, complement, verdict)


# ==================== Isometry patching and extension ====================

@dataclass(frozen=True)
class PatchResult:
    map: LinearMap
    certificate: IsometryCertificate
    t: Magnitude
    restriction_holds: bool
    chain_holds: bool


def patch_isometry(j: LinearMap, f: LinearMap) -> PatchResult:
    """
    T: Y -> G with T = j on X and T = f on an orthogonal complement of X,
    given ||j - f|X|| < 1.
    """
    if j.codomain != f.codomain:
        raise DimensionMismatch("j and f must share the codomain")
    if j.domain.ambient != f.domain.ambient or not j.domain.is_subspace_of(f.domain):
        raise NotInDomain("the domain of j must be contained in the domain of f")
    for name, L in (("j", j), ("f", f)):
        cert = certify_isometry(L)
        if not cert.holds:
            raise NotIsometric(f"{name} is not an isometry: {cert.reason}", witness=cert.refutation)

    t, witness = operator_norm_attained(j.difference(f))
    if t >= ONE:
        raise OperatorNormNotBelowOne(f"||j - f|X|| = {t} is not below 1", witness=witness)
    if t.zero:
        return PatchResult(f, certify_isometry(f), t, True, True)

    split = maximal_orthogonal_split(f.domain, j.domain)
    images = [j.evaluate(u) if k < split.m_x else f.evaluate(u) for k, u in enumerate(split.u)]
    T = LinearMap(split.u, images, f.codomain, f.domain.ambient)
    certificate = certify_isometry(T)
    restriction = T.agrees_with(j, j.domain.base)
    chain = all(norm(j.evaluate(x) - f.evaluate(x)) < norm(x) for x in j.domain.base)
    logger.debug("patched with t = %s", t)
    return PatchResult(T, certificate, t, restriction, chain)


def extend_isometry_immediate(
    D: Subspace,
    T: LinearMap,
    E: Optional[Union[WeightedSpace, Subspace]] = None
) -> LinearMap:
    E = _as_subspace(E) if E is not None else D.ambient.as_subspace()
    complement = orthocomplement(D, E)
    if complement.dim:
        raise NotImmediate("E has vectors orthogonal to D", witness=complement.base[0])
    if D.dim != E.dim:
        raise Unsupported("proper immediate extensions are not representable")
    return T


@dataclass(frozen=True)
class EmbeddingResult:
    map: LinearMap
    certificate: IsometryCertificate
    indices: Tuple[int, ...]
    scalars: Tuple[Scalar, ...]
    representatives: Tuple[Magnitude, ...]


def embed_into_Eu(E: Union[WeightedSpace, Subspace], registry: CosetRegistry, A: Ambient) -> EmbeddingResult:
    """x_n -> lambda_n e_l(n) with ||e_l(n)|| = s_g and |lambda_n| = ||x_n|| / s_g"""
    E = _as_subspace(E)
    if E.ambient.field != A.field:
        raise BackendMismatch("E and the ambient stage use different fields")
    if registry is not A.registry:
        raise InvalidInput("embed_into_Eu needs the registry of the ambient stage")
    allocations = []
    for x in E.base:
        n = norm(x)
        coset = coset_of(n, registry.group)
        index, s_g = A.allocate_for_coset(coset)
        allocations.append((index, _scalar_for_ratio(n, s_g, A.field), s_g))
    stage = A.stage
    images = [stage.unit(index).scale(lam) for index, lam, _ in allocations]
    L = LinearMap(E.base, images, stage, E.ambient)
    certificate = certify_isometry(L)
    return EmbeddingResult(
        L, certificate,
        tuple(a[0] for a in allocations),
        tuple(a[1] for a in allocations),
        tuple(a[2] for a in allocations),
    )


@dataclass(frozen=True)
class DispositionResult:
    stage: WeightedSpace
    map: LinearMap
    certificate: IsometryCertificate
    retraction_holds: bool
    mode: str
    allocated: Tuple[int, ...]
    perturbation: Optional[PerturbationVerdict] = None
    approx_norm: Optional[Magnitude] = None


def _truncate(z: Vector, t: Magnitude) -> Vector:
    """Drop coordinates with w_c |z_c| < (t/2) ||z||"""
    threshold = t * Magnitude.of(Fraction(1, 2)) * norm(z)
    zero = z.space.field.zero()
    coords = tuple(
        zero if not c.is_zero and w * abs(c) < threshold else c
        for w, c in zip(z.space.weights, z.coords)
    )
    return Vector(z.space, coords)


def disposition_extend(
    A: Ambient,
    X: Subspace,
    j: LinearMap,
    mode: str = "direct",
    zs: Optional[Sequence[Vector]] = None,
    t: Optional[Magnitude] = None
) -> DispositionResult:
    """
    Extend the stage so that every isometric embedding j: X -> Y comes
    back: f: Y -> A isometric with f(j(x)) = x.

    Mode "direct" builds f from a maximal orthogonal split of Y over j(X).
    Mode "approx-then-patch" first sends j(X) to perturbed vectors (zs, or
    truncations of j^-1 at level t/2), checks the perturbation, and then
    patches the resulting isometry back onto j^-1 exactly.
    """
    if mode not in ("direct", "approx-then-patch"):
        raise InvalidInput(f"unknown disposition mode {mode!r}")
    cert = certify_isometry(j)
    if not cert.holds:
        raise NotIsometric(f"j is not an isometry: {cert.reason}", witness=cert.refutation)

    if X.ambient != j.domain.ambient or X.dim != j.domain.dim or not X.is_subspace_of(j.domain):
        raise NotInDomain("X must be the domain of j")
    Y = j.codomain
    jX = j.image
    back = j.inverse()
    split = maximal_orthogonal_split(Y.as_subspace(), jX)
    x_part = [back.evaluate(u) for u in split.u[:split.m_x]]

    verdict, approx_norm = None, None
    if mode == "approx-then-patch":
        t = t if t is not None else Magnitude.of(DEFAULT_CONFIG.construction.approx_t)
        lifted = [A.lift(z) for z in x_part]
        perturbed = [A.lift(z) for z in zs] if zs is not None else [_truncate(z, t) for z in lifted]
        verdict = check_perturbation(lifted, perturbed, t)
        if verdict.hypothesis_failed is not None:
            raise OperatorNormNotBelowOne(
                f"perturbation hypothesis fails at vector {verdict.hypothesis_failed}",
                witness=verdict.hypothesis_failed,
            )
        x_part = perturbed

    allocated = []
    fresh = []
    for u in split.u[split.m_x:]:
        n = norm(u)
        index, s_g = A.allocate_for_coset(coset_of(n, A.registry.group))
        allocated.append(index)
        fresh.append((index, _scalar_for_ratio(n, s_g, A.field)))

    stage = A.stage
    images = [stage.lift(z) for z in x_part] + [stage.unit(index).scale(lam) for index, lam in fresh]
    f = LinearMap(split.u, images, stage, Y)

    if mode == "approx-then-patch":
        target = A.lift_map(back)
        approx_norm, witness = operator_norm_attained(target.difference(f))
        if approx_norm >= ONE:
            raise OperatorNormNotBelowOne(f"||f - j^-1|| = {approx_norm} is not below 1", witness=witness)
        f = patch_isometry(target, f).map

    certificate = certify_isometry(f)
    retraction = all(
        (f.evaluate(j.evaluate(x)) - stage.lift(x)).is_negligible for x in j.domain.base
    )
    if certificate.holds:
        A.record_embedding(f)
    logger.debug("disposition_extend (%s): stage dim %d, allocated %s", mode, stage.dim, allocated)
    return DispositionResult(stage, f, certificate, retraction, mode, tuple(allocated), verdict, approx_norm)


# ==================== Classification ====================

@dataclass(frozen=True)
class Fingerprint:
    dim: int
    cosets: Tuple[Coset, ...]

    def __str__(self) -> str:
        return f"dim {self.dim}: {{" + ", ".join(str(c) for c in self.cosets) + "}"


def classify(E: Union[WeightedSpace, Subspace]) -> Fingerprint:
    E = _as_subspace(E)
    group = E.ambient.field.value_group
    cosets = sorted((coset_of(norm(b), group) for b in E.base), key=Coset.sort_key)
    return Fingerprint(E.dim, tuple(cosets))


@dataclass(frozen=True)
class IsometryComparison:
    isometric: bool
    fingerprints: Tuple[Fingerprint, Fingerprint]
    witness: Optional[LinearMap] = None
    certificate: Optional[IsometryCertificate] = None
    # a coset attained by one side's norms and not the other's
    obstruction: Optional[Coset] = None


def _multiset_difference(a: Sequence[Coset], b: Sequence[Coset]) -> Optional[Coset]:
    remaining = list(b)
    for c in a:
        if c in remaining:
            remaining.remove(c)
        else:
            return c
    return None


def isometric_eq(E: Union[WeightedSpace, Subspace], F: Union[WeightedSpace, Subspace]) -> IsometryComparison:
    E, F = _as_subspace(E), _as_subspace(F)
    if E.ambient.field != F.ambient.field:
        raise BackendMismatch("spaces over different fields")
    fp_e, fp_f = classify(E), classify(F)
    if fp_e != fp_f:
        obstruction = _multiset_difference(fp_e.cosets, fp_f.cosets) or _multiset_difference(fp_f.cosets, fp_e.cosets)
        return IsometryComparison(False, (fp_e, fp_f), obstruction=obstruction)

    group = E.ambient.field.value_group
    unused = list(F.base)
    images = []
    for b in E.base:
        n = norm(b)
        coset = coset_of(n, group)
        match = next(v for v in unused if coset_of(norm(v), group) == coset)
        unused.remove(match)
        images.append(match.scale(_scalar_for_ratio(n, norm(match), E.ambient.field)))
    witness = LinearMap(E.base, images, F.ambient, E.ambient)
    certificate = certify_isometry(witness)
    return IsometryComparison(certificate.holds, (fp_e, fp_f), witness, certificate)


# ==================== Shrinking balls ====================

@dataclass(frozen=True)
class BallCheck:
    n: int
    member: bool
    radius_decreases: bool
    nested: bool

    @property
    def passed(self) -> bool:
        return self.member and self.radius_decreases and self.nested


@dataclass(frozen=True)
class BallsReport:
    stream: Tuple[Magnitude, ...]
    centers: Tuple[Vector, ...]
    radii: Tuple[Magnitude, ...]
    checks: Tuple[BallCheck, ...]
    radii_in_bound: bool
    log: Tuple[str, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def default_stream(count: int) -> List[Magnitude]:
    """m_n = 2^(-n / (2(n+1))) for n = 1..count"""
    return [Magnitude.power(2, Fraction(-n, 2 * (n + 1))) for n in range(1, count + 1)]


def shrinking_balls(
    N: int,
    stream: Optional[Sequence[Magnitude]] = None,
    f: Optional[FieldDescriptor] = None
) -> BallsReport:
    """
    Balls B_n = B(x_n, m_{n+1}) with x_n = e_1 + ... + e_n and ||e_k|| = m_k.
    Uses N + 1 stream values and checks the N - 1 consecutive nestings.
    """
    if N < 2:
        raise InvalidInput(f"shrinking_balls needs N >= 2, got {N}")
    stream = list(stream) if stream is not None else default_stream(N + 1)
    if len(stream) < N + 1:
        raise InvalidInput(f"stream needs {N + 1} values, got {len(stream)}")
    stream = stream[:N + 1]
    half = Magnitude.of(Fraction(1, 2))
    if stream[0] > ONE:
        raise InvalidInput(f"first stream value {stream[0]} exceeds 1")
    for k in range(1, len(stream)):
        if not stream[k] < stream[k - 1]:
            raise NonDecreasingStream(f"stream value {k + 1} does not decrease", witness=stream[k])
    if not stream[-1] > half:
        raise InvalidInput(f"stream values must stay above 1/2, got {stream[-1]}")

    f = f or FieldDescriptor(Backend.PADIC, 2)
    A = Ambient(WeightedSpace(f, ()))
    A.allocate(stream)
    stage = A.stage
    units = [stage.unit(k) for k in range(stage.dim)]

    centers = []
    total = stage.zero()
    for n in range(N):
        total = total + units[n]
        centers.append(total)
    radii = [stream[n + 1] for n in range(N)]

    checks = []
    for n in range(N - 1):
        gap = norm(centers[n + 1] - centers[n])
        checks.append(BallCheck(
            n + 1,
            member=gap <= radii[n],
            radius_decreases=radii[n + 1] < radii[n],
            nested=gap <= radii[n] and radii[n + 1] <= radii[n],
        ))
    floor = Magnitude.power(2, Fraction(-1, 2))
    in_bound = all(floor < r <= ONE for r in radii)

    log = [f"ball {c.n + 1} inside ball {c.n}: {'ok' if c.passed else 'FAILED'}" for c in checks]
    log.append("emptiness of the full intersection concerns the infinite sequence and is not checked")
    return BallsReport(tuple(stream), tuple(centers), tuple(radii), tuple(checks), in_bound, tuple(log))

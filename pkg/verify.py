"""
Gurarii Toolkit - Verification Suites

Brute-force oracles, seeded instance generators and the property-suite
runner. Every suite case is derived from (master seed, case index) so
reports are reproducible under any parallelism.
"""

import hashlib
import itertools
import json
import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table
from sympy import Matrix, Rational

from codec import to_plain
from config import DEFAULT_CONFIG, Backend
from errors import (
    CapsExceeded, GurariiError, InvalidInput, NoGap, NotIsometric, PrecisionExhausted,
    UnknownSuite,
)
from gurarii import (
    Ambient, check_perturbation, classify, disposition_extend, embed_into_Eu,
    epsilon_isometry, isometric_eq, maximal_orthogonal_split,
    nonexistence_certificate, patch_isometry, shrinking_balls,
)
from magnitude import ONE, ZERO, Magnitude, coset_of
from scalar import (
    FieldDescriptor, HahnScalar, PadicScalar, Scalar, random_scalar, scalar_with_abs,
)
from space import (
    LinearMap, Subspace, Vector, WeightedSpace, certify_isometry, combine,
    distance, extend_base, norm, orthogonalize, t_defect,
)

logger = logging.getLogger("gurarii.verify")


# ==================== Oracle configuration and seeds ====================

@dataclass
class OracleConfig:
    """Caps of the brute-force distance oracle"""
    valuation_window: int = DEFAULT_CONFIG.verify.valuation_window
    digit_depth: int = DEFAULT_CONFIG.verify.digit_depth
    max_ambient_dim: int = DEFAULT_CONFIG.verify.max_ambient_dim
    max_subspace_dim: int = DEFAULT_CONFIG.verify.max_subspace_dim

    def __post_init__(self):
        for name in ("valuation_window", "digit_depth", "max_ambient_dim", "max_subspace_dim"):
            if getattr(self, name) < 1:
                raise InvalidInput(f"oracle cap {name} must be positive")


@dataclass(frozen=True)
class InstanceSeed:
    """Master seed plus case index; each index gets its own stream"""
    master: int
    index: int

    def rng(self) -> random.Random:
        digest = hashlib.sha256(f"{self.master}:{self.index}".encode()).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))


# ==================== Brute-force distance ====================

@dataclass(frozen=True)
class OracleResult:
    distance: Magnitude
    candidates: int
    grid_bound: str


def _grid_units(p: int, depth: int) -> List[Fraction]:
    bound = p ** depth
    units = {
        sign * Fraction(a, b)
        for a in range(1, bound + 1) for b in range(1, bound + 1)
        if a % p and b % p for sign in (1, -1)
    }
    return sorted(units)


def _cramer_candidates(v: Vector, spanning: Sequence[Vector]) -> List[Tuple[Fraction, ...]]:
    """Coefficient tuples cancelling v on some choice of coordinates"""
    m, n = len(spanning), v.space.dim
    found = []
    for k in range(1, m + 1):
        for chosen in itertools.combinations(range(m), k):
            for coords in itertools.combinations(range(n), k):
                M = Matrix([[Rational(spanning[i].coords[c].value.numerator,
                                      spanning[i].coords[c].value.denominator)
                             for i in chosen] for c in coords])
                if M.det() == 0:
                    continue
                rhs = Matrix([Rational(v.coords[c].value.numerator, v.coords[c].value.denominator)
                              for c in coords])
                solution = M.LUsolve(rhs)
                coefficients = [Fraction(0)] * m
                for i, s in zip(chosen, solution):
                    coefficients[i] = Fraction(int(s.p), int(s.q))
                found.append(tuple(coefficients))
    return found


def brute_force_distance(v: Vector, D: Subspace, cfg: Optional[OracleConfig] = None) -> OracleResult:
    """
    min ||v - sum l_i d_i|| over the grid {0} u {u p^k : |k| <= M} plus
    every coefficient tuple that cancels v on some coordinates.
    """
    cfg = cfg or OracleConfig()
    space = v.space
    if space.field.backend != Backend.PADIC:
        raise InvalidInput("the distance oracle runs on the p-adic backend only")
    if space.dim > cfg.max_ambient_dim or len(D.vectors) > cfg.max_subspace_dim:
        raise CapsExceeded(
            f"oracle caps are ambient <= {cfg.max_ambient_dim}, subspace <= {cfg.max_subspace_dim}"
        )
    p = space.field.prime
    M = cfg.valuation_window
    grid = [Fraction(0)] + [u * Fraction(p) ** k for k in range(-M, M + 1)
                            for u in _grid_units(p, cfg.digit_depth)]
    spanning = list(D.vectors)

    best = norm(v)
    count = 1
    candidates = itertools.chain(
        itertools.product(grid, repeat=len(spanning)),
        _cramer_candidates(v, spanning),
    )
    for coefficients in candidates:
        scalars = [PadicScalar(c, p) for c in coefficients]
        value = norm(v - combine(scalars, spanning, space))
        count += 1
        if value < best:
            best = value
    return OracleResult(best, count, f"|k| <= {M}, unit digits <= {p ** cfg.digit_depth}")


# ==================== Generators ====================

def gen_field(rng: random.Random, backend: Optional[Backend] = None,
              primes: Sequence[int] = DEFAULT_CONFIG.verify.primes,
              tail_order: Optional[Fraction] = None) -> FieldDescriptor:
    backend = backend or rng.choice((Backend.PADIC, Backend.HAHN))
    prime = rng.choice(tuple(primes))
    if backend == Backend.HAHN and tail_order is not None:
        return FieldDescriptor(backend, prime, tail_order)
    return FieldDescriptor(backend, prime)


def gen_weight(rng: random.Random, p: int, cosets: bool = True) -> Magnitude:
    exponent = Fraction(rng.randint(-2, 2))
    if cosets and rng.random() < 0.4:
        exponent += Fraction(rng.randint(1, 3), rng.choice((2, 3, 4)))
    weight = Magnitude.power(p, exponent)
    if cosets and rng.random() < 0.15:
        other = 3 if p != 3 else 5
        weight = weight * Magnitude.power(other, Fraction(1, 2))
    return weight


def gen_space(rng: random.Random, dim: int, f: FieldDescriptor, cosets: bool = True) -> WeightedSpace:
    return WeightedSpace(f, tuple(gen_weight(rng, f.prime, cosets) for _ in range(dim)))


def _monomial_scalar(rng: random.Random, f: FieldDescriptor) -> Scalar:
    if rng.random() < 0.2:
        return f.zero()
    if f.backend == Backend.PADIC:
        return random_scalar(rng, f, zero_weight=0.0)
    return HahnScalar.monomial(rng.choice((1, -1, 2, Fraction(1, 2))), Fraction(rng.randint(-6, 6), 4), f.prime)


def gen_vector(rng: random.Random, space: WeightedSpace, nonzero: bool = True,
               monomial_only: bool = False) -> Vector:
    draw = _monomial_scalar if monomial_only else random_scalar
    while True:
        v = space.vector([draw(rng, space.field) for _ in range(space.dim)])
        if not (nonzero and v.is_zero):
            return v


def gen_subspace(rng: random.Random, space: WeightedSpace, k: int,
                 monomial_only: bool = False) -> Subspace:
    return Subspace(space, [gen_vector(rng, space, monomial_only=monomial_only) for _ in range(k)])


def _unit_scalar(rng: random.Random, f: FieldDescriptor) -> Scalar:
    p = f.prime
    if f.backend == Backend.PADIC:
        units = [u for u in range(1, p + 3) if u % p]
        return PadicScalar(Fraction(rng.choice(units), rng.choice(units)) * rng.choice((1, -1)), p)
    return HahnScalar.constant(rng.choice((1, -1, 2, Fraction(1, 3))), p)


def gen_isometry(rng: random.Random, space: WeightedSpace, steps: int = 3) -> LinearMap:
    """
    Composition of permutations among equal-weight coordinates, unit
    scalings and shears e_k -> e_k + mu e_j with |mu| w_j <= w_k.
    """
    n = space.dim
    f = space.field
    images = [list(space.unit(i).coords) for i in range(n)]

    for _ in range(steps):
        op = rng.choice(("permute", "scale", "shear"))
        if op == "permute":
            groups: Dict[Magnitude, List[int]] = {}
            for i, w in enumerate(space.weights):
                groups.setdefault(w, []).append(i)
            perm = list(range(n))
            for members in groups.values():
                shuffled = members[:]
                rng.shuffle(shuffled)
                for src, dst in zip(members, shuffled):
                    perm[src] = dst
            images = [[row[perm.index(c)] for c in range(n)] for row in images]
        elif op == "scale":
            i = rng.randrange(n)
            u = _unit_scalar(rng, f)
            for row in images:
                row[i] = row[i] * u
        elif n >= 2:
            k, j = rng.sample(range(n), 2)
            for _attempt in range(8):
                mu = random_scalar(rng, f, zero_weight=0.0)
                if abs(mu) * space.weights[j] <= space.weights[k]:
                    break
            else:
                continue
            for row in images:
                row[j] = row[j] + mu * row[k]

    units = [space.unit(i) for i in range(n)]
    L = LinearMap(units, [Vector(space, tuple(row)) for row in images], space, space)
    certificate = certify_isometry(L)
    if not certificate.holds:
        raise NotIsometric(f"generated map is not an isometry: {certificate.reason}")
    return L


def _small_multiple(v: Vector, bound: Magnitude) -> Vector:
    """v scaled by powers of the uniformizer until its norm drops below bound"""
    f = v.space.field
    step = PadicScalar(f.prime, f.prime) if f.backend == Backend.PADIC else HahnScalar.monomial(1, 1, f.prime)
    while not norm(v) < bound:
        v = v.scale(step)
    return v


def _embedding_into_new_space(rng: random.Random, X: Subspace, extra: int,
                              twist: bool = True) -> LinearMap:
    """
    Isometry X -> Y where Y has the norms of an orthogonal base of X as its
    first weights, followed by `extra` random weights.
    """
    f = X.ambient.field
    weights = tuple(norm(b) for b in X.base) + tuple(gen_weight(rng, f.prime) for _ in range(extra))
    Y = WeightedSpace(f, weights)
    images = [Y.unit(k) for k in range(X.dim)]
    if twist:
        g = gen_isometry(rng, Y)
        images = [g.evaluate(y) for y in images]
    return LinearMap(X.base, images, Y, X.ambient)


def freeze_golden(path: str, payload: Any) -> bool:
    """
    Write the golden file on first use; afterwards compare byte-exactly.
    Relative paths resolve under the configured golden directory.
    """
    if not os.path.isabs(path):
        path = os.path.join(DEFAULT_CONFIG.verify.golden_dir, path)
    text = json.dumps(to_plain(payload), indent=2, sort_keys=True) + "\n"
    if not os.path.exists(path):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            f.write(text)
        return True
    with open(path, "r") as f:
        return f.read() == text


# ==================== Suite cases ====================

@dataclass
class CaseResult:
    index: int
    passed: bool
    detail: str
    artifact: Any = None
    # raised instead of returning a verdict
    errored: bool = False


@dataclass
class SuiteContext:
    oracle: OracleConfig = field(default_factory=OracleConfig)
    samples: int = DEFAULT_CONFIG.verify.ortho_samples
    adversary: int = DEFAULT_CONFIG.verify.adversary_candidates
    eps_samples: int = 50
    # Hahn truncation order; raised on retry after PrecisionExhausted
    tail_order: Fraction = DEFAULT_CONFIG.arithmetic.default_tail_order

    def field_for(self, backend: Backend, prime: int) -> FieldDescriptor:
        if backend == Backend.HAHN:
            return FieldDescriptor(backend, prime, self.tail_order)
        return FieldDescriptor(backend, prime)


CaseFn = Callable[[InstanceSeed, SuiteContext], CaseResult]


def _random_tuples_orthogonal(rng: random.Random, base: Sequence[Vector], count: int) -> bool:
    f = base[0].space.field
    for _ in range(count):
        lambdas = [random_scalar(rng, f) for _ in base]
        total = combine(lambdas, base, base[0].space)
        expected = max((norm(b.scale(l)) for l, b in zip(lambdas, base)), default=ZERO)
        if norm(total) != expected:
            return False
    return True


def case_orth(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = FieldDescriptor(Backend.PADIC, rng.choice((2, 3, 5)))
    space = gen_space(rng, rng.randint(1, 6), f)
    vectors = [gen_vector(rng, space) for _ in range(rng.randint(1, space.dim + 1))]
    if len(vectors) >= 2 and rng.random() < 0.3:
        vectors.append(vectors[0] + vectors[1].scale(random_scalar(rng, f)))
    echelon = orthogonalize(vectors)
    base = echelon.base
    orthogonal = t_defect(base).is_orthogonal and _random_tuples_orthogonal(rng, base, ctx.samples)
    span = Subspace(space, base)
    spans = all(span.contains(v) for v in vectors) and len(base) + len(echelon.dependencies) == len(vectors)
    return CaseResult(seed.index, orthogonal and spans,
                      f"dim {space.dim}, {len(vectors)} vectors -> {len(base)} base",
                      None if orthogonal and spans else {"space": space, "vectors": vectors})


def case_oracle(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = FieldDescriptor(Backend.PADIC, rng.choice((2, 3)))
    space = gen_space(rng, rng.randint(1, ctx.oracle.max_ambient_dim), f)
    D = gen_subspace(rng, space, rng.randint(1, min(ctx.oracle.max_subspace_dim, space.dim)))
    v = gen_vector(rng, space, nonzero=False)
    if rng.random() < 0.2:
        v = combine([random_scalar(rng, f) for _ in D.vectors], D.vectors, space)
    dist, witness = distance(v, D)
    oracle = brute_force_distance(v, D, ctx.oracle)
    attained = norm(v - witness) == dist and D.contains(witness)
    ok = oracle.distance == dist and attained
    return CaseResult(seed.index, ok, f"distance {dist}, oracle {oracle.distance}",
                      None if ok else {"space": space, "span": D, "v": v})


def case_lem1(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = gen_field(rng, tail_order=ctx.tail_order)
    space = gen_space(rng, rng.randint(1, 4), f)
    F = gen_subspace(rng, space, rng.randint(0, space.dim), monomial_only=True)
    t = Magnitude.power(f.prime, -Fraction(rng.randint(0, 4), rng.choice((1, 2))))
    result = extend_base(F.base, space, t)
    ok = (result.certificate.meets(t) and result.vectors[:F.dim] == F.base
          and len(result.vectors) == space.dim)
    return CaseResult(seed.index, ok, f"|F| = {F.dim}, t = {t}, level {result.certificate.level}")


def case_l_ort(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = gen_field(rng, tail_order=ctx.tail_order)
    space = gen_space(rng, rng.randint(1, 4), f)
    xs = list(gen_subspace(rng, space, rng.randint(1, space.dim), monomial_only=True).base)
    t = Magnitude.power(f.prime, -Fraction(rng.randint(0, 2), 2))
    zs = []
    for x in xs:
        bound = t * norm(x)
        zs.append(x + _small_multiple(gen_vector(rng, space, monomial_only=True), bound))
    verdict = check_perturbation(xs, zs, t)
    ok = verdict.hypothesis_failed is None and verdict.certified
    return CaseResult(seed.index, ok, f"{len(xs)} vectors, t = {t}, defect {verdict.defect}")


def case_nowy(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = gen_field(rng, tail_order=ctx.tail_order)
    space = gen_space(rng, rng.randint(1, 4), f)
    Y = gen_subspace(rng, space, rng.randint(1, space.dim), monomial_only=True)
    X = Subspace(space, [combine([_monomial_scalar(rng, f) for _ in Y.base], Y.base, space)
                         for _ in range(rng.randint(0, Y.dim))])
    split = maximal_orthogonal_split(Y, X)
    ok = (split.verdict.orthogonal and len(split.u) == Y.dim
          and Subspace(space, split.u[:split.m_x]).dim == X.dim
          and t_defect(split.u).is_orthogonal)
    return CaseResult(seed.index, ok, f"dim Y {Y.dim}, dim X {X.dim}")


def case_th_aud_pos(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = ctx.field_for(Backend.HAHN, rng.choice((2, 3)))
    A = Ambient(gen_space(rng, rng.randint(1, 3), f))
    X = gen_subspace(rng, A.stage, rng.randint(1, A.stage.dim), monomial_only=True)
    i = _embedding_into_new_space(rng, X, rng.randint(0, 2))
    eps = rng.choice((Fraction(1, 2), Fraction(1, 4), Fraction(1, 10)))
    report = epsilon_isometry(A, X, i, eps, samples=ctx.eps_samples, seed=seed.index)
    ok = report.retraction_holds and report.bounds_hold
    return CaseResult(seed.index, ok, f"eps {eps}, t {report.t}, ratios [{report.lower}, {report.upper}]")


def _adversary(rng: random.Random, cert, count: int) -> bool:
    """
    Propose linear maps from the test space into the certified space; every
    one must be refuted. Half of them send (0,1) to a value-set point next
    to the gap, the rest are random.
    """
    E, Y = cert.space, cert.test_space
    f = E.field
    for n in range(count):
        first = gen_vector(rng, E, nonzero=False)
        if n % 2 == 0:
            k = rng.randrange(E.dim)
            ladder = cert.ladders[k]
            target = rng.choice((ladder.below, ladder.above))
            second = E.unit(k).scale(scalar_with_abs(target / E.weights[k], f))
        else:
            second = gen_vector(rng, E, nonzero=False)
        candidate = LinearMap([Y.unit(0), Y.unit(1)], [first, second], E, Y)
        if cert.refute_map(candidate) is None:
            return False
    return True


def case_th_aud_neg(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    p = rng.choice((2, 3, 5))
    E = WeightedSpace(FieldDescriptor(Backend.PADIC, p), tuple(ONE for _ in range(rng.randint(1, 3))))
    s = (1 + Fraction(1, p)) / 2
    eps = Fraction(p - 1, p + 1) / rng.randint(2, 6)
    cert = nonexistence_certificate(E, Magnitude.of(s), eps)
    ok = cert.recheck() and _adversary(rng, cert, ctx.adversary)
    return CaseResult(seed.index, ok, f"p {p}, s1 {s}, eps {eps}, gap ({cert.gap[0]}, {cert.gap[1]})")


def case_t_char(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    if seed.index == 0:
        p, eps = 2, Fraction(1, 4)
    else:
        p = rng.choice((2, 3, 5))
        eps = Fraction(p - 1, 2 * (p + 1))
    s = Magnitude.of((1 + Fraction(1, p)) / 2)

    padic = WeightedSpace(FieldDescriptor(Backend.PADIC, p), (ONE,))
    cert = nonexistence_certificate(padic, s, eps)
    discrete_ok = cert.recheck() and cert.gap == (Magnitude.power(p, -1), ONE)

    hahn = ctx.field_for(Backend.HAHN, p)
    try:
        nonexistence_certificate(WeightedSpace(hahn, (ONE,)), s, eps)
        dense_gap = False
    except NoGap:
        dense_gap = True
    A = Ambient.standard(hahn, 1)
    X = A.stage.as_subspace()
    Y = WeightedSpace(hahn, (ONE, s))
    i = LinearMap([A.stage.unit(0)], [Y.unit(0)], Y, A.stage)
    report = epsilon_isometry(A, X, i, eps, samples=ctx.eps_samples, seed=seed.index)
    dense_ok = dense_gap and report.bounds_hold and report.retraction_holds
    return CaseResult(seed.index, discrete_ok and dense_ok,
                      f"p {p}: gap ({cert.gap[0]}, {cert.gap[1]}); hahn t {report.t}")


def _pro_iso_example() -> Tuple[LinearMap, LinearMap]:
    f = FieldDescriptor(Backend.PADIC, 2)
    G = WeightedSpace(f, (ONE, ONE, ONE))
    Y = WeightedSpace(f, (ONE, ONE))
    j = LinearMap([Y.unit(0)], [G.unit(0)], G, Y)
    fmap = LinearMap([Y.unit(0), Y.unit(1)], [G.vector([1, 2, 0]), G.unit(2)], G, Y)
    return j, fmap


def case_pro_iso(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    if seed.index == 0:
        j, fmap = _pro_iso_example()
        result = patch_isometry(j, fmap)
        G = fmap.codomain
        ok = (result.certificate.holds and result.restriction_holds
              and result.map.evaluate(fmap.domain.ambient.unit(1)) == G.unit(2)
              and result.map.evaluate(fmap.domain.ambient.vector([1, 0])) == G.unit(0))
        return CaseResult(0, ok, f"worked example, t = {result.t}")

    f = gen_field(rng, tail_order=ctx.tail_order)
    G = gen_space(rng, rng.randint(2, 4), f)
    n_y = rng.randint(1, G.dim)
    Y = WeightedSpace(f, G.weights[:n_y])
    g = gen_isometry(rng, G)
    fmap = LinearMap([Y.unit(k) for k in range(n_y)], [g.evaluate(G.unit(k)) for k in range(n_y)], G, Y)
    X = Subspace(Y, [Y.unit(k) for k in range(rng.randint(1, n_y))])
    images = []
    for x in X.base:
        delta = _small_multiple(gen_vector(rng, G, monomial_only=True), norm(x))
        images.append(fmap.evaluate(x) + delta)
    j = LinearMap(X.base, images, G, Y)
    result = patch_isometry(j, fmap)
    ok = result.certificate.holds and result.restriction_holds and result.chain_holds
    return CaseResult(seed.index, ok, f"dim G {G.dim}, dim Y {n_y}, dim X {X.dim}, t = {result.t}")


def case_p_univers(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = gen_field(rng, tail_order=ctx.tail_order)
    space = gen_space(rng, rng.randint(1, 4), f)
    E = gen_subspace(rng, space, rng.randint(1, space.dim), monomial_only=True)
    A = Ambient(WeightedSpace(f, ()))
    result = embed_into_Eu(E, A.registry, A)
    norms_match = all(
        s_g * abs(lam) == norm(x)
        for s_g, lam, x in zip(result.representatives, result.scalars, E.base)
    )
    r = A.registry.r
    in_range = all(r < s <= ONE for s in result.representatives)
    ok = result.certificate.holds and norms_match and in_range and len(set(result.indices)) == E.dim
    return CaseResult(seed.index, ok, f"dim {E.dim}, {len(A.registry)} cosets")


def case_eh_approx(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f = gen_field(rng, tail_order=ctx.tail_order)
    p = f.prime
    A = Ambient.standard(f, 2)
    small = random_scalar(rng, f, zero_weight=0.0)
    x = _small_multiple(A.stage.unit(1).scale(small), Magnitude.power(p, -2) * Magnitude.of(Fraction(1, 4)))
    X = Subspace(A.stage, [A.stage.unit(0) + x])
    j = _embedding_into_new_space(rng, X, rng.randint(0, 2))
    result = disposition_extend(A, X, j, mode="approx-then-patch", t=Magnitude.of(Fraction(1, 2)))
    ok = (result.certificate.holds and result.retraction_holds
          and result.perturbation.certified and result.approx_norm < ONE)
    return CaseResult(seed.index, ok, f"approx norm {result.approx_norm}, stage dim {result.stage.dim}")


def case_ehh_balls(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    if seed.index == 0:
        report = shrinking_balls(50)
        ok = report.all_passed and report.radii_in_bound and len(report.checks) == 49
        return CaseResult(0, ok, "default stream, N = 50")
    N = rng.randint(2, 20)
    exponents = sorted({Fraction(rng.randint(1, 199), 200) for _ in range(3 * N)})[:N + 1]
    if len(exponents) < N + 1:
        exponents = [Fraction(k, N + 2) for k in range(1, N + 2)]
    stream = [Magnitude.power(2, -q) for q in exponents]
    report = shrinking_balls(N, stream)
    return CaseResult(seed.index, report.all_passed, f"random stream, N = {N}")


def case_izo_classify(seed: InstanceSeed, ctx: SuiteContext) -> CaseResult:
    rng = seed.rng()
    f2 = FieldDescriptor(Backend.PADIC, 2)
    n = 2 + seed.index % 5
    root_two = Magnitude.power(2, Fraction(1, 2))
    odd = WeightedSpace(f2, (root_two,) + tuple(ONE for _ in range(n - 1)))
    standard = WeightedSpace(f2, tuple(ONE for _ in range(n)))
    verdict = isometric_eq(odd, standard)
    distinguished = not verdict.isometric and verdict.obstruction == coset_of(root_two, f2.value_group)

    f = gen_field(rng, tail_order=ctx.tail_order)
    E = gen_space(rng, rng.randint(1, 4), f)
    shifted = [w * Magnitude.power(f.prime, rng.randint(-2, 2)) for w in E.weights]
    rng.shuffle(shifted)
    F = WeightedSpace(f, tuple(shifted))
    comparison = isometric_eq(E, F)
    g = gen_isometry(rng, E)
    invariant = classify(g.image) == classify(E)
    ok = distinguished and comparison.isometric and comparison.certificate.holds and invariant
    return CaseResult(seed.index, ok, f"n {n}: obstruction {verdict.obstruction}; random pair dim {E.dim}")


SUITES: Dict[str, CaseFn] = {
    "orth": case_orth,
    "oracle": case_oracle,
    "lem1": case_lem1,
    "l-ort": case_l_ort,
    "nowy": case_nowy,
    "th-aud-pos": case_th_aud_pos,
    "th-aud-neg": case_th_aud_neg,
    "t-char": case_t_char,
    "pro-iso": case_pro_iso,
    "p-univers": case_p_univers,
    "eh-approx": case_eh_approx,
    "ehh-balls": case_ehh_balls,
    "izo-classify": case_izo_classify,
}

# chain suites share state across cases and run in order
CHAIN_SUITES = ("prop-ud",)
SUITE_NAMES = tuple(SUITES) + CHAIN_SUITES


def _prop_ud_chain(master: int, cases: int, ctx: SuiteContext) -> List[CaseResult]:
    """
    Universal-disposition loop: every request extends one of two growing
    ambients (p-adic and Hahn); at the end all earlier embeddings are
    re-certified in the final stages.
    """
    ambients = {
        Backend.PADIC: Ambient.standard(FieldDescriptor(Backend.PADIC, 2), 1),
        Backend.HAHN: Ambient.standard(ctx.field_for(Backend.HAHN, 2), 1),
    }
    results = []
    for index in range(cases):
        seed = InstanceSeed(master, index)
        rng = seed.rng()
        backend = Backend.PADIC if index % 2 == 0 else Backend.HAHN
        A = ambients[backend]
        try:
            k = rng.randint(1, min(A.stage.dim, 2))
            X = gen_subspace(rng, A.stage, k, monomial_only=True)
            j = _embedding_into_new_space(rng, X, rng.randint(0, 2))
            mode = "direct" if rng.random() < 0.7 else "approx-then-patch"
            result = disposition_extend(A, X, j, mode=mode)
            ok = result.certificate.holds and result.retraction_holds
            results.append(CaseResult(index, ok, f"{backend.value} {mode}: stage dim {result.stage.dim}"))
        except GurariiError as e:
            results.append(CaseResult(index, False, f"{type(e).__name__}: {e}", e.witness, errored=True))
        except Exception as e:
            logger.exception("prop-ud case %d raised", index)
            results.append(CaseResult(index, False, f"internal {type(e).__name__}: {e}", errored=True))

    coherent = all(all(A.recheck_embeddings()) for A in ambients.values())
    if not coherent:
        results.append(CaseResult(cases, False, "an earlier embedding is no longer isometric"))
    return results


# ==================== Runner ====================

class SuiteRunner:
    """Runs property suites and collects verdicts"""

    def __init__(self, workers: Optional[int] = None, console: Optional[Console] = None,
                 quiet: bool = False, ctx: Optional[SuiteContext] = None):
        self.console = console or Console()
        self.workers = workers or DEFAULT_CONFIG.verify.workers
        self.quiet = quiet
        self.ctx = ctx or SuiteContext()

        # Suite results
        self.results = {
            'passed': 0,
            'failed': 0,
            'suites': []
        }

    def _record_result(self, report: Dict[str, Any]):
        """Record suite result"""
        self.results['suites'].append(report)
        self.results['passed'] += report['passed']
        self.results['failed'] += report['failed']

    def _run_case(self, fn: CaseFn, seed: InstanceSeed) -> CaseResult:
        ctx = self.ctx
        while True:
            try:
                return fn(seed, ctx)
            except PrecisionExhausted as e:
                if ctx.tail_order * 2 > DEFAULT_CONFIG.verify.max_tail_order:
                    return CaseResult(seed.index, False, f"{type(e).__name__}: {e}", e.witness, errored=True)
                logger.debug("case %d exhausted O(t^%s), retrying", seed.index, ctx.tail_order)
                ctx = replace(ctx, tail_order=ctx.tail_order * 2)
            except GurariiError as e:
                return CaseResult(seed.index, False, f"{type(e).__name__}: {e}", e.witness, errored=True)
            except Exception as e:
                logger.exception("case %d raised", seed.index)
                return CaseResult(seed.index, False, f"internal {type(e).__name__}: {e}", errored=True)

    def run_suite(self, name: str, seed: int, cases: int) -> Dict[str, Any]:
        if name == "all":
            reports = [self.run_suite(suite, seed, cases) for suite in SUITE_NAMES]
            return {
                "suite": "all", "seed": seed, "cases": cases,
                "passed": sum(r["passed"] for r in reports),
                "failed": sum(r["failed"] for r in reports),
                "errors": sum(r["errors"] for r in reports),
                "suites": reports,
            }
        if name not in SUITE_NAMES:
            raise UnknownSuite(f"unknown suite {name!r}; known: {', '.join(SUITE_NAMES)}, all")
        if cases < 1:
            raise InvalidInput(f"cases must be positive, got {cases}")

        start = time.perf_counter()
        if name in CHAIN_SUITES:
            outcomes = _prop_ud_chain(seed, cases, self.ctx)
        else:
            fn = SUITES[name]
            seeds = [InstanceSeed(seed, index) for index in range(cases)]
            if self.quiet:
                outcomes = self._execute(fn, seeds)
            else:
                with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
                              console=self.console, transient=True) as progress:
                    progress.add_task(f"suite {name} ({cases} cases)...", total=None)
                    outcomes = self._execute(fn, seeds)
        outcomes.sort(key=lambda r: r.index)
        elapsed = time.perf_counter() - start

        failures = [
            {"index": r.index, "detail": r.detail, "artifact": to_plain(r.artifact)}
            for r in outcomes if not r.passed
        ]
        report = {
            "suite": name,
            "seed": seed,
            "cases": cases,
            "passed": sum(1 for r in outcomes if r.passed),
            "failed": len(failures),
            "errors": sum(1 for r in outcomes if r.errored),
            "failures": failures,
            "wall_time": round(elapsed, 3),
        }
        self._record_result(report)
        return report

    def _execute(self, fn: CaseFn, seeds: List[InstanceSeed]) -> List[CaseResult]:
        if self.workers <= 1:
            return [self._run_case(fn, s) for s in seeds]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(lambda s: self._run_case(fn, s), seeds))

    def print_summary(self):
        """Print suite summary"""
        table = Table(title="Verification Results")
        table.add_column("Suite", style="cyan")
        table.add_column("Result", justify="center")
        table.add_column("Passed", justify="right")
        table.add_column("Failed", justify="right")
        table.add_column("Time (s)", justify="right")

        for suite in self.results['suites']:
            result = "[green]PASS[/green]" if suite['failed'] == 0 else "[red]FAIL[/red]"
            table.add_row(suite['suite'], result, str(suite['passed']),
                          str(suite['failed']), f"{suite['wall_time']:.2f}")

        self.console.print(table)

        total = self.results['passed'] + self.results['failed']
        if self.results['failed'] == 0:
            status = "[bold green]ALL CASES PASSED[/bold green]"
        else:
            status = f"[bold red]{self.results['failed']} CASES FAILED[/bold red]"
        self.console.print(f"\nSummary: {self.results['passed']}/{total} passed")
        self.console.print(status)


def run_suite(name: str, seed: int, cases: int, workers: Optional[int] = None,
              ctx: Optional[SuiteContext] = None) -> Dict[str, Any]:
    return SuiteRunner(workers=workers, quiet=True, ctx=ctx).run_suite(name, seed, cases)


def strip_timing(report: Dict[str, Any]) -> Dict[str, Any]:
    """Report without wall-clock fields, for determinism comparisons"""
    cleaned = {k: v for k, v in report.items() if k != "wall_time"}
    if "suites" in cleaned:
        cleaned["suites"] = [strip_timing(r) for r in cleaned["suites"]]
    return cleaned

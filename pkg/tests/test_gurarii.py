from fractions import Fraction

import pytest

from config import Backend
from errors import (
    AllocatorExhausted, DimensionMismatch, NoGap, NonDecreasingStream, NotDenselyValued,
    NotImmediate, OperatorNormNotBelowOne,
)
from gurarii import (
    Ambient, CosetRegistry, check_perturbation, classify, default_stream,
    disposition_extend, embed_into_Eu, epsilon_isometry, extend_isometry_immediate,
    isometric_eq, maximal_orthogonal_split, nonexistence_certificate,
    patch_isometry, shrinking_balls, value_set_dense,
)
from magnitude import ONE, ZERO, Magnitude, coset_of
from scalar import FieldDescriptor, HahnScalar, PadicScalar
from space import LinearMap, Subspace, WeightedSpace, certify_isometry, norm

F = Fraction
Q2 = FieldDescriptor(Backend.PADIC, 2)
H2 = FieldDescriptor(Backend.HAHN, 2)
STD1 = WeightedSpace(Q2, (ONE,))
STD2 = WeightedSpace(Q2, (ONE, ONE))
STD3 = WeightedSpace(Q2, (ONE, ONE, ONE))
ROOT2 = Magnitude.power(2, F(1, 2))


def two(e) -> Magnitude:
    return Magnitude.power(2, F(e))


def units(space):
    return [space.unit(i) for i in range(space.dim)]


class TestRegistry:
    def test_discrete_default_bound(self):
        registry = CosetRegistry(Q2.value_group)
        assert registry.r == two(-1)
        assert registry.representative(coset_of(ROOT2, Q2.value_group)) == two(F(-1, 2))

    def test_dense_default_bound(self):
        registry = CosetRegistry(H2.value_group)
        assert registry.r == Magnitude.of(F(3, 4))
        expected = Magnitude.from_factors([(2, F(-7, 4)), (3, 1)])
        assert registry.representative(coset_of(Magnitude.power(3, 1), H2.value_group)) == expected

    def test_allocator_cap(self):
        A = Ambient(STD1, max_dim=2)
        A.allocate([ONE])
        with pytest.raises(AllocatorExhausted):
            A.allocate([ONE])


class TestDensity:
    def test_standard_padic(self):
        verdict = value_set_dense(STD2)
        assert not verdict.dense
        assert verdict.gap == (two(-1), ONE)

    def test_hahn(self):
        assert value_set_dense(WeightedSpace(H2, (ONE,))).dense

    def test_merged_ladders(self):
        verdict = value_set_dense(WeightedSpace(Q2, (ONE, two(F(-1, 2)))))
        assert verdict.gap == (two(F(-1, 2)), ONE)


class TestEpsilonIsometry:
    def test_identity(self):
        A = Ambient.standard(Q2, 2)
        X = A.stage.as_subspace()
        report = epsilon_isometry(A, X, LinearMap.identity(X), F(1, 4))
        assert report.lower == ONE and report.upper == ONE
        assert report.retraction_holds

    def test_hahn_pull_back(self):
        A = Ambient.standard(H2, 2)
        X = Subspace(A.stage, [A.stage.unit(0)])
        Y = WeightedSpace(H2, (ONE, two(F(-1, 3))))
        i = LinearMap([A.stage.unit(0)], [Y.unit(0)], Y, A.stage)
        report = epsilon_isometry(A, X, i, F(1, 2), samples=50)
        assert report.t == two(F(-1, 8))
        assert report.bounds_hold and report.retraction_holds
        image = report.map.evaluate(Y.unit(1))
        assert image.coords[0].is_zero
        assert image.coords[1] == HahnScalar.monomial(1, F(1, 3), 2)
        assert report.t_squared_bound and report.t_cubed_bound

    def test_discrete_refused(self):
        A = Ambient.standard(Q2, 1)
        X = A.stage.as_subspace()
        Y = WeightedSpace(Q2, (ONE, ONE))
        i = LinearMap([A.stage.unit(0)], [Y.unit(0)], Y, A.stage)
        with pytest.raises(NotDenselyValued):
            epsilon_isometry(A, X, i, F(1, 4))


class TestGapCertificate:
    def test_documented_instance(self):
        cert = nonexistence_certificate(STD1, Magnitude.of(F(3, 4)), F(1, 4))
        assert cert.gap == (two(-1), ONE)
        assert cert.interval == (Magnitude.of(F(9, 16)), Magnitude.of(F(15, 16)))
        assert cert.recheck()

    def test_refutations(self):
        cert = nonexistence_certificate(STD2, Magnitude.of(F(3, 4)), F(1, 4))
        assert cert.refute(STD2.vector([1, 0])).side == "above"
        assert cert.refute(STD2.vector([2, 0])).side == "below"
        assert cert.refute(STD2.zero()).image_norm == ZERO

    def test_refuted_maps(self):
        cert = nonexistence_certificate(STD2, Magnitude.of(F(3, 4)), F(1, 4))
        Y = cert.test_space
        above = LinearMap(units(Y), [STD2.unit(1), STD2.unit(0)], STD2, Y)
        below = LinearMap(units(Y), [STD2.unit(0), STD2.vector([2, 0])], STD2, Y)
        assert cert.refute_map(above).side == "above"
        assert cert.refute_map(below).side == "below"
        assert cert.refute_map(below).image_norm == two(-1)

    def test_refute_map_wrong_domain(self):
        cert = nonexistence_certificate(STD2, Magnitude.of(F(3, 4)), F(1, 4))
        with pytest.raises(DimensionMismatch):
            cert.refute_map(LinearMap(units(STD2), units(STD2), STD2, STD2))

    def test_point_of_value_set(self):
        with pytest.raises(NoGap):
            nonexistence_certificate(STD1, two(-1), F(1, 4))

    def test_interval_too_wide(self):
        with pytest.raises(NoGap) as info:
            nonexistence_certificate(STD1, Magnitude.of(F(3, 4)), F(2, 5))
        assert info.value.witness == two(-1)

    def test_dense_has_no_gap(self):
        with pytest.raises(NoGap):
            nonexistence_certificate(WeightedSpace(H2, (ONE,)), Magnitude.of(F(3, 4)), F(1, 4))


class TestPatching:
    def test_documented_patch(self):
        Y = STD2
        j = LinearMap([Y.unit(0)], [STD3.unit(0)], STD3, Y)
        f = LinearMap(units(Y), [STD3.vector([1, 2, 0]), STD3.unit(2)], STD3, Y)
        result = patch_isometry(j, f)
        assert result.t == two(-1)
        assert result.certificate.holds and result.restriction_holds
        assert result.map.evaluate(Y.vector([3, 5])) == STD3.vector([3, 0, 5])

    def test_restriction_returns_f(self):
        f = LinearMap(units(STD2), [STD3.vector([1, 2, 0]), STD3.unit(2)], STD3, STD2)
        j = f.restrict(Subspace(STD2, [STD2.unit(0)]))
        result = patch_isometry(j, f)
        assert result.t == ZERO and result.map is f

    def test_far_apart(self):
        f = LinearMap(units(STD2), [STD3.unit(1), STD3.unit(2)], STD3, STD2)
        j = LinearMap([STD2.unit(0)], [STD3.unit(0)], STD3, STD2)
        with pytest.raises(OperatorNormNotBelowOne) as info:
            patch_isometry(j, f)
        assert info.value.witness == STD2.unit(0)


class TestSplitAndPerturbation:
    def test_split_equal(self):
        Y = STD2.as_subspace()
        result = maximal_orthogonal_split(Y, Y)
        assert result.m_x == 2 and result.complement.dim == 0

    def test_split_diagonal(self):
        result = maximal_orthogonal_split(STD2.as_subspace(), Subspace(STD2, [STD2.vector([1, 1])]))
        assert result.u == (STD2.vector([1, 1]), STD2.vector([0, 1]))
        assert result.verdict.orthogonal

    def test_split_coordinate_plane(self):
        result = maximal_orthogonal_split(STD3.as_subspace(), Subspace(STD3, units(STD3)[:2]))
        assert result.complement.base == (STD3.unit(2),)

    def test_split_hahn_truncated_member(self):
        plane = WeightedSpace(H2, (ONE, ONE))
        one_plus_t = HahnScalar(((F(1), F(0)), (F(1), F(1))), None, 2)
        b = plane.vector([one_plus_t, H2.one()])
        x = plane.vector([H2.one(), H2.inv(one_plus_t)])
        result = maximal_orthogonal_split(Subspace(plane, [b]), Subspace(plane, [x]))
        assert result.m_x == 1 and result.complement.dim == 0

    def test_unperturbed(self):
        xs = units(STD2)
        assert check_perturbation(xs, xs, ONE).certified

    def test_small_perturbation(self):
        verdict = check_perturbation(units(STD2), [STD2.vector([1, 2]), STD2.unit(1)], ONE)
        assert verdict.hypothesis_failed is None
        assert verdict.certified and verdict.defect == ONE

    def test_boundary_fails(self):
        verdict = check_perturbation(units(STD2), [STD2.vector([1, 1]), STD2.unit(1)], ONE)
        assert verdict.hypothesis_failed == 1
        assert not verdict.certified


class TestImmediate:
    def test_whole_space(self):
        D = STD2.as_subspace()
        T = LinearMap.identity(D)
        assert extend_isometry_immediate(D, T) is T

    def test_unit_line(self):
        D = Subspace(STD2, [STD2.unit(0)])
        with pytest.raises(NotImmediate) as info:
            extend_isometry_immediate(D, LinearMap.identity(D))
        assert info.value.witness == STD2.unit(1)

    def test_diagonal_line(self):
        D = Subspace(STD2, [STD2.vector([1, 1])])
        with pytest.raises(NotImmediate) as info:
            extend_isometry_immediate(D, LinearMap.identity(D))
        assert info.value.witness == STD2.vector([0, 1])


class TestUniversalStage:
    def test_single_vector(self):
        A = Ambient(WeightedSpace(Q2, ()))
        result = embed_into_Eu(STD1, A.registry, A)
        assert result.representatives == (ONE,)
        assert result.scalars == (PadicScalar(1, 2),)
        assert result.certificate.holds

    def test_half_coset(self):
        A = Ambient(WeightedSpace(Q2, ()))
        E = WeightedSpace(Q2, (ONE, ROOT2))
        result = embed_into_Eu(E, A.registry, A)
        assert result.representatives == (ONE, two(F(-1, 2)))
        assert result.scalars[1] == PadicScalar(F(1, 2), 2)
        assert result.certificate.holds

    def test_shared_coset_distinct_indices(self):
        A = Ambient(WeightedSpace(Q2, ()))
        result = embed_into_Eu(STD2, A.registry, A)
        assert len(set(result.indices)) == 2
        trivial = coset_of(ONE, Q2.value_group)
        assert A.registry.indices(trivial) == result.indices
        entries = A.registry.entries()
        assert list(entries) == [trivial] and len(A.registry) == 1
        assert entries[trivial].representative == ONE


class TestDisposition:
    def test_documented_extension(self):
        A = Ambient.standard(Q2, 1)
        X = A.stage.as_subspace()
        Y = WeightedSpace(Q2, (ONE, ROOT2))
        j = LinearMap([A.stage.unit(0)], [Y.unit(0)], Y, A.stage)
        result = disposition_extend(A, X, j)
        assert result.stage.dim == 2
        assert result.stage.weights[1] == two(F(-1, 2))
        assert result.map.evaluate(Y.unit(1)) == result.stage.vector([0, F(1, 2)])
        assert result.certificate.holds and result.retraction_holds

    def test_same_dimension(self):
        A = Ambient.standard(Q2, 2)
        X = A.stage.as_subspace()
        j = LinearMap.identity(X)
        result = disposition_extend(A, X, j)
        assert result.allocated == ()
        assert result.map.agrees_with(j, units(A.stage))

    def test_exact_approximation(self):
        A = Ambient.standard(Q2, 1)
        X = A.stage.as_subspace()
        Y = WeightedSpace(Q2, (ONE, ONE))
        j = LinearMap([A.stage.unit(0)], [Y.unit(0)], Y, A.stage)
        result = disposition_extend(A, X, j, mode="approx-then-patch", zs=[A.stage.unit(0)])
        assert result.approx_norm == ZERO
        assert result.perturbation.certified
        assert result.certificate.holds and result.retraction_holds

    def test_chain_coherence(self):
        A = Ambient.standard(Q2, 1)
        for weight in (ROOT2, two(F(1, 3)), ONE):
            X = Subspace(A.stage, [A.stage.unit(0)])
            Y = WeightedSpace(Q2, (ONE, weight))
            j = LinearMap([A.stage.unit(0)], [Y.unit(0)], Y, A.stage)
            disposition_extend(A, X, j)
        assert A.recheck_embeddings() == [True, True, True]


class TestClassification:
    def test_standard(self):
        comparison = isometric_eq(STD2, STD2)
        assert comparison.isometric and comparison.certificate.holds

    def test_obstruction(self):
        comparison = isometric_eq(WeightedSpace(Q2, (ROOT2, ONE)), STD2)
        assert not comparison.isometric
        assert comparison.obstruction == coset_of(ROOT2, Q2.value_group)

    def test_scaled_weight(self):
        E = WeightedSpace(Q2, (ONE, two(3)))
        comparison = isometric_eq(E, STD2)
        assert comparison.isometric
        assert comparison.witness.evaluate(E.unit(1)) == STD2.vector([0, F(1, 8)])
        assert certify_isometry(comparison.witness).holds

    def test_fingerprint(self):
        fingerprint = classify(WeightedSpace(Q2, (ROOT2, ONE)))
        assert fingerprint.dim == 2
        assert coset_of(ROOT2, Q2.value_group) in fingerprint.cosets


class TestShrinkingBalls:
    def test_two_balls(self):
        report = shrinking_balls(2)
        assert report.stream[:2] == (two(F(-1, 4)), two(F(-1, 3)))
        assert norm(report.centers[1] - report.centers[0]) == two(F(-1, 3))
        assert report.all_passed

    def test_fifty_balls(self):
        report = shrinking_balls(50)
        assert len(report.checks) == 49
        assert report.all_passed and report.radii_in_bound

    def test_constant_stream(self):
        with pytest.raises(NonDecreasingStream):
            shrinking_balls(2, [two(F(-1, 4))] * 3)

    def test_discrete_stage(self):
        report = shrinking_balls(3, default_stream(4), Q2)
        assert report.all_passed

import json
from fractions import Fraction

import pytest

from config import Backend
from errors import CapsExceeded, InvalidInput, PrecisionExhausted, UnknownSuite
from magnitude import ONE, ZERO, Magnitude
from scalar import FieldDescriptor
from space import Subspace, WeightedSpace, certify_isometry
from verify import (
    CaseResult, InstanceSeed, OracleConfig, SuiteContext, SuiteRunner, brute_force_distance,
    freeze_golden, gen_isometry, gen_space, run_suite, strip_timing,
)

Q2 = FieldDescriptor(Backend.PADIC, 2)
STD2 = WeightedSpace(Q2, (ONE, ONE))
QUICK = SuiteContext(samples=3, adversary=50, eps_samples=5)


class TestOracle:
    def test_diagonal(self):
        result = brute_force_distance(STD2.vector([1, 0]), Subspace(STD2, [STD2.vector([1, 1])]))
        assert result.distance == ONE

    def test_residual(self):
        result = brute_force_distance(STD2.vector([1, 2]), Subspace(STD2, [STD2.vector([1, 0])]))
        assert result.distance == Magnitude.of(Fraction(1, 2))

    def test_member(self):
        result = brute_force_distance(STD2.vector([3, 3]), Subspace(STD2, [STD2.vector([1, 1])]))
        assert result.distance == ZERO

    def test_caps(self):
        big = WeightedSpace(Q2, (ONE,) * 4)
        with pytest.raises(CapsExceeded):
            brute_force_distance(big.unit(0), Subspace(big, [big.unit(1)]))

    def test_padic_only(self):
        H = WeightedSpace(FieldDescriptor(Backend.HAHN, 2), (ONE,))
        with pytest.raises(InvalidInput):
            brute_force_distance(H.unit(0), H.as_subspace())

    def test_invalid_caps(self):
        with pytest.raises(InvalidInput):
            OracleConfig(digit_depth=0)


class TestGenerators:
    def test_seed_streams(self):
        a, b = InstanceSeed(42, 3).rng(), InstanceSeed(42, 3).rng()
        assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]
        assert InstanceSeed(42, 3).rng().random() != InstanceSeed(42, 4).rng().random()

    @pytest.mark.parametrize("index", range(5))
    def test_generated_isometries_certify(self, index):
        rng = InstanceSeed(7, index).rng()
        space = gen_space(rng, 3, Q2)
        assert certify_isometry(gen_isometry(rng, space)).holds


class TestGolden:
    def test_freeze_then_compare(self, tmp_path):
        path = str(tmp_path / "golden" / "gap.json")
        payload = {"gap": ["2^-1", "1"], "epsilon": Fraction(1, 4)}
        assert freeze_golden(path, payload)
        assert freeze_golden(path, payload)
        assert not freeze_golden(path, {"gap": ["2^-1", "2"]})
        with open(path) as f:
            assert json.load(f)["epsilon"] == "1/4"


class TestSuites:
    @pytest.mark.parametrize("suite", ["t-char", "pro-iso", "ehh-balls"])
    def test_worked_examples_pass(self, suite):
        report = run_suite(suite, 1, 1, workers=1, ctx=QUICK)
        assert report["passed"] == 1 and report["failed"] == 0

    def test_unknown_suite(self):
        with pytest.raises(UnknownSuite):
            run_suite("bogus", 1, 1)

    def test_case_count(self):
        with pytest.raises(InvalidInput):
            run_suite("orth", 1, 0)

    def test_parallelism_does_not_change_report(self):
        serial = run_suite("orth", 5, 4, workers=1, ctx=QUICK)
        parallel = run_suite("orth", 5, 4, workers=4, ctx=QUICK)
        assert strip_timing(serial) == strip_timing(parallel)
        assert serial["cases"] == 4 and serial["passed"] + serial["failed"] == 4

    def test_runner_totals(self):
        runner = SuiteRunner(workers=1, quiet=True, ctx=QUICK)
        runner.run_suite("t-char", 3, 1)
        runner.run_suite("pro-iso", 3, 1)
        assert runner.results["passed"] + runner.results["failed"] == 2
        assert [s["suite"] for s in runner.results["suites"]] == ["t-char", "pro-iso"]


class TestCaseErrors:
    runner = SuiteRunner(workers=1, quiet=True, ctx=QUICK)

    def test_precision_retried_at_higher_order(self):
        def needs_order_32(seed, ctx):
            if ctx.tail_order < 32:
                raise PrecisionExhausted(f"O(t^{ctx.tail_order}) too short")
            return CaseResult(seed.index, True, str(ctx.tail_order))

        result = self.runner._run_case(needs_order_32, InstanceSeed(1, 0))
        assert result.passed and not result.errored
        assert result.detail == "32"

    def test_precision_gives_up_past_the_cap(self):
        def never_enough(seed, ctx):
            raise PrecisionExhausted("leading term hidden", witness=ctx.tail_order)

        result = self.runner._run_case(never_enough, InstanceSeed(1, 0))
        assert result.errored and not result.passed
        assert result.detail.startswith("PrecisionExhausted")
        assert result.artifact == 32

    def test_internal_error_is_recorded(self):
        def broken(seed, ctx):
            return 1 // 0

        result = self.runner._run_case(broken, InstanceSeed(1, 3))
        assert result.errored and result.index == 3
        assert result.detail.startswith("internal ZeroDivisionError")

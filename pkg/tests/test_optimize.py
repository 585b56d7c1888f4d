"""Binary-search optimizer and the bound-verification mode."""

import math

import pytest

from qipsolve import build_instance, minimax_value, objective_bounds, optimize, verify_bound
from qipsolve.cegar import SolveStats
from qipsolve.fuzzing import random_instance
from qipsolve.model import Quantifier, normalize
from qipsolve.ip import IpProblem, solve_ip

from .conftest import example1_instance


class TestOptimize:
    def test_example1_golden(self, example1):
        result = optimize(example1)
        assert result.status == "optimal"
        assert result.value == -1
        assert result.first_move == {0: 1}

    def test_example1_without_uncertainty_row_infeasible(self):
        result = optimize(example1_instance(with_uncertainty=False))
        assert result.status == "infeasible"

    def test_missing_objective_rejected(self, worked_example):
        with pytest.raises(ValueError, match="objective"):
            optimize(worked_example)

    def test_universal_first_block_rejected(self):
        inst = build_instance([("y", "A", 0, 1), ("x", "E", 0, 1)],
                              [([(1, "x"), (1, "y")], "<=", 1)],
                              [], ("min", [(1, "x")]))
        with pytest.raises(ValueError, match="existential"):
            optimize(inst)

    def test_single_block_matches_ip_optimum(self):
        compared = 0
        for seed in range(120):
            inst = random_instance(seed, max_blocks=1, with_objective=True)
            if inst.blocks[0].quantifier is not Quantifier.EXISTS:
                continue
            result = optimize(inst)
            coeffs = {v: c for c, v in inst.objective.coeffs}
            p = IpProblem(vars=[(v.id, v.lower, v.upper) for v in inst.variables],
                          rows=list(normalize(inst).exist_system),
                          objective=(inst.objective.sense, coeffs))
            out = solve_ip(p)
            assert (result.status == "optimal") == out.is_feasible
            if out.is_feasible:
                assert result.value == out.value
            compared += 1
            if compared >= 50:
                break
        assert compared >= 50

    def test_max_sense_negation(self):
        inst = build_instance(
            [("x", "E", 0, 3), ("y", "A", 0, 1)],
            [([(1, "x"), (1, "y")], "<=", 3)],
            [], ("max", [(1, "x")]))
        result = optimize(inst)
        assert result.status == "optimal"
        assert result.value == minimax_value(inst) == 2

    def test_probe_audit_is_monotone(self):
        # every feasible probe bound is >= the final value, every infeasible
        # probe is < it (minimization)
        for seed in range(80):
            inst = random_instance(seed, with_objective=True)
            if inst.blocks[0].quantifier is not Quantifier.EXISTS:
                continue
            result = optimize(inst)
            if result.status != "optimal":
                continue
            sign = 1 if inst.objective.sense == "min" else -1
            final = sign * result.value
            for z, verdict in result.probes:
                if verdict == "feasible":
                    assert z >= final
                else:
                    assert z < final

    def test_probe_count_bound(self):
        for seed in range(80):
            inst = random_instance(seed, with_objective=True)
            if inst.blocks[0].quantifier is not Quantifier.EXISTS:
                continue
            result = optimize(inst)
            lb, ub = objective_bounds(inst)
            cap = (math.ceil(math.log2(ub - lb + 1)) if ub > lb else 0) + 1
            assert len(result.probes) <= cap

    def test_stats_accumulate_across_probes(self, example1):
        stats = SolveStats()
        result = optimize(example1, stats=stats)
        assert stats.ip_calls >= len(result.probes)
        assert stats.outcome == "optimal"


class TestVerifyBound:
    def test_example1_at_optimum(self, example1):
        assert verify_bound(example1, -1).status == "proved-optimal"

    def test_example1_at_weaker_strategy_value(self, example1):
        # the second winning strategy only achieves 1; a better one exists
        assert verify_bound(example1, 1).status == "better-exists"

    def test_at_box_lower_bound(self, example1):
        lb, _ = objective_bounds(example1)
        assert verify_bound(example1, lb).status == "proved-optimal"

    def test_fuzz_optimum_and_off_by_one(self):
        checked = 0
        for seed in range(400):
            inst = random_instance(seed, with_objective=True)
            if inst.blocks[0].quantifier is not Quantifier.EXISTS:
                continue
            result = optimize(inst)
            if result.status != "optimal":
                continue
            assert verify_bound(inst, result.value).status == "proved-optimal"
            off = result.value + (1 if inst.objective.sense == "min" else -1)
            assert verify_bound(inst, off).status == "better-exists"
            checked += 1
            if checked >= 40:
                break
        assert checked >= 40

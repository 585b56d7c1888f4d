"""Exhaustive reference oracle: feasibility, values, guard, vacuous domains."""

import pytest

from qipsolve import GuardExceeded, OracleReport, build_instance, minimax_feasible, minimax_value
from qipsolve.fuzzing import random_instance
from qipsolve.generators import gen_qrandomparity
from qipsolve.optimize import decision_instance


class TestFeasibility:
    def test_worked_example_false(self, worked_example):
        assert minimax_feasible(worked_example) is False

    def test_example1_decision_thresholds(self, example1):
        assert minimax_feasible(decision_instance(example1, -1)) is True
        assert minimax_feasible(decision_instance(example1, -2)) is False

    def test_parity_family_infeasible(self):
        assert minimax_feasible(gen_qrandomparity(3, 0)) is False

    def test_guard_refusal(self):
        inst = gen_qrandomparity(10, 0)  # 2^40 plays
        with pytest.raises(GuardExceeded):
            minimax_feasible(inst)

    def test_guard_parameter(self, example1):
        with pytest.raises(GuardExceeded):
            minimax_feasible(example1, max_leaves=10)


class TestValue:
    def test_example1_value(self, example1):
        assert minimax_value(example1) == -1

    def test_example1_value_attained_only_by_first_move_one(self, example1):
        # pinning x1=2 (the other winning strategy's move) worsens the value to 1
        pinned = build_instance(
            [("x1", "E", 2, 2), ("x2", "A", 0, 1), ("x3", "E", 0, 1),
             ("x4", "A", 0, 1), ("x5", "E", 0, 1)],
            [([(2, "x1"), (1, "x3"), (-1, "x5")], "<=", 4),
             ([(1, "x1"), (-1, "x2"), (1, "x3"), (-1, "x5")], "=", 1),
             ([(1, "x2"), (1, "x3"), (-1, "x4"), (-1, "x5")], "<=", 2),
             ([(1, "x1"), (1, "x2"), (1, "x3"), (1, "x4")], "<=", 3)],
            [([(1, "x2"), (1, "x4")], "<=", 1)],
            ("min", [(-1, "x1"), (2, "x2"), (-3, "x3"), (1, "x4"), (2, "x5")]))
        assert minimax_value(pinned) == 1

    def test_single_block_is_ip_optimum(self):
        inst = build_instance([("x", "E", -2, 3)],
                              [([(1, "x")], ">=", -1)],
                              [], ("min", [(2, "x")]))
        assert minimax_value(inst) == -2

    def test_infeasible_returns_none(self):
        inst = build_instance([("x", "E", 0, 1)],
                              [([(1, "x")], ">=", 2)],
                              [], ("min", [(1, "x")]))
        assert minimax_value(inst) is None

    def test_requires_objective(self, worked_example):
        with pytest.raises(ValueError, match="objective"):
            minimax_value(worked_example)

    def test_decision_sweep_is_monotone_and_flips_at_value(self):
        for seed in range(40):
            inst = random_instance(seed, with_objective=True, max_vars=6)
            if inst.objective.sense != "min":
                continue
            value = minimax_value(inst)
            from qipsolve import objective_bounds

            lb, ub = objective_bounds(inst)
            verdicts = [minimax_feasible(decision_instance(inst, z)) for z in range(lb, ub + 1)]
            assert all(not a or b for a, b in zip(verdicts, verdicts[1:]))  # monotone
            if value is None:
                assert not any(verdicts)
            else:
                assert verdicts[value - lb]
                assert value == lb or not verdicts[value - lb - 1]


class TestEmptyUniversalDomain:
    def test_globally_empty_uncertainty_counts_as_existential_win(self):
        inst = build_instance(
            [("z", "A", 0, 1), ("x", "E", 0, 1)],
            [([(1, "x")], ">=", 2)],  # unsatisfiable rows
            [([(1, "z")], ">=", 1), ([(1, "z")], "<=", 0)])  # empty uncertainty set
        report = OracleReport()
        assert minimax_feasible(inst, report=report) is True
        assert report.empty_domain_nodes == 1

    def test_admissible_instances_never_flag(self):
        for seed in range(60):
            report = OracleReport()
            minimax_feasible(random_instance(seed), report=report)
            assert report.empty_domain_nodes == 0

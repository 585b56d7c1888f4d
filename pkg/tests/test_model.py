"""Model-layer behavior: validation, normalization, instantiation, bounds."""

import random
from fractions import Fraction
from itertools import product

import pytest

from qipsolve import build_instance, normalize, objective_bounds, validate_instance
from qipsolve.model import (
    Quantifier,
    Relation,
    instantiate,
    instantiate_row,
    restrict,
    row,
)
from qipsolve.fuzzing import random_instance


def box_points(inst):
    ranges = [range(v.lower, v.upper + 1) for v in inst.variables]
    for point in product(*ranges):
        yield dict(enumerate(point))


def satisfies(system, assignment):
    return all(con.satisfied_by(assignment) for con in system)


class TestValidate:
    def test_example1_is_admissible(self, example1):
        assert validate_instance(example1).ok

    def test_universal_row_touching_existential_flagged(self):
        inst = build_instance(
            [("x2", "A", 0, 1), ("x3", "E", 0, 1)],
            [],
            [([(1, "x2"), (1, "x3")], "<=", 1)])
        report = validate_instance(inst)
        assert [i.kind for i in report.issues] == ["universal-touches-existential"]

    def test_contradictory_uncertainty_rows_flagged(self):
        inst = build_instance(
            [("z", "A", 0, 1), ("x", "E", 0, 1)],
            [],
            [([(1, "z")], ">=", 1), ([(1, "z")], "<=", 0)])
        report = validate_instance(inst)
        assert [i.kind for i in report.issues] == ["empty-uncertainty-set"]


class TestNormalize:
    def test_equality_splits(self):
        inst = build_instance(
            [("x1", "E", 0, 1), ("x2", "E", 0, 1), ("x3", "E", 0, 1), ("x5", "E", 0, 1)],
            [([(1, "x1"), (-1, "x2"), (1, "x3"), (-1, "x5")], "=", 1)])
        out = normalize(inst).exist_system
        assert len(out) == 2
        assert all(c.relation is Relation.LE for c in out)
        assert out[0].terms == tuple((Fraction(s), v) for s, v in [(1, 0), (-1, 1), (1, 2), (-1, 3)])
        assert out[0].rhs == 1
        assert out[1].terms == tuple((Fraction(s), v) for s, v in [(-1, 0), (1, 1), (-1, 2), (1, 3)])
        assert out[1].rhs == -1

    def test_ge_flips_sign(self):
        inst = build_instance(
            [("z1", "E", 0, 1), ("z2", "E", 0, 1), ("t", "E", 0, 1)],
            [([(1, "z1"), (1, "z2"), (1, "t")], ">=", 1)])
        (out,) = normalize(inst).exist_system
        assert out.relation is Relation.LE
        assert out.rhs == -1
        assert all(c == -1 for c, _ in out.terms)

    def test_le_system_unchanged(self, example1):
        le_only = build_instance(
            [("a", "E", 0, 1), ("b", "E", 0, 1)],
            [([(1, "a"), (2, "b")], "<=", 2)])
        assert normalize(le_only).exist_system == le_only.exist_system

    def test_preserves_satisfaction_on_box(self):
        for seed in range(30):
            inst = random_instance(seed, max_vars=6)
            norm = normalize(inst)
            for point in box_points(inst):
                assert satisfies(inst.exist_system, point) == satisfies(norm.exist_system, point)
                assert satisfies(inst.univ_system, point) == satisfies(norm.univ_system, point)


class TestInstantiate:
    def test_example1_first_move(self, example1):
        out = instantiate(example1.exist_system, {0: 1})
        assert [c.rhs for c in out] == [2, 0, 2, 2]
        for before, after in zip(example1.exist_system, out):
            assert after.relation is before.relation
            assert after.terms == tuple((c, v) for c, v in before.terms if v != 0)

    def test_zero_contribution(self):
        con = row([(2, 0), (1, 2)], "<=", 4)
        out = instantiate_row(con, {0: 0})
        assert out.terms == ((Fraction(1), 2),)
        assert out.rhs == 4

    def test_full_instantiation_keeps_fact(self):
        con = row([(1, 0), (1, 1)], "<=", 1)
        out = instantiate_row(con, {0: 1, 1: 1})
        assert out.terms == ()
        assert out.rhs == -1
        assert not out.satisfied_by({})

    def test_identity_on_small_instances(self):
        # a full point satisfies the system iff its unassigned part satisfies
        # the instantiated system, exhaustively over box points with random splits
        rng = random.Random(7)
        for seed in range(20):
            inst = random_instance(seed, max_vars=6)
            for point in box_points(inst):
                ids = list(point)
                for _ in range(2):
                    cut = rng.randint(0, len(ids))
                    rng.shuffle(ids)
                    part = {v: point[v] for v in ids[:cut]}
                    rest = {v: point[v] for v in ids[cut:]}
                    inst_rows = instantiate(inst.exist_system, part)
                    assert satisfies(inst.exist_system, point) == satisfies(inst_rows, rest)


class TestObjectiveBounds:
    def test_example1_bounds_match_enumeration(self, example1):
        values = [example1.objective.value(p) for p in box_points(example1)]
        assert len(values) == 48
        lb, ub = objective_bounds(example1)
        assert (lb, ub) == (min(values), max(values))
        assert lb == -5

    def test_zero_objective(self):
        inst = build_instance([("x", "E", 0, 1)], [], [], ("min", [(0, "x")]))
        assert objective_bounds(inst) == (0, 0)

    def test_single_term(self):
        inst = build_instance([("x", "E", -2, 2)], [], [], ("min", [(3, "x")]))
        assert objective_bounds(inst) == (-6, 6)

    def test_brackets_random_points(self):
        rng = random.Random(3)
        for seed in range(10):
            inst = random_instance(seed, with_objective=True)
            lb, ub = objective_bounds(inst)
            for _ in range(1000):
                point = {v.id: rng.randint(v.lower, v.upper) for v in inst.variables}
                assert lb <= inst.objective.value(point) <= ub


class TestStructure:
    def test_blocks_alternate(self):
        for seed in range(40):
            inst = random_instance(seed)
            quants = [b.quantifier for b in inst.blocks]
            assert all(a is not b for a, b in zip(quants, quants[1:]))

    def test_consecutive_same_quantifier_merge(self):
        inst = build_instance(
            [("a", "E", 0, 1), ("b", "E", 0, 1), ("c", "A", 0, 1), ("d", "E", 0, 1)], [])
        assert [b.quantifier for b in inst.blocks] == \
            [Quantifier.EXISTS, Quantifier.FORALL, Quantifier.EXISTS]
        assert [len(b.variables) for b in inst.blocks] == [2, 1, 1]

    def test_duplicate_name_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            build_instance([("a", "E", 0, 1), ("a", "E", 0, 1)], [])

    def test_duplicate_var_in_row_rejected(self):
        with pytest.raises(ValueError, match="twice"):
            row([(1, 0), (2, 0)], "<=", 1)

    def test_rational_objective_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            build_instance([("x", "E", 0, 1)], [], [], ("min", [(0.5, "x")]))


class TestRestrict:
    def test_replay_matches_direct_evaluation(self, example1):
        # restricting at x1=1 drops the first block and shifts every rhs
        rest = restrict(example1, {0: 1})
        assert len(rest.blocks) == 4
        assert [c.rhs for c in rest.exist_system] == [2, 0, 2, 2]
        assert rest.objective.coeffs == ((2, 0), (-3, 1), (1, 2), (2, 3))

    def test_partial_block_rejected(self, worked_example):
        with pytest.raises(ValueError, match="whole leading blocks"):
            restrict(worked_example, {0: 1})

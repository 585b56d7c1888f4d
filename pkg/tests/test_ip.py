"""Branch-and-bound kernel, bound propagation, LP export, external adapter."""

import random
import sys
from fractions import Fraction
from itertools import product
from pathlib import Path

import pytest

from qipsolve import Budget, IpProblem, propagate_bounds, solve_ip
from qipsolve.ip import (
    CONFLICT,
    export_lp_text,
    make_external_solver,
    parse_external_solution,
    verify_witness,
)
from qipsolve.model import row


def enumerate_solutions(p: IpProblem):
    ids = [v for v, _, _ in p.vars]
    ranges = [range(lo, hi + 1) for _, lo, hi in p.vars]
    for point in product(*ranges):
        assignment = dict(zip(ids, point))
        if all(con.satisfied_by(assignment) for con in p.rows):
            yield assignment


def random_problem(seed, nvars=None, with_objective=False):
    rng = random.Random(seed)
    n = nvars if nvars is not None else rng.randint(1, 10)
    vars_ = []
    for i in range(n):
        lo = rng.randint(-2, 1)
        vars_.append((i, lo, lo + rng.randint(0, 3)))
    rows = []
    for _ in range(rng.randint(0, 6)):
        chosen = rng.sample(range(n), rng.randint(1, min(4, n)))
        terms = [(rng.choice([-3, -2, -1, 1, 2, 3]), v) for v in chosen]
        lo = sum(c * (vars_[v][2] if c < 0 else vars_[v][1]) for c, v in terms)
        hi = sum(c * (vars_[v][1] if c < 0 else vars_[v][2]) for c, v in terms)
        rows.append(row(terms, "<=", lo + rng.randint(0, max(hi - lo, 0))))
    objective = None
    if with_objective:
        objective = ("min" if rng.random() < 0.5 else "max",
                     {i: rng.randint(-3, 3) for i in range(n)})
    return IpProblem(vars=vars_, rows=rows, objective=objective)


class TestSolveIp:
    def test_worked_example_final_abstraction_infeasible(self):
        # two annotated parity copies cannot both hold: t=1 forces x1+x2 odd,
        # t'=0 forces it even
        p = IpProblem(
            vars=[(i, 0, 1) for i in range(6)],  # x1 x2 t d t' d'
            rows=[row([(1, 0), (1, 1), (1, 2), (-2, 3)], "<=", 0),
                  row([(-1, 0), (-1, 1), (-1, 2), (2, 3)], "<=", 0),
                  row([(-1, 2)], "<=", -1),
                  row([(1, 2)], "<=", 2),
                  row([(1, 0), (1, 1), (1, 4), (-2, 5)], "<=", 0),
                  row([(-1, 0), (-1, 1), (-1, 4), (2, 5)], "<=", 0),
                  row([(-1, 4)], "<=", 1),
                  row([(1, 4)], "<=", 0)])
        assert solve_ip(p).is_infeasible

    def test_unconstrained_picks_lower_bound(self):
        out = solve_ip(IpProblem(vars=[(0, 0, 1)]))
        assert out.is_feasible and out.witness == {0: 0}

    def test_contradictory_interval(self):
        p = IpProblem(vars=[(0, 0, 3)], rows=[row([(1, 0)], "<=", 2), row([(-1, 0)], "<=", -3)])
        assert solve_ip(p).is_infeasible

    def test_agreement_with_enumeration(self):
        for seed in range(120):
            p = random_problem(seed)
            solutions = list(enumerate_solutions(p))
            out = solve_ip(p)
            assert out.is_feasible == bool(solutions)
            if out.is_feasible:
                assert verify_witness(p, out.witness)

    def test_optimal_value_matches_enumeration(self):
        for seed in range(80):
            p = random_problem(seed, with_objective=True)
            solutions = list(enumerate_solutions(p))
            out = solve_ip(p)
            assert out.is_feasible == bool(solutions)
            if not solutions:
                continue
            sense, coeffs = p.objective
            values = [sum(c * s[v] for v, c in coeffs.items()) for s in solutions]
            best = min(values) if sense == "min" else max(values)
            assert out.value == best

    def test_determinism(self):
        p = random_problem(5, with_objective=True)
        first = solve_ip(p)
        for _ in range(3):
            again = solve_ip(p)
            assert again.witness == first.witness and again.value == first.value

    def test_node_budget_yields_unknown(self):
        p = random_problem(0, nvars=10)
        out = solve_ip(p, Budget(max_nodes=1))
        assert out.is_unknown

    def test_witnesses_verified_exactly(self):
        p = IpProblem(vars=[(0, -2, 2), (1, 0, 3)],
                      rows=[row([(Fraction(1, 2), 0), (2, 1)], "<=", 4)])
        out = solve_ip(p)
        assert out.is_feasible and verify_witness(p, out.witness)


class TestPropagateBounds:
    def test_activity_bound(self):
        p = IpProblem(vars=[(0, 0, 5), (1, 0, 5)], rows=[row([(1, 0), (1, 1)], "<=", 3)])
        assert propagate_bounds(p) == {0: (0, 3), 1: (0, 3)}

    def test_crossing_bounds_conflict(self):
        p = IpProblem(vars=[(0, 0, 5)], rows=[row([(1, 0)], "<=", 1), row([(-1, 0)], "<=", -2)])
        assert propagate_bounds(p) is CONFLICT

    def test_divided_bounds_match_enumeration(self):
        p = IpProblem(vars=[(0, 0, 9), (1, 0, 9)], rows=[row([(2, 0), (3, 1)], "<=", 4)])
        tight = propagate_bounds(p)
        assert tight == {0: (0, 2), 1: (0, 1)}
        feasible_x = {a[0] for a in enumerate_solutions(p)}
        feasible_y = {a[1] for a in enumerate_solutions(p)}
        assert tight[0][1] == max(feasible_x) and tight[1][1] == max(feasible_y)

    def test_never_removes_solutions(self):
        for seed in range(60):
            p = random_problem(seed, nvars=random.Random(seed).randint(1, 6))
            tight = propagate_bounds(p)
            before = sorted(tuple(sorted(s.items())) for s in enumerate_solutions(p))
            if tight is CONFLICT:
                assert before == []
                continue
            shrunk = IpProblem(vars=[(v, tight[v][0], tight[v][1]) for v, _, _ in p.vars],
                               rows=p.rows)
            after = sorted(tuple(sorted(s.items())) for s in enumerate_solutions(shrunk))
            assert before == after


class TestLpExport:
    def test_simple_row(self):
        p = IpProblem(vars=[(0, 0, 1), (1, 0, 1)], rows=[row([(1, 0), (1, 1)], "<=", 1)])
        text = export_lp_text(p)
        assert "Subject To" in text
        assert " c0: 1 x0 + 1 x1 <= 1" in text
        assert "Generals" in text and "x0 x1" in text

    def test_non_terminating_row_scaled(self):
        p = IpProblem(vars=[(0, 0, 1), (1, 0, 1)],
                      rows=[row([(Fraction(1, 3), 0), (1, 1)], "<=", 1)])
        text = export_lp_text(p)
        assert " c0: 1 x0 + 3 x1 <= 3" in text

    def test_terminating_row_kept_decimal(self):
        p = IpProblem(vars=[(0, 0, 1)], rows=[row([(Fraction(1, 2), 0)], "<=", Fraction(1, 4))])
        assert " c0: 0.5 x0 <= 0.25" in export_lp_text(p)

    def test_feasibility_placeholder_objective(self):
        p = IpProblem(vars=[(0, 0, 1)])
        text = export_lp_text(p)
        assert text.startswith("Minimize\n obj: 0 x0")


class TestParseExternalSolution:
    def test_direct_parse(self):
        p = IpProblem(vars=[(0, 0, 1), (1, 0, 1)], rows=[row([(1, 0), (1, 1)], "<=", 1)])
        out = parse_external_solution("status optimal\nx0 1\nx1 0\n", p)
        assert out.is_feasible and out.witness == {0: 1, 1: 0}

    def test_infeasible_status(self):
        out = parse_external_solution("status infeasible\n", IpProblem(vars=[(0, 0, 1)]))
        assert out.is_infeasible

    def test_fractional_value_fails_verification(self):
        p = IpProblem(vars=[(0, 0, 1)], rows=[row([(2, 0)], "<=", 1)])
        out = parse_external_solution("status optimal\nx0 0.5\n", p)
        assert out.is_unknown  # 0.5 rounds to 1, violating 2 x0 <= 1

    def test_malformed_line(self):
        out = parse_external_solution("status optimal\nx0 one two\n", IpProblem(vars=[(0, 0, 1)]))
        assert out.is_unknown


FAKE_SOLVER = '''\
import sys
from pathlib import Path
sys.path.insert(0, {src!r})
from qipsolve.ip import IpProblem, solve_ip
from qipsolve.model import row
from fractions import Fraction

lines = Path(sys.argv[1]).read_text().splitlines()
mode = i = None
vars_, rows = [], []
section = None
for line in lines:
    line = line.strip()
    if line in ("Minimize", "Maximize", "Subject To", "Bounds", "Generals", "End"):
        section = line
        continue
    if section == "Subject To":
        body, rhs = line.split("<=")
        body = body.split(":", 1)[1].replace("- ", "+ -").split("+")
        terms = []
        for part in body:
            part = part.split()
            if part:
                terms.append((Fraction(part[0]), int(part[1][1:])))
        rows.append(row(terms, "<=", Fraction(rhs)))
    elif section == "Bounds":
        lo, _, name, _, hi = line.split()
        vars_.append((int(name[1:]), int(lo), int(hi)))
out = solve_ip(IpProblem(vars=vars_, rows=rows))
with open(sys.argv[2], "w") as fh:
    if out.is_infeasible:
        fh.write("status infeasible\\n")
    else:
        fh.write("status optimal\\n")
        for v, value in sorted(out.witness.items()):
            fh.write(f"x{{v}} {{value}}\\n")
'''


class TestExternalAdapter:
    @pytest.fixture
    def fake_solver_cmd(self, tmp_path):
        src = str(Path(__file__).resolve().parents[1] / "src")
        script = tmp_path / "fake_solver.py"
        script.write_text(FAKE_SOLVER.format(src=src))
        return f"{sys.executable} {script} {{in}} {{out}}"

    def test_round_trip_feasible(self, fake_solver_cmd):
        solver = make_external_solver(fake_solver_cmd)
        p = IpProblem(vars=[(0, 0, 2), (1, 0, 2)],
                      rows=[row([(1, 0), (1, 1)], "<=", 2), row([(-1, 0)], "<=", -1)])
        out = solver(p, None)
        assert out.is_feasible and verify_witness(p, out.witness)

    def test_round_trip_infeasible(self, fake_solver_cmd):
        solver = make_external_solver(fake_solver_cmd)
        p = IpProblem(vars=[(0, 0, 1)], rows=[row([(1, 0)], "<=", -1)])
        assert solver(p, None).is_infeasible

    def test_missing_placeholders_rejected(self):
        with pytest.raises(ValueError, match="placeholders"):
            make_external_solver("solver")

    def test_broken_command_degrades_to_unknown(self):
        solver = make_external_solver(f"{sys.executable} -c pass {{in}} {{out}}")
        assert solver(IpProblem(vars=[(0, 0, 1)]), None).is_unknown

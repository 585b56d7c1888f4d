"""Core data model for quantified integer programs with polyhedral uncertainty.

A program is a list of integer variables with box bounds, arranged in an
alternating prefix of existential/universal blocks, an existential constraint
system that the existential player must satisfy, an optional universal
constraint system restricting the universal player's choices, and an optional
integer linear objective.

All constraint data is kept as exact rationals (`fractions.Fraction`); no
binary floating point enters the model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

VarId = int
Assignment = dict[VarId, int]


class Quantifier(enum.Enum):
    EXISTS = "E"
    FORALL = "A"

    def dual(self) -> "Quantifier":
        return Quantifier.FORALL if self is Quantifier.EXISTS else Quantifier.EXISTS


class Relation(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="


@dataclass(frozen=True)
class Variable:
    id: VarId
    name: str
    lower: int
    upper: int
    quantifier: Quantifier
    block: int
    annotation: str = ""

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"variable {self.name}: lower {self.lower} > upper {self.upper}")

    @property
    def domain_size(self) -> int:
        return self.upper - self.lower + 1


@dataclass(frozen=True)
class LinearConstraint:
    """A row `sum(coef * var) REL rhs` with each variable appearing at most once.

    Terms are kept sorted by variable id so structurally equal rows compare equal.
    """

    terms: tuple[tuple[Fraction, VarId], ...]
    relation: Relation
    rhs: Fraction

    def var_ids(self) -> list[VarId]:
        return [v for _, v in self.terms]

    def coefficient(self, var: VarId) -> Fraction:
        for c, v in self.terms:
            if v == var:
                return c
        return Fraction(0)

    def activity(self, assignment: Mapping[VarId, int]) -> Fraction:
        return sum((c * assignment[v] for c, v in self.terms), Fraction(0))

    def satisfied_by(self, assignment: Mapping[VarId, int]) -> bool:
        act = self.activity(assignment)
        if self.relation is Relation.LE:
            return act <= self.rhs
        if self.relation is Relation.GE:
            return act >= self.rhs
        return act == self.rhs


def row(terms: Iterable[tuple[Fraction | int | str, VarId]],
        relation: Relation | str = Relation.LE,
        rhs: Fraction | int | str = 0) -> LinearConstraint:
    """Build a constraint, normalizing term order and rejecting duplicate variables."""
    rel = Relation(relation) if not isinstance(relation, Relation) else relation
    canon: list[tuple[Fraction, VarId]] = []
    seen: set[VarId] = set()
    for c, v in terms:
        if v in seen:
            raise ValueError(f"variable id {v} appears twice in one row")
        seen.add(v)
        c = Fraction(c)
        if c != 0:
            canon.append((c, v))
    canon.sort(key=lambda t: t[1])
    return LinearConstraint(tuple(canon), rel, Fraction(rhs))


@dataclass(frozen=True)
class Objective:
    sense: str  # "min" | "max"
    coeffs: tuple[tuple[int, VarId], ...]  # integer coefficients, sorted by var id

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"bad objective sense {self.sense!r}")

    def value(self, assignment: Mapping[VarId, int]) -> int:
        return sum(c * assignment[v] for c, v in self.coeffs)

    def coefficient(self, var: VarId) -> int:
        for c, v in self.coeffs:
            if v == var:
                return c
        return 0


@dataclass(frozen=True)
class Block:
    quantifier: Quantifier
    variables: tuple[Variable, ...]

    def var_ids(self) -> list[VarId]:
        return [v.id for v in self.variables]


@dataclass(frozen=True)
class QipInstance:
    variables: tuple[Variable, ...]
    blocks: tuple[Block, ...]
    exist_system: tuple[LinearConstraint, ...]
    univ_system: tuple[LinearConstraint, ...]
    objective: Optional[Objective] = None

    def var(self, var_id: VarId) -> Variable:
        return self.variables[var_id]

    def bounds(self) -> dict[VarId, tuple[int, int]]:
        return {v.id: (v.lower, v.upper) for v in self.variables}

    def universal_ids(self) -> list[VarId]:
        return [v.id for v in self.variables if v.quantifier is Quantifier.FORALL]


def build_instance(decls: Sequence[tuple[str, Quantifier | str, int, int]],
                   subject_to: Sequence[tuple[Sequence[tuple[Fraction | int | str, str]], str, Fraction | int | str]] = (),
                   uncertainty: Sequence[tuple[Sequence[tuple[Fraction | int | str, str]], str, Fraction | int | str]] = (),
                   objective: Optional[tuple[str, Sequence[tuple[int, str]]]] = None) -> QipInstance:
    """Assemble an instance from name-based declarations in prefix order.

    `decls` lists (name, quantifier, lower, upper); consecutive declarations with
    the same quantifier are merged into one block. Constraint terms reference
    variables by name. Objective coefficients must be integers.
    """
    variables: list[Variable] = []
    ids: dict[str, VarId] = {}
    block_index = -1
    prev: Quantifier | None = None
    for name, q, lo, hi in decls:
        q = Quantifier(q) if not isinstance(q, Quantifier) else q
        if name in ids:
            raise ValueError(f"duplicate variable {name!r}")
        if q is not prev:
            block_index += 1
            prev = q
        vid = len(variables)
        ids[name] = vid
        variables.append(Variable(vid, name, int(lo), int(hi), q, block_index))

    def build_rows(spec) -> tuple[LinearConstraint, ...]:
        rows = []
        for terms, rel, rhs in spec:
            rows.append(row([(c, ids[nm]) for c, nm in terms], rel, rhs))
        return tuple(rows)

    exist_rows = build_rows(subject_to)
    univ_rows = build_rows(uncertainty)

    obj = None
    if objective is not None:
        sense, coeffs = objective
        canon = []
        for c, nm in coeffs:
            if int(c) != c:
                raise ValueError(f"objective coefficient {c} is not an integer")
            if int(c) != 0:
                canon.append((int(c), ids[nm]))
        canon.sort(key=lambda t: t[1])
        obj = Objective(sense.lower(), tuple(canon))

    blocks: list[Block] = []
    for v in variables:
        if v.block == len(blocks):
            blocks.append(Block(v.quantifier, (v,)))
        else:
            blk = blocks[v.block]
            blocks[v.block] = Block(blk.quantifier, blk.variables + (v,))

    return QipInstance(tuple(variables), tuple(blocks), exist_rows, univ_rows, obj)


# ---------------------------------------------------------------------------
# Validation

@dataclass
class ValidationIssue:
    kind: str  # "bounds" | "universal-touches-existential" | "empty-uncertainty-set" | "uncertainty-unknown"
    message: str


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def validate_instance(inst: QipInstance, budget=None) -> ValidationReport:
    """Check admissibility: consistent bounds, universal rows touching only
    universal variables, and a nonempty uncertainty set (one IP feasibility
    call over the universal boxes)."""
    report = ValidationReport()
    for v in inst.variables:
        if v.lower > v.upper:  # unreachable through Variable, kept for parsed raw data
            report.issues.append(ValidationIssue("bounds", f"{v.name}: [{v.lower}, {v.upper}] empty"))
    exist_ids = {v.id for v in inst.variables if v.quantifier is Quantifier.EXISTS}
    for i, con in enumerate(inst.univ_system):
        bad = [inst.var(v).name for _, v in con.terms if v in exist_ids]
        if bad:
            report.issues.append(ValidationIssue(
                "universal-touches-existential",
                f"uncertainty row {i} has nonzero coefficient on existential {', '.join(bad)}"))
    if inst.univ_system and not any(i.kind == "universal-touches-existential" for i in report.issues):
        from .ip import IpProblem, solve_ip  # deferred: ip depends on model

        univ = [v for v in inst.variables if v.quantifier is Quantifier.FORALL]
        problem = IpProblem(vars=[(v.id, v.lower, v.upper) for v in univ],
                            rows=[r for con in inst.univ_system for r in normalize_row(con)])
        out = solve_ip(problem, budget)
        if out.is_infeasible:
            report.issues.append(ValidationIssue("empty-uncertainty-set", "no universal play satisfies the uncertainty rows"))
        elif out.is_unknown:
            report.issues.append(ValidationIssue("uncertainty-unknown", "could not decide uncertainty-set feasibility within budget"))
    return report


# ---------------------------------------------------------------------------
# Normalization and instantiation

def normalize_row(con: LinearConstraint) -> list[LinearConstraint]:
    """Rewrite one row into equivalent LE rows (GE flips sign, EQ splits)."""
    if con.relation is Relation.LE:
        return [con]
    neg = LinearConstraint(tuple((-c, v) for c, v in con.terms), Relation.LE, -con.rhs)
    if con.relation is Relation.GE:
        return [neg]
    le = LinearConstraint(con.terms, Relation.LE, con.rhs)
    return [le, neg]


def normalize(inst: QipInstance) -> QipInstance:
    """Return an instance whose constraint systems contain only LE rows."""
    exist = tuple(r for con in inst.exist_system for r in normalize_row(con))
    univ = tuple(r for con in inst.univ_system for r in normalize_row(con))
    return replace(inst, exist_system=exist, univ_system=univ)


def instantiate_row(con: LinearConstraint, a: Mapping[VarId, int]) -> LinearConstraint:
    """Fix the assigned variables of one row, folding them into the rhs.

    A fully assigned row is kept as the numeric fact `0 REL rhs'` so that a
    violated instantiation stays detectable.
    """
    kept = tuple((c, v) for c, v in con.terms if v not in a)
    if len(kept) == len(con.terms):
        return con
    shift = sum((c * a[v] for c, v in con.terms if v in a), Fraction(0))
    return LinearConstraint(kept, con.relation, con.rhs - shift)


def instantiate(system: Sequence[LinearConstraint], a: Mapping[VarId, int]) -> list[LinearConstraint]:
    return [instantiate_row(con, a) for con in system]


def rename_row(con: LinearConstraint, mapping: Mapping[VarId, VarId]) -> LinearConstraint:
    """Substitute variable ids; terms are re-sorted to stay canonical."""
    terms = sorted(((c, mapping.get(v, v)) for c, v in con.terms), key=lambda t: t[1])
    return LinearConstraint(tuple(terms), con.relation, con.rhs)


def restrict(inst: QipInstance, a: Assignment) -> QipInstance:
    """Drop fully assigned leading blocks and fold the assignment into both
    systems and the objective. Used to replay a move against the remainder."""
    assigned = set(a)
    blocks = list(inst.blocks)
    while blocks and all(v.id in assigned for v in blocks[0].variables):
        blocks = blocks[1:]
    keep = [v for blk in blocks for v in blk.variables]
    if any(v.id in assigned for v in keep):
        raise ValueError("assignment must cover whole leading blocks")
    remap = {v.id: i for i, v in enumerate(keep)}
    new_vars = []
    new_blocks = []
    for bi, blk in enumerate(blocks):
        vs = tuple(Variable(remap[v.id], v.name, v.lower, v.upper, v.quantifier, bi, v.annotation)
                   for v in blk.variables)
        new_vars.extend(vs)
        new_blocks.append(Block(blk.quantifier, vs))
    exist = tuple(rename_row(instantiate_row(c, a), remap) for c in inst.exist_system)
    univ = tuple(rename_row(instantiate_row(c, a), remap) for c in inst.univ_system)
    obj = None
    if inst.objective is not None:
        coeffs = tuple((c, remap[v]) for c, v in inst.objective.coeffs if v not in assigned)
        obj = Objective(inst.objective.sense, coeffs)
    return QipInstance(tuple(new_vars), tuple(new_blocks), exist, univ, obj)


def objective_bounds(inst: QipInstance) -> tuple[int, int]:
    """Box bounds on the objective value, ignoring both constraint systems."""
    if inst.objective is None:
        raise ValueError("instance has no objective")
    lb = 0
    ub = 0
    for c, vid in inst.objective.coeffs:
        v = inst.var(vid)
        if c < 0:
            lb += c * v.upper
            ub += c * v.lower
        else:
            lb += c * v.lower
            ub += c * v.upper
    return lb, ub

"""Single-move decision for quantifier-free multi-games.

A multi-game hands one block of variables to a player together with a list of
quantifier-free constraint systems (subgames). The existential player needs a
point satisfying every system: one integer program over the conjunction. The
universal player needs a point, inside the uncertainty set, violating at least
one row of every system. There is no "negated constraint system" in integer
programming, so violation is certified with indicator variables:

    -A_j x - (L_j - b_j - r_j) y_j <= -L_j          (one row per system row)
    v_l <= sum_j y_j^l                               (system l violated)
    v <= v_l,  v >= 1                                (all systems violated)

where L_j never exceeds the minimum activity of row j over the original boxes
and r_j is a positive lower bound on how far an integer point can overshoot
the rhs. Setting y_j = 1 is then feasible exactly when row j is violated by
at least r_j, and y_j = 0 imposes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .ip import Budget, IpProblem, IpSolver, solve_ip
from .model import (
    Assignment,
    LinearConstraint,
    Quantifier,
    Relation,
    VarId,
    Variable,
    instantiate_row,
    rename_row,
)


@dataclass(frozen=True)
class RowMeta:
    """Per-original-row constants that survive instantiation and copying.

    `gap` is rhs - L of the pristine row. Instantiating variables shifts the
    activity floor and the rhs by the same amount, so `rhs' - gap` is a valid
    lower bound L' for any derived version of the row; the gadget row above
    only ever needs `gap` and `r`.
    """
    gap: Fraction
    r: Fraction


@dataclass(frozen=True)
class TaggedRow:
    """An LE row plus the index of the pristine row it descends from."""
    con: LinearConstraint
    origin: int

    def instantiated(self, a: Assignment) -> "TaggedRow":
        return TaggedRow(instantiate_row(self.con, a), self.origin)

    def renamed(self, mapping: dict[VarId, VarId]) -> "TaggedRow":
        return TaggedRow(rename_row(self.con, mapping), self.origin)


@dataclass(frozen=True)
class UnivGroup:
    """Uncertainty rows scoping one universal block (original or annotated copy).

    `aux` holds fresh box-bounded stand-ins for universal variables of later
    blocks, so the rows express "some legal completion exists". Auxiliaries
    never appear in returned moves.
    """
    rows: tuple[LinearConstraint, ...]
    aux: tuple[Variable, ...]


def row_lower_bound(con: LinearConstraint, boxes: dict[VarId, tuple[int, int]]) -> Fraction:
    """Minimum possible activity of an LE row over the given boxes."""
    total = Fraction(0)
    for c, v in con.terms:
        lo, hi = boxes[v]
        total += c * (hi if c < 0 else lo)
    return total


def _decimal_digits(q: Fraction) -> Optional[int]:
    """Number of digits after the point in q's terminating decimal form, or
    None when the form does not terminate."""
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    return None if den != 1 else max(twos, fives)


def min_violation_lcd(con: LinearConstraint) -> Fraction:
    """1 / lcm of the denominators of the row's coefficients and rhs."""
    lcd = con.rhs.denominator
    for c, _ in con.terms:
        lcd = lcd * c.denominator // math.gcd(lcd, c.denominator)
    return Fraction(1, lcd)


def min_violation(con: LinearConstraint) -> Fraction:
    """Positive bound below any integer point's overshoot of the rhs.

    Implemented rule: 10^-p with p the largest decimal-digit count among the
    row's data; rows with non-terminating data fall back to 1/lcd. All-integer
    rows yield 1.
    """
    digits = 0
    for q in [con.rhs] + [c for c, _ in con.terms]:
        d = _decimal_digits(q)
        if d is None:
            return min_violation_lcd(con)
        digits = max(digits, d)
    return Fraction(1, 10 ** digits)


def build_row_meta(rows: Sequence[LinearConstraint], boxes: dict[VarId, tuple[int, int]],
                   r_rule=min_violation) -> list[RowMeta]:
    """Compute (gap, r) once per pristine row at solver start."""
    meta = []
    for con in rows:
        lower = row_lower_bound(con, boxes)
        meta.append(RowMeta(gap=con.rhs - lower, r=r_rule(con)))
    return meta


def build_exists_ip(outer: Sequence[Variable], subgames: Sequence[Sequence[TaggedRow]]) -> IpProblem:
    """Conjunction of every subgame's rows over the block's boxes."""
    outer_ids = {v.id for v in outer}
    rows = []
    for system in subgames:
        for tr in system:
            for _, v in tr.con.terms:
                if v not in outer_ids:
                    raise ValueError(f"quantifier-free subgame row references non-block variable {v}")
            rows.append(tr.con)
    return IpProblem(vars=[(v.id, v.lower, v.upper) for v in outer], rows=rows)


def build_forall_ip(outer: Sequence[Variable], subgames: Sequence[Sequence[TaggedRow]],
                    univ_groups: Sequence[UnivGroup], meta: Sequence[RowMeta]) -> IpProblem:
    """Violation-indicator program: feasible iff some point of the block's
    boxes lies in the uncertainty set and violates every subgame."""
    variables: list[tuple[VarId, int, int]] = [(v.id, v.lower, v.upper) for v in outer]
    for group in univ_groups:
        variables.extend((v.id, v.lower, v.upper) for v in group.aux)
    next_id = max((vid for vid, _, _ in variables), default=-1) + 1

    rows: list[LinearConstraint] = []
    v_ids: list[VarId] = []
    for system in subgames:
        y_ids = []
        for tr in system:
            m = meta[tr.origin]
            lower = tr.con.rhs - m.gap  # valid L for this derived row
            y = next_id
            next_id += 1
            y_ids.append(y)
            variables.append((y, 0, 1))
            terms = [(-c, v) for c, v in tr.con.terms] + [(m.gap + m.r, y)]
            rows.append(LinearConstraint(tuple(sorted(terms, key=lambda t: t[1])), Relation.LE, -lower))
        vl = next_id
        next_id += 1
        v_ids.append(vl)
        variables.append((vl, 0, 1))
        # v_l <= sum_j y_j
        terms = [(Fraction(1), vl)] + [(Fraction(-1), y) for y in y_ids]
        rows.append(LinearConstraint(tuple(sorted(terms, key=lambda t: t[1])), Relation.LE, Fraction(0)))
    v = next_id
    variables.append((v, 0, 1))
    for vl in v_ids:
        rows.append(LinearConstraint(((Fraction(-1), vl), (Fraction(1), v)), Relation.LE, Fraction(0)))
    rows.append(LinearConstraint(((Fraction(-1), v),), Relation.LE, Fraction(-1)))
    for group in univ_groups:
        rows.extend(group.rows)
    return IpProblem(vars=variables, rows=rows)


def wins(quantifier: Quantifier, outer: Sequence[Variable],
         subgames: Sequence[Sequence[TaggedRow]], univ_groups: Sequence[UnivGroup],
         meta: Sequence[RowMeta], ip_solver: IpSolver = solve_ip,
         budget: Optional[Budget] = None):
    """Decide a quantifier-free multi-game with one oracle call.

    Returns the winning block assignment, None when no winning move exists,
    or the unknown outcome when the oracle gave up.
    """
    if quantifier is Quantifier.EXISTS:
        problem = build_exists_ip(outer, subgames)
    else:
        problem = build_forall_ip(outer, subgames, univ_groups, meta)
    out = ip_solver(problem, budget)
    if out.is_unknown:
        return out
    if out.is_infeasible:
        return None
    return {v.id: out.witness[v.id] for v in outer}

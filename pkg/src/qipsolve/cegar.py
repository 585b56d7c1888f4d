"""Counterexample-guided solving of quantified integer programs by expansion.

The engine works on multi-games: one outer block handed to a player plus a
list of subgames that share only that block's variables. Solving starts from
an empty abstraction of the multi-game and alternates between

  * finding a move that wins the current abstraction (recursively),
  * searching the subgames for a countermove that beats it, and
  * refining the abstraction with the subgame instantiated at the countermove,
    minting fresh annotated copies of the deeper variables.

When the abstraction itself has no winning move, the original multi-game has
none either. When no countermove exists, the abstraction's move wins outright.
Quantifier-free multi-games are decided by a single integer program (the
`wins` module).
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .ip import Budget, IpOutcome, IpSolver, solve_ip
from .model import (
    Assignment,
    Block,
    LinearConstraint,
    QipInstance,
    Quantifier,
    VarId,
    Variable,
    instantiate_row,
    normalize,
    rename_row,
)
from .wins import RowMeta, TaggedRow, UnivGroup, build_row_meta, min_violation, wins


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


@dataclass
class SolveStats:
    """Counters exposed on the CLI. `refinements` counts refinements of the
    root multi-game; `refinements_total` includes every recursion level."""

    ip_calls: int = 0
    refinements: int = 0
    refinements_total: int = 0
    max_depth: int = 0
    wall_ms: int = 0
    outcome: str = ""
    iterations_by_depth: dict[int, int] = field(default_factory=lambda: defaultdict(int))
    first_moves: list[Assignment] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "ip_calls": self.ip_calls,
            "refinements": self.refinements,
            "refinements_total": self.refinements_total,
            "max_depth": self.max_depth,
            "wall_ms": self.wall_ms,
            "iterations_by_depth": ";".join(
                f"{d}:{n}" for d, n in sorted(self.iterations_by_depth.items())),
        }


@dataclass
class Subgame:
    """Remaining quantifier prefix plus the rows instantiated so far.

    `rows` are existential rows over the enclosing multi-game's outer
    variables and this subgame's private (annotated) variables. `univ_rows`
    keep the not-yet-folded uncertainty rows for the universal blocks still in
    the prefix. `fixed` records every assignment folded along the lineage.
    """

    prefix: list[Block]
    rows: list[TaggedRow]
    univ_rows: list[LinearConstraint]
    fixed: Assignment = field(default_factory=dict)
    lineage: str = ""

    @property
    def quantifier_free(self) -> bool:
        return not self.prefix


@dataclass
class MultiGame:
    quantifier: Quantifier
    outer: list[Variable]
    univ_groups: list[UnivGroup]
    subgames: list[Subgame]


def extract(full: Assignment, outer: Sequence[Variable]) -> Assignment:
    """Restrict a witness to the block of interest, dropping annotated copies,
    gadget indicators, and extension auxiliaries."""
    return {v.id: full[v.id] for v in outer}


def _extension_rows(rows: Sequence[LinearConstraint], keep: set[VarId],
                    lookup: dict[VarId, Variable], alloc) -> UnivGroup:
    """Replace later-block universal variables with fresh box-bounded
    auxiliaries, turning the rows into a "legal completion exists" check."""
    mapping: dict[VarId, VarId] = {}
    aux: list[Variable] = []
    for con in rows:
        for _, vid in con.terms:
            if vid not in keep and vid not in mapping:
                src = lookup[vid]
                fresh = alloc()
                var = Variable(fresh, f"{src.name}~ext{fresh}", src.lower, src.upper,
                               src.quantifier, src.block, annotation="extension-aux")
                lookup[fresh] = var
                mapping[vid] = fresh
                aux.append(var)
    return UnivGroup(tuple(rename_row(con, mapping) for con in rows), tuple(aux))


def universal_domain_constraints(inst: QipInstance, prefix: Assignment,
                                 block_index: int) -> tuple[list[LinearConstraint], list[Variable]]:
    """Rows pinning a universal block's legal moves given earlier universal
    assignments, plus auxiliary variables standing for the universal variables
    of later blocks (their values realize "some legal completion exists" and
    are never part of a returned move)."""
    inst = normalize(inst)
    block = inst.blocks[block_index]
    if block.quantifier is not Quantifier.FORALL:
        raise ValueError("not a universal block")
    rows = [instantiate_row(con, prefix) for con in inst.univ_system]
    lookup = {v.id: v for v in inst.variables}
    counter = [len(inst.variables)]

    def alloc() -> int:
        counter[0] += 1
        return counter[0] - 1

    group = _extension_rows(rows, set(block.var_ids()), lookup, alloc)
    return list(group.rows), list(group.aux)


class Engine:
    """One solver run over one instance. Immutable input; per-run state is the
    fresh-id counter, the variable table, and the stats sink.

    Instances are assumed admissible (see `validate_instance`); in particular
    the uncertainty set must be nonempty, which is what makes refuting the
    quantifier-free relaxation a sound refutation of the whole instance."""

    def __init__(self, inst: QipInstance, *, ip_solver: IpSolver = solve_ip,
                 budget: Optional[Budget] = None, first_move: str = "relax",
                 stats: Optional[SolveStats] = None, r_rule=min_violation):
        if first_move not in ("relax", "bounds"):
            raise ValueError(f"unknown first-move policy {first_move!r}")
        self.inst = normalize(inst)
        self.ip_solver = ip_solver
        self.budget = budget
        self.first_move = first_move
        self.stats = stats if stats is not None else SolveStats()
        self.vars: dict[VarId, Variable] = {v.id: v for v in self.inst.variables}
        self._next_id = max(self.vars, default=-1) + 1
        boxes = {v.id: (v.lower, v.upper) for v in self.inst.variables}
        self.meta: list[RowMeta] = build_row_meta(self.inst.exist_system, boxes, r_rule)
        self.exist_rows = [TaggedRow(con, i) for i, con in enumerate(self.inst.exist_system)]

    # -- plumbing -----------------------------------------------------------

    def _fresh_id(self) -> VarId:
        vid = self._next_id
        self._next_id += 1
        return vid

    def _ip(self, problem, budget) -> IpOutcome:
        self.stats.ip_calls += 1
        return self.ip_solver(problem, budget)

    def _expired(self) -> bool:
        return self.budget is not None and self.budget.expired()

    # -- multi-game construction --------------------------------------------

    def root_multigame(self) -> MultiGame:
        blocks = self.inst.blocks
        outer = blocks[0]
        sub = Subgame(prefix=list(blocks[1:]), rows=list(self.exist_rows),
                      univ_rows=list(self.inst.univ_system))
        groups = []
        if outer.quantifier is Quantifier.FORALL and sub.univ_rows:
            groups = [_extension_rows(sub.univ_rows, set(outer.var_ids()), self.vars, self._fresh_id)]
        return MultiGame(outer.quantifier, list(outer.variables), groups, [sub])

    def _countermove_game(self, sub: Subgame, tau: Assignment) -> MultiGame:
        first = sub.prefix[0]
        rows = [tr.instantiated(tau) for tr in sub.rows]
        univ = [instantiate_row(con, tau) for con in sub.univ_rows]
        inner = Subgame(prefix=sub.prefix[1:], rows=rows, univ_rows=univ,
                        fixed={**sub.fixed, **tau}, lineage=sub.lineage)
        groups = []
        if first.quantifier is Quantifier.FORALL and univ:
            groups = [_extension_rows(univ, set(first.var_ids()), self.vars, self._fresh_id)]
        return MultiGame(first.quantifier, list(first.variables), groups, [inner])

    def _refine(self, alpha: MultiGame, sub: Subgame, mu: Assignment, tag: str) -> None:
        """Append the subgame instantiated at the countermove; deeper variables
        become fresh annotated copies, and copies of the countered block's
        successor join the abstraction's outer block."""
        rows = [tr.instantiated(mu) for tr in sub.rows]
        univ = [instantiate_row(con, mu) for con in sub.univ_rows]
        fixed = {**sub.fixed, **mu}
        if len(sub.prefix) == 1:
            alpha.subgames.append(Subgame([], rows, univ, fixed, lineage=tag))
            return
        mapping: dict[VarId, VarId] = {}

        def copy_var(v: Variable) -> Variable:
            fresh = self._fresh_id()
            var = Variable(fresh, f"{v.name}{tag}", v.lower, v.upper, v.quantifier,
                           v.block, annotation=f"{v.name}@{tag}")
            self.vars[fresh] = var
            mapping[v.id] = fresh
            return var

        z_copies = [copy_var(v) for v in sub.prefix[1].variables]
        rest = [Block(blk.quantifier, tuple(copy_var(v) for v in blk.variables))
                for blk in sub.prefix[2:]]
        new = Subgame(prefix=rest,
                      rows=[tr.renamed(mapping) for tr in rows],
                      univ_rows=[rename_row(con, mapping) for con in univ],
                      fixed=fixed, lineage=tag)
        alpha.outer.extend(z_copies)
        if sub.prefix[1].quantifier is Quantifier.FORALL and new.univ_rows:
            keep = {v.id for v in alpha.outer}
            alpha.univ_groups.append(_extension_rows(new.univ_rows, keep, self.vars, self._fresh_id))
        alpha.subgames.append(new)

    # -- solving -------------------------------------------------------------

    def solve(self):
        """Winning move of the first block's player, None when that player has
        no winning move, or Unknown on budget exhaustion."""
        return self.solve_multigame(self.root_multigame(), 0, is_root=True)

    def _wins(self, g: MultiGame):
        res = wins(g.quantifier, g.outer, [s.rows for s in g.subgames],
                   g.univ_groups, self.meta, self._ip, self.budget)
        if isinstance(res, IpOutcome):
            return Unknown(res.reason)
        return res

    def _relax_first_move(self):
        """Solve the existential system over all boxes, ignoring quantifiers,
        to seed the first abstraction move. Infeasibility here already refutes
        the instance: no play at all can satisfy the rows."""
        from .ip import IpProblem

        problem = IpProblem(vars=[(v.id, v.lower, v.upper) for v in self.inst.variables],
                            rows=[tr.con for tr in self.exist_rows])
        out = self._ip(problem, self.budget)
        if out.is_unknown:
            return Unknown(out.reason)
        if out.is_infeasible:
            return None
        return dict(out.witness)

    def solve_multigame(self, g: MultiGame, depth: int, is_root: bool = False):
        self.stats.max_depth = max(self.stats.max_depth, depth)
        if all(s.quantifier_free for s in g.subgames):
            return self._wins(g)
        if not all(s.prefix for s in g.subgames):
            raise RuntimeError("multi-game mixes quantifier-free and quantified subgames")
        for s in g.subgames:
            if s.prefix[0].quantifier is not g.quantifier.dual():
                raise RuntimeError("subgame does not start with the dual quantifier")

        alpha = MultiGame(g.quantifier, list(g.outer), list(g.univ_groups), [])
        used: set[tuple[int, tuple]] = set()
        refine_cap = sum(_box_size(s.prefix[0]) for s in g.subgames)
        while True:
            if self._expired():
                return Unknown("time limit")
            self.stats.iterations_by_depth[depth] += 1
            if not alpha.subgames and is_root and g.quantifier is Quantifier.EXISTS \
                    and self.first_move == "relax":
                full = self._relax_first_move()
                if full is None or isinstance(full, Unknown):
                    return full
            else:
                full = self.solve_multigame(alpha, depth)
                if full is None or isinstance(full, Unknown):
                    return full
            tau = extract(full, g.outer)
            if is_root:
                self.stats.first_moves.append(extract(full, self.inst.blocks[0].variables))

            counter = None
            for idx, sub in enumerate(g.subgames):
                res = self.solve_multigame(self._countermove_game(sub, tau), depth + 1)
                if isinstance(res, Unknown):
                    return res
                if res is not None:
                    counter = (idx, sub, res)
                    break
            if counter is None:
                return tau

            idx, sub, mu = counter
            key = (idx, tuple(sorted(mu.items())))
            if key in used or len(used) >= refine_cap:
                raise RuntimeError("refinement did not progress; countermove repeated")
            used.add(key)
            tag = "#" + str(len(used)) + "g" + str(idx)
            self._refine(alpha, sub, mu, tag)
            self.stats.refinements_total += 1
            if is_root:
                self.stats.refinements += 1


def _box_size(block: Block) -> int:
    size = 1
    for v in block.variables:
        size *= v.domain_size
    return size


def solve_qip(inst: QipInstance, *, ip_solver: IpSolver = solve_ip,
              budget: Optional[Budget] = None, first_move: str = "relax",
              stats: Optional[SolveStats] = None):
    """Decide an instance from the existential player's perspective.

    Returns (outcome, move, stats) with outcome one of "feasible",
    "infeasible", "unknown"; `move` is the winning first move of whichever
    player wins (None when the first block's player loses).
    """
    stats = stats if stats is not None else SolveStats()
    start = time.monotonic()
    engine = Engine(inst, ip_solver=ip_solver, budget=budget,
                    first_move=first_move, stats=stats)
    result = engine.solve()
    stats.wall_ms = int((time.monotonic() - start) * 1000)
    exists_first = inst.blocks[0].quantifier is Quantifier.EXISTS
    if isinstance(result, Unknown):
        stats.outcome = "unknown"
        return "unknown", None, stats
    if result is None:
        stats.outcome = "feasible" if not exists_first else "infeasible"
        return stats.outcome, None, stats
    stats.outcome = "feasible" if exists_first else "infeasible"
    return stats.outcome, result, stats

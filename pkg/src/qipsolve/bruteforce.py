"""Exhaustive game-tree reference oracle.

The correctness anchor for everything else: feasibility and the optimal
worst-case value are computed by enumerating plays block by block, with the
universal player restricted to moves that admit a legal completion of the
uncertainty rows (found by enumerating the later universal variables). Rows
are pre-scaled to integers so all arithmetic is exact.

The innermost block is evaluated as one vectorized sweep over its box instead
of a Python-level loop; this is still plain enumeration of every candidate,
kept deliberately free of memoization or game-tree pruning heuristics, but it
is what makes desk-scale reference runs finish in seconds. Partial plays that
already violate a fully assigned existential row are discarded early (no
completion can repair them), which is the only shortcut taken above the leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product
from typing import Optional

import numpy as np

from .model import Objective, QipInstance, Quantifier, normalize

DEFAULT_GUARD = 100_000_000
_CHUNK = 1 << 16


class GuardExceeded(ValueError):
    """Instance box too large for exhaustive enumeration."""


@dataclass
class OracleReport:
    """Side observations; `empty_domain_nodes` counts universal nodes whose
    restricted domain was empty (won vacuously by the existential player)."""

    empty_domain_nodes: int = 0


@dataclass(frozen=True)
class _IntRow:
    ids: tuple[int, ...]
    coeffs: tuple[int, ...]
    rhs: int
    last_block: int


def _scale_rows(rows, blocks_of_var) -> list[_IntRow]:
    out = []
    for con in rows:
        lcd = con.rhs.denominator
        for c, _ in con.terms:
            lcd = lcd * c.denominator // math.gcd(lcd, c.denominator)
        ids = tuple(v for _, v in con.terms)
        coeffs = tuple(int(c * lcd) for c, _ in con.terms)
        last = max((blocks_of_var[v] for v in ids), default=-1)
        out.append(_IntRow(ids, coeffs, int(con.rhs * lcd), last))
    return out


class _Enumerator:
    def __init__(self, inst: QipInstance, max_leaves: int, report: OracleReport):
        inst = normalize(inst)
        for i, v in enumerate(inst.variables):
            if v.id != i:
                raise ValueError("oracle expects dense variable ids in prefix order")
        total = 1
        for v in inst.variables:
            total *= v.domain_size
        if total > max_leaves:
            raise GuardExceeded(f"box has {total} plays, above the enumeration guard {max_leaves}")
        self.inst = inst
        self.report = report
        self.blocks = inst.blocks
        self.leaf = len(inst.blocks) - 1
        block_of = {v.id: v.block for v in inst.variables}
        self.exist_rows = _scale_rows(inst.exist_system, block_of)
        self.univ_rows = _scale_rows(inst.univ_system, block_of)
        self.assign = [0] * len(inst.variables)
        self.exist_at = [[r for r in self.exist_rows if r.last_block == b]
                         for b in range(len(self.blocks))]
        self.univ_later = []  # per block: universal variables of strictly later blocks
        for b in range(len(self.blocks)):
            self.univ_later.append([v for v in inst.variables
                                    if v.block > b and v.quantifier is Quantifier.FORALL])
        self._prepare_leaf()
        bad_facts = [r for r in self.exist_rows if r.last_block == -1 and 0 > r.rhs]
        self.dead_on_arrival = bool(bad_facts)

    # -- leaf block, evaluated as a vectorized sweep --------------------------

    def _prepare_leaf(self):
        leaf_vars = list(self.blocks[self.leaf].variables)
        self.leaf_ids = [v.id for v in leaf_vars]
        sizes = [v.domain_size for v in leaf_vars]
        self.leaf_count = 1
        for s in sizes:
            self.leaf_count *= s
        strides = []
        acc = self.leaf_count
        for s in sizes:
            acc //= s
            strides.append(acc)
        self.leaf_strides = strides
        self.leaf_sizes = sizes
        self.leaf_lowers = [v.lower for v in leaf_vars]
        col_of = {vid: i for i, vid in enumerate(self.leaf_ids)}

        def split(rows):
            out = []
            for r in rows:
                if r.last_block != self.leaf:
                    continue
                leaf_part = np.zeros(len(leaf_vars), dtype=np.int64)
                prefix = []
                for vid, c in zip(r.ids, r.coeffs):
                    if vid in col_of:
                        leaf_part[col_of[vid]] += c
                    else:
                        prefix.append((vid, c))
                out.append((leaf_part, prefix, r.rhs))
            return out

        self.leaf_exist = split(self.exist_rows)
        self.leaf_univ = split(self.univ_rows)
        self.obj_leaf = None
        self.obj_prefix = []
        if self.inst.objective is not None:
            self.obj_leaf = np.zeros(len(leaf_vars), dtype=np.int64)
            for c, vid in self.inst.objective.coeffs:
                if vid in col_of:
                    self.obj_leaf[col_of[vid]] += c
                else:
                    self.obj_prefix.append((vid, c))
        # Cache per-candidate leaf activities when the matrices stay small.
        self._cache = None
        if self.leaf_count <= _CHUNK:
            cands = self._candidates(0, self.leaf_count)
            self._cache = (cands, self._leaf_activities(cands))

    def _candidates(self, start: int, stop: int) -> np.ndarray:
        idx = np.arange(start, stop, dtype=np.int64)
        cols = []
        for lo, size, stride in zip(self.leaf_lowers, self.leaf_sizes, self.leaf_strides):
            cols.append(lo + (idx // stride) % size)
        return np.stack(cols, axis=1)

    def _leaf_activities(self, cands: np.ndarray):
        exist = np.stack([cands @ part for part, _, _ in self.leaf_exist], axis=1) \
            if self.leaf_exist else np.zeros((len(cands), 0), dtype=np.int64)
        univ = np.stack([cands @ part for part, _, _ in self.leaf_univ], axis=1) \
            if self.leaf_univ else np.zeros((len(cands), 0), dtype=np.int64)
        obj = cands @ self.obj_leaf if self.obj_leaf is not None else None
        return exist, univ, obj

    def _leaf_rhs(self, rows) -> np.ndarray:
        out = np.empty(len(rows), dtype=np.int64)
        for i, (_, prefix, rhs) in enumerate(rows):
            out[i] = rhs - sum(c * self.assign[vid] for vid, c in prefix)
        return out

    def _leaf_chunks(self):
        if self._cache is not None:
            yield self._cache
            return
        for start in range(0, self.leaf_count, _CHUNK):
            cands = self._candidates(start, min(start + _CHUNK, self.leaf_count))
            yield cands, self._leaf_activities(cands)

    def _leaf_feasible(self) -> bool:
        quant = self.blocks[self.leaf].quantifier
        exist_rhs = self._leaf_rhs(self.leaf_exist)
        univ_rhs = self._leaf_rhs(self.leaf_univ)
        if quant is Quantifier.EXISTS:
            for _, (exist, _, _) in self._leaf_chunks():
                if bool(np.any(np.all(exist <= exist_rhs, axis=1))):
                    return True
            return False
        saw_legal = False
        for _, (exist, univ, _) in self._leaf_chunks():
            legal = np.all(univ <= univ_rhs, axis=1)
            if not bool(np.any(legal)):
                continue
            saw_legal = True
            sat = np.all(exist <= exist_rhs, axis=1)
            if bool(np.any(legal & ~sat)):
                return False
        if not saw_legal:
            self.report.empty_domain_nodes += 1
        return True

    def _leaf_value(self):
        """Minimization-normalized value of the leaf node, None when lost for
        the existential player, -inf on a vacuous universal node."""
        quant = self.blocks[self.leaf].quantifier
        exist_rhs = self._leaf_rhs(self.leaf_exist)
        univ_rhs = self._leaf_rhs(self.leaf_univ)
        offset = sum(c * self.assign[vid] for vid, c in self.obj_prefix)
        best = None
        saw_legal = False
        for _, (exist, univ, obj) in self._leaf_chunks():
            sat = np.all(exist <= exist_rhs, axis=1)
            if quant is Quantifier.EXISTS:
                if bool(np.any(sat)):
                    v = int(np.min(obj[sat]))
                    best = v if best is None else min(best, v)
            else:
                legal = np.all(univ <= univ_rhs, axis=1)
                if not bool(np.any(legal)):
                    continue
                saw_legal = True
                if bool(np.any(legal & ~sat)):
                    return None
                v = int(np.max(obj[legal]))
                best = v if best is None else max(best, v)
        if quant is Quantifier.FORALL and not saw_legal:
            self.report.empty_domain_nodes += 1
            return -math.inf
        return None if best is None else best + offset

    # -- upper blocks, enumerated one candidate at a time ----------------------

    def _violated_completed(self, b: int) -> bool:
        for r in self.exist_at[b]:
            if sum(c * self.assign[v] for v, c in zip(r.ids, r.coeffs)) > r.rhs:
                return True
        return False

    def _legal_universal(self, b: int) -> bool:
        """Does the current universal block assignment admit a completion of
        the later universal variables satisfying every uncertainty row?"""
        if not self.univ_rows:
            return True
        later = self.univ_later[b]
        for ext in product(*(range(v.lower, v.upper + 1) for v in later)):
            for v, value in zip(later, ext):
                self.assign[v.id] = value
            if all(sum(c * self.assign[v] for v, c in zip(r.ids, r.coeffs)) <= r.rhs
                   for r in self.univ_rows):
                return True
        return False

    def _block_points(self, b: int):
        return product(*(range(v.lower, v.upper + 1)
                         for v in self.blocks[b].variables))

    def feasible(self, b: int = 0) -> bool:
        if self.dead_on_arrival:
            return False
        if b == self.leaf:
            return self._leaf_feasible()
        ids = [v.id for v in self.blocks[b].variables]
        if self.blocks[b].quantifier is Quantifier.EXISTS:
            for point in self._block_points(b):
                for vid, val in zip(ids, point):
                    self.assign[vid] = val
                if self._violated_completed(b):
                    continue
                if self.feasible(b + 1):
                    return True
            return False
        saw_legal = False
        for point in self._block_points(b):
            for vid, val in zip(ids, point):
                self.assign[vid] = val
            if not self._legal_universal(b):
                continue
            saw_legal = True
            if self._violated_completed(b) or not self.feasible(b + 1):
                return False
        if not saw_legal:
            self.report.empty_domain_nodes += 1
        return True

    def value(self, b: int = 0):
        if self.dead_on_arrival:
            return None
        if b == self.leaf:
            return self._leaf_value()
        ids = [v.id for v in self.blocks[b].variables]
        if self.blocks[b].quantifier is Quantifier.EXISTS:
            best = None
            for point in self._block_points(b):
                for vid, val in zip(ids, point):
                    self.assign[vid] = val
                if self._violated_completed(b):
                    continue
                v = self.value(b + 1)
                if v is not None:
                    best = v if best is None else min(best, v)
            return best
        worst = None
        saw_legal = False
        for point in self._block_points(b):
            for vid, val in zip(ids, point):
                self.assign[vid] = val
            if not self._legal_universal(b):
                continue
            saw_legal = True
            if self._violated_completed(b):
                return None
            v = self.value(b + 1)
            if v is None:
                return None
            worst = v if worst is None else max(worst, v)
        if not saw_legal:
            self.report.empty_domain_nodes += 1
            return -math.inf
        return worst


def minimax_feasible(inst: QipInstance, max_leaves: int = DEFAULT_GUARD,
                     report: Optional[OracleReport] = None) -> bool:
    """True iff the existential player has a winning strategy."""
    report = report if report is not None else OracleReport()
    return _Enumerator(inst, max_leaves, report).feasible()


def minimax_value(inst: QipInstance, max_leaves: int = DEFAULT_GUARD,
                  report: Optional[OracleReport] = None) -> Optional[int]:
    """Optimal worst-case objective value, or None when infeasible."""
    if inst.objective is None:
        raise ValueError("instance has no objective")
    report = report if report is not None else OracleReport()
    sense = inst.objective.sense
    work = inst
    if sense == "max":
        work = replace(inst, objective=Objective("min", tuple((-c, v) for c, v in inst.objective.coeffs)))
    result = _Enumerator(work, max_leaves, report).value()
    if result is None:
        return None
    if result == -math.inf:
        raise RuntimeError("objective value undefined: play reached an empty universal domain")
    return -result if sense == "max" else result

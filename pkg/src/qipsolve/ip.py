"""Feasibility and optimization of quantifier-free bounded integer linear systems.

The built-in kernel is depth-first branch and bound: fixpoint interval
propagation at every node, branching on the variable with the widest remaining
interval, values tried lower-first. Objectives are handled by best-so-far
pruning with the cut `c.x <= best - 1` (integer objectives only). Every
feasible answer is re-verified in exact rational arithmetic before it is
returned, which also makes the external-solver adapter trustworthy without
trusting the external solver.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .model import Assignment, LinearConstraint, Relation, VarId

CONFLICT = "conflict"


@dataclass(frozen=True)
class Budget:
    max_nodes: Optional[int] = None
    deadline: Optional[float] = None  # absolute time.monotonic() value

    def __post_init__(self):
        if self.max_nodes is not None and self.max_nodes <= 0:
            raise ValueError("max_nodes must be positive when finite")

    @classmethod
    def time_limit(cls, seconds: float, max_nodes: Optional[int] = None) -> "Budget":
        if seconds <= 0:
            raise ValueError("time limit must be positive")
        return cls(max_nodes=max_nodes, deadline=time.monotonic() + seconds)

    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline


@dataclass(frozen=True)
class IpProblem:
    vars: list[tuple[VarId, int, int]]
    rows: list[LinearConstraint] = field(default_factory=list)
    objective: Optional[tuple[str, dict[VarId, int]]] = None  # (sense, integer coeffs)

    def check(self) -> None:
        declared = set()
        for vid, lo, hi in self.vars:
            if vid in declared:
                raise ValueError(f"variable {vid} declared twice")
            declared.add(vid)
            if lo > hi:
                raise ValueError(f"variable {vid} has empty bounds {lo}..{hi}")
        for con in self.rows:
            if con.relation is not Relation.LE:
                raise ValueError("kernel rows must be LE")
            for _, v in con.terms:
                if v not in declared:
                    raise ValueError(f"row references undeclared variable {v}")
        if self.objective is not None:
            for v, c in self.objective[1].items():
                if v not in declared:
                    raise ValueError(f"objective references undeclared variable {v}")
                if int(c) != c:
                    raise ValueError("objective coefficients must be integers")


@dataclass(frozen=True)
class IpOutcome:
    status: str  # "feasible" | "infeasible" | "unknown"
    witness: Optional[Assignment] = None
    value: Optional[Fraction] = None
    reason: str = ""

    @property
    def is_feasible(self) -> bool:
        return self.status == "feasible"

    @property
    def is_infeasible(self) -> bool:
        return self.status == "infeasible"

    @property
    def is_unknown(self) -> bool:
        return self.status == "unknown"

    @classmethod
    def feasible(cls, witness: Assignment, value: Optional[Fraction] = None) -> "IpOutcome":
        return cls("feasible", dict(witness), value)

    @classmethod
    def infeasible(cls) -> "IpOutcome":
        return cls("infeasible")

    @classmethod
    def unknown(cls, reason: str) -> "IpOutcome":
        return cls("unknown", reason=reason)


IpSolver = Callable[[IpProblem, Optional[Budget]], IpOutcome]


def verify_witness(p: IpProblem, witness: Mapping[VarId, int]) -> bool:
    """Exact check of bounds, integrality, and every row."""
    for vid, lo, hi in p.vars:
        if vid not in witness:
            return False
        x = witness[vid]
        if int(x) != x or not lo <= x <= hi:
            return False
    return all(con.satisfied_by(witness) for con in p.rows)


# ---------------------------------------------------------------------------
# Interval propagation

def propagate_bounds(p: IpProblem, bounds: Optional[dict[VarId, tuple[int, int]]] = None,
                     extra_rows: Sequence[LinearConstraint] = ()):
    """Tighten variable intervals against all rows until fixpoint.

    Returns the tightened `{var: (lo, hi)}` map, or the string CONFLICT when
    some interval empties or a row's minimum activity exceeds its rhs. Sound:
    no integer solution is ever removed.
    """
    if bounds is None:
        bounds = {vid: (lo, hi) for vid, lo, hi in p.vars}
    else:
        bounds = dict(bounds)
    rows = list(p.rows) + list(extra_rows)
    changed = True
    sweeps = 0
    limit = 4 * (len(rows) + len(bounds)) + 16
    while changed and sweeps < limit:
        changed = False
        sweeps += 1
        for con in rows:
            min_act = Fraction(0)
            for c, v in con.terms:
                lo, hi = bounds[v]
                min_act += c * (lo if c > 0 else hi)
            if min_act > con.rhs:
                return CONFLICT
            slack = con.rhs - min_act
            for c, v in con.terms:
                lo, hi = bounds[v]
                if c > 0:
                    new_hi = lo + math.floor(slack / c)
                    if new_hi < hi:
                        if new_hi < lo:
                            return CONFLICT
                        bounds[v] = (lo, new_hi)
                        changed = True
                elif c < 0:
                    new_lo = hi + math.ceil(slack / c)
                    if new_lo > lo:
                        if new_lo > hi:
                            return CONFLICT
                        bounds[v] = (new_lo, hi)
                        changed = True
    return bounds


class _BudgetExhausted(Exception):
    pass


class _FoundWitness(Exception):
    pass


def solve_ip(p: IpProblem, budget: Optional[Budget] = None) -> IpOutcome:
    """Decide the system; with an objective, prove the optimum.

    Deterministic for fixed input and budget. Budget exhaustion yields an
    `unknown` outcome, never a wrong verdict.
    """
    p.check()
    if p.objective is None:
        return _search(p, budget, None)

    sense, coeffs = p.objective
    mincoeffs = {v: (c if sense == "min" else -c) for v, c in coeffs.items() if c != 0}
    out = _search(p, budget, mincoeffs)
    if not out.is_feasible:
        return out
    value = Fraction(sum(c * out.witness[v] for v, c in coeffs.items()))
    return IpOutcome.feasible(out.witness, value)


def _search(p: IpProblem, budget: Optional[Budget], mincoeffs: Optional[dict[VarId, int]]) -> IpOutcome:
    order = [vid for vid, _, _ in p.vars]
    root = {vid: (lo, hi) for vid, lo, hi in p.vars}
    nodes = 0
    best_witness: Optional[Assignment] = None
    best_value: Optional[int] = None

    def cut_rows():
        if mincoeffs is None or best_value is None:
            return ()
        terms = tuple(sorted(((Fraction(c), v) for v, c in mincoeffs.items()), key=lambda t: t[1]))
        return (LinearConstraint(terms, Relation.LE, Fraction(best_value - 1)),)

    def dfs(bounds):
        nonlocal nodes, best_witness, best_value
        nodes += 1
        if budget is not None:
            if budget.max_nodes is not None and nodes > budget.max_nodes:
                raise _BudgetExhausted
            if nodes % 64 == 0 and budget.expired():
                raise _BudgetExhausted
        bounds = propagate_bounds(p, bounds, cut_rows())
        if bounds is CONFLICT:
            return
        open_vars = [v for v in order if bounds[v][0] < bounds[v][1]]
        if not open_vars:
            witness = {v: bounds[v][0] for v in order}
            if not verify_witness(p, witness):
                return  # propagation is sound, so this only guards kernel bugs
            if mincoeffs is None:
                best_witness = witness
                raise _FoundWitness
            value = sum(c * witness[v] for v, c in mincoeffs.items())
            if best_value is None or value < best_value:
                best_witness, best_value = witness, value
            return
        branch = max(open_vars, key=lambda v: bounds[v][1] - bounds[v][0])
        lo, hi = bounds[branch]
        for value in range(lo, hi + 1):
            child = dict(bounds)
            child[branch] = (value, value)
            dfs(child)

    try:
        dfs(root)
    except _BudgetExhausted:
        return IpOutcome.unknown("budget exhausted")
    except _FoundWitness:
        return IpOutcome.feasible(best_witness)
    if best_witness is None:
        return IpOutcome.infeasible()
    if mincoeffs is None:
        return IpOutcome.infeasible()
    return IpOutcome.feasible(best_witness)


# ---------------------------------------------------------------------------
# External-solver file adapter

def var_name(vid: VarId) -> str:
    return f"x{vid}"


def _terminating(q: Fraction) -> bool:
    den = q.denominator
    for p in (2, 5):
        while den % p == 0:
            den //= p
    return den == 1


def _scale_if_needed(coeffs: list[Fraction], rhs: Fraction) -> tuple[list[Fraction], Fraction]:
    """Scale a row to integers when any datum has a non-terminating decimal form."""
    if all(_terminating(q) for q in coeffs + [rhs]):
        return coeffs, rhs
    scale = 1
    for q in coeffs + [rhs]:
        scale = scale * q.denominator // math.gcd(scale, q.denominator)
    return [c * scale for c in coeffs], rhs * scale


def export_lp_text(p: IpProblem) -> str:
    """Emit the problem in the common LP file layout, all variables integer.

    Terminating rationals are written as exact decimals; a row containing a
    non-terminating rational is scaled to integers row-wise. An objective is
    scaled the same way (the argmin is unchanged and the value is always
    recomputed exactly on our side).
    """
    from .parser import format_rational

    p.check()
    placeholder = f"0 {var_name(p.vars[0][0])}" if p.vars else "0 x0"
    out = []
    if p.objective is not None:
        sense, coeffs = p.objective
        out.append("Maximize" if sense == "max" else "Minimize")
        pairs = sorted((v, Fraction(c)) for v, c in coeffs.items())
        terms, _ = _scale_if_needed([c for _, c in pairs], Fraction(0))
        body = _join_terms([(c, var_name(v)) for (v, _), c in zip(pairs, terms)], format_rational)
        out.append(f" obj: {body if body else placeholder}")
    else:
        out.append("Minimize")
        out.append(f" obj: {placeholder}")
    out.append("Subject To")
    for i, con in enumerate(p.rows):
        coeffs, rhs = _scale_if_needed([c for c, _ in con.terms], con.rhs)
        body = _join_terms([(c, var_name(v)) for c, (_, v) in zip(coeffs, con.terms)], format_rational)
        out.append(f" c{i}: {body if body else placeholder} <= {format_rational(rhs)}")
    out.append("Bounds")
    for vid, lo, hi in p.vars:
        out.append(f" {lo} <= {var_name(vid)} <= {hi}")
    out.append("Generals")
    out.append(" " + " ".join(var_name(vid) for vid, _, _ in p.vars))
    out.append("End")
    return "\n".join(out) + "\n"


def _join_terms(pairs: list[tuple[Fraction, str]], fmt) -> str:
    parts = []
    for c, name in pairs:
        if c == 0:
            continue
        mag = fmt(abs(c))
        if not parts:
            parts.append(f"{'-' if c < 0 else ''}{mag} {name}")
        else:
            parts.append(f"{'+' if c > 0 else '-'} {mag} {name}")
    return " ".join(parts)


def parse_external_solution(text: str, p: IpProblem) -> IpOutcome:
    """Read `status ...` plus `name value` lines; round values to nearest and
    re-verify exactly. Anything that fails verification degrades to unknown."""
    status = None
    values: dict[str, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0].lower() == "status":
            status = parts[1].lower() if len(parts) > 1 else ""
            continue
        if len(parts) != 2:
            return IpOutcome.unknown(f"malformed solution line {lineno}: {raw!r}")
        try:
            values[parts[0]] = Fraction(parts[1])
        except (ValueError, ZeroDivisionError):
            return IpOutcome.unknown(f"malformed value on line {lineno}: {raw!r}")
    if status is None:
        return IpOutcome.unknown("solution file has no status line")
    if status in ("infeasible", "unsat"):
        return IpOutcome.infeasible()
    if status not in ("optimal", "feasible", "sat"):
        return IpOutcome.unknown(f"solver status {status!r}")
    witness: Assignment = {}
    for vid, lo, hi in p.vars:
        q = values.get(var_name(vid))
        if q is None:
            witness[vid] = lo
        else:
            witness[vid] = math.floor(q + Fraction(1, 2))
    if not verify_witness(p, witness):
        return IpOutcome.unknown("external witness failed exact verification")
    value = None
    if p.objective is not None:
        sense, coeffs = p.objective
        value = Fraction(sum(c * witness[v] for v, c in coeffs.items()))
    return IpOutcome.feasible(witness, value)


def make_external_solver(command_template: str) -> IpSolver:
    """Build a solver from a command template with {in} and {out} placeholders.

    The problem is written as LP text, the command is invoked, and the
    solution file is parsed and exactly re-verified.
    """
    if "{in}" not in command_template or "{out}" not in command_template:
        raise ValueError("solver command template needs {in} and {out} placeholders")

    def solver(p: IpProblem, budget: Optional[Budget] = None) -> IpOutcome:
        with tempfile.TemporaryDirectory(prefix="qipsolve-") as tmp:
            lp_path = Path(tmp) / "problem.lp"
            sol_path = Path(tmp) / "solution.txt"
            lp_path.write_text(export_lp_text(p))
            argv = [a.replace("{in}", str(lp_path)).replace("{out}", str(sol_path))
                    for a in shlex.split(command_template)]
            timeout = None
            if budget is not None and budget.deadline is not None:
                timeout = max(0.01, budget.deadline - time.monotonic())
            try:
                proc = subprocess.run(argv, capture_output=True, timeout=timeout)
            except (subprocess.TimeoutExpired, OSError) as exc:
                return IpOutcome.unknown(f"external solver failed: {exc}")
            if not sol_path.exists():
                return IpOutcome.unknown(f"external solver wrote no solution (exit {proc.returncode})")
            return parse_external_solution(sol_path.read_text(), p)

    return solver

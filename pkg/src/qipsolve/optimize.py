"""Binary-search optimization over the decision engine.

The optimum of an instance with integer objective coefficients lies in the
box bounds of the objective. Each probe folds the objective into the row
`c.x <= z` and asks the decision engine whether the existential player still
wins; the search keeps the tightest feasible bound. Every probe starts a
fresh engine: nothing learned at one bound is assumed valid at another.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional

from .cegar import Engine, SolveStats, Unknown
from .ip import Budget, IpSolver, solve_ip
from .model import (
    Assignment,
    LinearConstraint,
    Objective,
    QipInstance,
    Quantifier,
    Relation,
    objective_bounds,
)


@dataclass(frozen=True)
class OptResult:
    status: str  # "optimal" | "infeasible" | "unknown"
    value: Optional[int] = None
    first_move: Optional[Assignment] = None
    probes: tuple[tuple[int, str], ...] = ()  # (bound, verdict) audit trail
    reason: str = ""


@dataclass(frozen=True)
class VerifyResult:
    status: str  # "proved-optimal" | "better-exists" | "unknown"
    bound: int
    reason: str = ""


def _as_minimization(inst: QipInstance) -> tuple[QipInstance, int]:
    """Flip a maximization objective; returns (instance, sign) with sign -1
    when reported values must be un-negated."""
    obj = inst.objective
    if obj is None:
        raise ValueError("instance has no objective")
    if inst.blocks[0].quantifier is not Quantifier.EXISTS:
        raise ValueError("optimization requires an existential first block")
    if obj.sense == "min":
        return inst, 1
    flipped = Objective("min", tuple((-c, v) for c, v in obj.coeffs))
    return replace(inst, objective=flipped), -1


def decision_instance(inst: QipInstance, z: int) -> QipInstance:
    """The feasibility instance with the objective folded into `c.x <= z`."""
    obj = inst.objective
    terms = tuple(sorted(((Fraction(c), v) for c, v in obj.coeffs), key=lambda t: t[1]))
    bound_row = LinearConstraint(terms, Relation.LE, Fraction(z))
    return replace(inst, exist_system=inst.exist_system + (bound_row,), objective=None)


def optimize(inst: QipInstance, *, ip_solver: IpSolver = solve_ip,
             budget: Optional[Budget] = None, first_move: str = "relax",
             stats: Optional[SolveStats] = None) -> OptResult:
    """Optimal worst-case objective value and an optimal first move, or
    infeasible/unknown. Probe count is at most ceil(log2(UB-LB+1)) + 1."""
    stats = stats if stats is not None else SolveStats()
    start = time.monotonic()
    work, sign = _as_minimization(inst)
    lb, ub = objective_bounds(work)
    probes: list[tuple[int, str]] = []

    def decide(z: int):
        engine = Engine(decision_instance(work, z), ip_solver=ip_solver,
                        budget=budget, first_move=first_move, stats=stats)
        result = engine.solve()
        probes.append((z, "unknown" if isinstance(result, Unknown)
                       else ("feasible" if result is not None else "infeasible")))
        return result

    def finish(res: OptResult) -> OptResult:
        stats.wall_ms = int((time.monotonic() - start) * 1000)
        stats.outcome = res.status
        return res

    move = decide(ub)
    if isinstance(move, Unknown):
        return finish(OptResult("unknown", probes=tuple(probes), reason=move.reason))
    if move is None:
        return finish(OptResult("infeasible", probes=tuple(probes)))
    while ub - lb > 0:
        z = (lb + ub) // 2
        result = decide(z)
        if isinstance(result, Unknown):
            return finish(OptResult("unknown", probes=tuple(probes), reason=result.reason))
        if result is not None:
            ub = z
            move = result
        else:
            lb = z + 1
    return finish(OptResult("optimal", value=sign * ub, first_move=move, probes=tuple(probes)))


def verify_bound(inst: QipInstance, z: int, *, ip_solver: IpSolver = solve_ip,
                 budget: Optional[Budget] = None, first_move: str = "relax",
                 stats: Optional[SolveStats] = None) -> VerifyResult:
    """Check whether any winning strategy beats the bound z.

    Probes the decision instance at z-1 (minimization; mirrored for
    maximization). No move there proves z optimal; a move only proves that
    some strictly better value exists, without revealing it.
    """
    stats = stats if stats is not None else SolveStats()
    work, sign = _as_minimization(inst)
    probe = z - 1 if sign == 1 else -(z + 1)
    engine = Engine(decision_instance(work, probe), ip_solver=ip_solver,
                    budget=budget, first_move=first_move, stats=stats)
    result = engine.solve()
    if isinstance(result, Unknown):
        stats.outcome = "unknown"
        return VerifyResult("unknown", z, result.reason)
    if result is None:
        stats.outcome = "optimal"
        return VerifyResult("proved-optimal", z)
    stats.outcome = "feasible"
    return VerifyResult("better-exists", z)

"""Seeded random instances and the engine-vs-oracle agreement check.

Instances are desk-scale by construction: at most a handful of variables,
tiny domains, a few rows, and an uncertainty row whose rhs is lifted to its
minimum activity so the uncertainty set is never empty.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .bruteforce import minimax_feasible, minimax_value
from .cegar import SolveStats, solve_qip
from .model import QipInstance, Quantifier, build_instance
from .optimize import optimize, verify_bound


def random_instance(seed: int, *, max_vars: int = 9, max_domain: int = 3,
                    max_blocks: int = 4, max_rows: int = 5,
                    with_objective: Optional[bool] = None) -> QipInstance:
    rng = random.Random(seed)
    k = rng.randint(1, max_blocks)
    n = rng.randint(k, max_vars)
    sizes = [1] * k
    for _ in range(n - k):
        sizes[rng.randrange(k)] += 1
    first = rng.choice([Quantifier.EXISTS, Quantifier.EXISTS, Quantifier.FORALL])

    decls = []
    quant = first
    index = 0
    for size in sizes:
        for _ in range(size):
            lo = rng.choice([-1, 0, 0])
            hi = lo + rng.choice([1, 1, 2, max_domain - 1])
            decls.append((f"v{index}", quant, lo, min(hi, lo + max_domain - 1)))
            index += 1
        quant = quant.dual()

    bounds = {name: (lo, hi) for name, _, lo, hi in decls}

    def coefficient() -> Fraction:
        if rng.random() < 0.15:
            return Fraction(rng.choice([-3, -1, 1, 3]), 2)
        return Fraction(rng.choice([-3, -2, -1, 1, 2, 3]))

    def draw_row(names):
        width = rng.randint(1, min(4, len(names)))
        chosen = rng.sample(names, width)
        terms = [(coefficient(), nm) for nm in chosen]
        lo = sum(c * (bounds[nm][1] if c < 0 else bounds[nm][0]) for c, nm in terms)
        hi = sum(c * (bounds[nm][0] if c < 0 else bounds[nm][1]) for c, nm in terms)
        span = int(math.ceil(hi - lo))
        rhs = lo + rng.randint(0, max(span, 0))
        relation = rng.choice(["<=", "<=", "<=", ">=", "="])
        return terms, relation, rhs, lo

    exist_names = [nm for nm, _, _, _ in decls]
    rows = []
    for _ in range(rng.randint(1, max_rows)):
        terms, relation, rhs, _ = draw_row(exist_names)
        rows.append((terms, relation, rhs))

    univ_names = [nm for nm, q, _, _ in decls if q is Quantifier.FORALL]
    uncertainty = []
    if univ_names and rng.random() < 0.5:
        terms, relation, rhs, lo = draw_row(univ_names)
        if relation == "<=":
            rhs = max(rhs, lo)  # the all-minimum point stays legal
            uncertainty.append((terms, relation, rhs))

    want_obj = rng.random() < 0.6 if with_objective is None else with_objective
    objective = None
    if want_obj:
        sense = "max" if rng.random() < 0.25 else "min"
        coeffs = [(rng.randint(-3, 3), nm) for nm in exist_names]
        objective = (sense, coeffs)
    return build_instance(decls, rows, uncertainty, objective)


@dataclass
class FuzzOutcome:
    seed: int
    disagreements: list[str] = field(default_factory=list)
    checks: int = 0

    @property
    def ok(self) -> bool:
        return not self.disagreements


def check_seed(seed: int) -> tuple[FuzzOutcome, QipInstance]:
    """Cross-check the expansion engine against the enumeration oracle on one
    seeded instance: feasibility verdicts always, optimized value and bound
    verification when an objective applies."""
    inst = random_instance(seed)
    out = FuzzOutcome(seed)
    outcome, _, _ = solve_qip(inst)
    expected = minimax_feasible(inst)
    out.checks += 1
    if outcome != ("feasible" if expected else "infeasible"):
        out.disagreements.append(f"solve said {outcome}, enumeration said "
                                 f"{'feasible' if expected else 'infeasible'}")
        return out, inst

    if inst.objective is not None and inst.blocks[0].quantifier is Quantifier.EXISTS:
        stats = SolveStats()
        result = optimize(inst, stats=stats)
        value = minimax_value(inst)
        out.checks += 1
        if value is None:
            if result.status != "infeasible":
                out.disagreements.append(f"optimize said {result.status}, enumeration said infeasible")
        elif result.status != "optimal" or result.value != value:
            out.disagreements.append(f"optimize said {result.status}/{result.value}, "
                                     f"enumeration said {value}")
        elif result.status == "optimal":
            out.checks += 1
            from .model import objective_bounds

            lb, ub = objective_bounds(inst)
            cap = math.ceil(math.log2(ub - lb + 1)) + 1 if ub > lb else 1
            if len(result.probes) > cap:
                out.disagreements.append(f"{len(result.probes)} probes exceed the bound {cap}")
            sense = inst.objective.sense
            ver = verify_bound(inst, result.value)
            worse = result.value + 1 if sense == "min" else result.value - 1
            ver_worse = verify_bound(inst, worse)
            out.checks += 2
            if ver.status != "proved-optimal":
                out.disagreements.append(f"verify_bound at the optimum said {ver.status}")
            if ver_worse.status != "better-exists":
                out.disagreements.append(f"verify_bound past the optimum said {ver_worse.status}")
    return out, inst

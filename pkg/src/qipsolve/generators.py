"""Benchmark instance families.

Two generators: a two-chain parity family that is infeasible by construction
(both chains compute the same parity in different variable orders, and a
single universal bit demands they disagree), and the trilevel critical-node
vaccination/infection/protection game on a directed graph.

Randomness comes from a self-contained splitmix64 stream so identical
parameters reproduce byte-identical instances on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import QipInstance, build_instance
from .parser import serialize_qip

_MASK = (1 << 64) - 1


class SplitMix64:
    """splitmix64: state advances by 0x9E3779B97F4A7C15; output mixes with
    the constants 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform draw from range(n), rejection-sampled to avoid modulo bias."""
        if n <= 0:
            raise ValueError("below() needs a positive bound")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def chance(self, p: float) -> bool:
        return self.next_u64() < int(p * (1 << 64))


def _permutation(n: int, rng: SplitMix64) -> list[int]:
    """Fisher-Yates shuffle of 1..n."""
    perm = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


# ---------------------------------------------------------------------------
# Two-chain parity family

def parity_permutation(n: int, seed: int) -> list[int]:
    return _permutation(n, SplitMix64(seed))


def gen_qrandomparity(n: int, seed: int) -> QipInstance:
    """Linear form: chains t and s accumulate the parity of x in declaration
    order and in a seeded random order; carry bits d/e linearize each XOR as
    a + b + out = 2 carry. The universal bit then demands t_n = 0 and s_n = 1
    in its two branches, so no strategy survives both."""
    if n < 2:
        raise ValueError("parity family needs n >= 2")
    sigma = parity_permutation(n, seed)
    decls = [(f"x{i}", "E", 0, 1) for i in range(1, n + 1)]
    decls.append(("u", "A", 0, 1))
    decls += [(f"t{i}", "E", 0, 1) for i in range(2, n + 1)]
    decls += [(f"d{i}", "E", 0, 1) for i in range(2, n + 1)]
    decls += [(f"s{i}", "E", 0, 1) for i in range(2, n + 1)]
    decls += [(f"e{i}", "E", 0, 1) for i in range(2, n + 1)]

    rows = [([(1, "x1"), (1, "x2"), (1, "t2"), (-2, "d2")], "=", 0)]
    for i in range(3, n + 1):
        rows.append(([(1, f"t{i-1}"), (1, f"x{i}"), (1, f"t{i}"), (-2, f"d{i}")], "=", 0))
    rows.append(([(1, f"x{sigma[0]}"), (1, f"x{sigma[1]}"), (1, "s2"), (-2, "e2")], "=", 0))
    for i in range(3, n + 1):
        rows.append(([(1, f"s{i-1}"), (1, f"x{sigma[i-1]}"), (1, f"s{i}"), (-2, f"e{i}")], "=", 0))
    rows.append(([(-1, "u"), (-1, f"t{n}")], ">=", -1))
    rows.append(([(1, "u"), (1, f"s{n}")], ">=", 1))
    return build_instance(decls, rows)


def qrandomparity_text(n: int, seed: int) -> str:
    sigma = parity_permutation(n, seed)
    header = f"# family=qrandomparity n={n} seed={seed} sigma={','.join(map(str, sigma))}\n"
    return header + serialize_qip(gen_qrandomparity(n, seed))


def _xor_clauses(a: int, b: int, out: int) -> list[list[int]]:
    """CNF for out = a XOR b."""
    return [[-a, b, out], [a, -b, out], [a, b, -out], [-a, -b, -out]]


def emit_qdimacs_qrandomparity(n: int, seed: int) -> str:
    """Clausal form of the same family; same permutation as the linear form.

    Numbering: x1..xn are 1..n, u is n+1, t2..tn are n+2..2n, s2..sn are
    2n+1..3n-1.
    """
    if n < 2:
        raise ValueError("parity family needs n >= 2")
    sigma = parity_permutation(n, seed)
    x = {i: i for i in range(1, n + 1)}
    u = n + 1
    t = {i: n + i for i in range(2, n + 1)}
    s = {i: 2 * n + i - 1 for i in range(2, n + 1)}
    clauses: list[list[int]] = []
    clauses += _xor_clauses(x[1], x[2], t[2])
    for i in range(3, n + 1):
        clauses += _xor_clauses(x[i], t[i - 1], t[i])
    clauses += _xor_clauses(x[sigma[0]], x[sigma[1]], s[2])
    for i in range(3, n + 1):
        clauses += _xor_clauses(x[sigma[i - 1]], s[i - 1], s[i])
    clauses.append([-u, -t[n]])
    clauses.append([u, s[n]])
    nvars = 3 * n - 1
    out = [
        f"c family=qrandomparity n={n} seed={seed} sigma={','.join(map(str, sigma))}",
        f"c vars: x1..x{n} -> 1..{n}, u -> {u}, t2..t{n} -> {n + 2}..{2 * n}, "
        f"s2..s{n} -> {2 * n + 1}..{3 * n - 1}",
        f"p cnf {nvars} {len(clauses)}",
        "e " + " ".join(str(x[i]) for i in range(1, n + 1)) + " 0",
        f"a {u} 0",
        "e " + " ".join(str(t[i]) for i in range(2, n + 1))
        + " " + " ".join(str(s[i]) for i in range(2, n + 1)) + " 0",
    ]
    out += [" ".join(map(str, clause)) + " 0" for clause in clauses]
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Multilevel critical node

@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]  # directed arcs over vertices 0..n-1

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"arc ({u}, {v}) out of range")
            if (u, v) in seen:
                raise ValueError(f"duplicate arc ({u}, {v})")
            seen.add((u, v))


@dataclass(frozen=True)
class McnBudgets:
    vaccinate: int  # nodes the defender may vaccinate before the attack
    infect: int     # nodes the attacker may infect
    protect: int    # nodes the defender may protect afterwards

    def check(self, n: int) -> None:
        for name, b in (("vaccinate", self.vaccinate), ("infect", self.infect),
                        ("protect", self.protect)):
            if not 0 <= b <= n:
                raise ValueError(f"{name} budget {b} outside 0..{n}")


def graph_from_edge_list(text: str) -> Graph:
    """Plain format: vertex count on line 1, one `u v` arc per line (0-based)."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty graph file")
    n = int(lines[0])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad arc line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph(n, tuple(edges))


def random_graph(n: int, density: float, seed: int) -> Graph:
    """Undirected Erdos-Renyi sample expanded to both arcs."""
    rng = SplitMix64(seed)
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.chance(density):
                edges.append((u, v))
                edges.append((v, u))
    return Graph(n, tuple(sorted(edges)))


def gen_mcn(g: Graph, b: McnBudgets) -> QipInstance:
    """Trilevel game: vaccinate z, adversarial infection y under a budget row,
    then protect x; alpha marks nodes that end up saved, limited by the
    infection rows and by cascade rows along each arc."""
    b.check(g.n)
    nodes = range(1, g.n + 1)
    decls = [(f"z{v}", "E", 0, 1) for v in nodes]
    decls += [(f"y{v}", "A", 0, 1) for v in nodes]
    decls += [(f"x{v}", "E", 0, 1) for v in nodes]
    decls += [(f"a{v}", "E", 0, 1) for v in nodes]

    rows = [([(1, f"z{v}") for v in nodes], "<=", b.vaccinate),
            ([(1, f"x{v}") for v in nodes], "<=", b.protect)]
    for v in nodes:
        rows.append(([(1, f"a{v}"), (-1, f"z{v}"), (1, f"y{v}")], "<=", 1))
    for u, v in g.edges:
        rows.append(([(1, f"a{v + 1}"), (-1, f"a{u + 1}"), (-1, f"x{v + 1}"), (-1, f"z{v + 1}")], "<=", 0))
    uncertainty = [([(1, f"y{v}") for v in nodes], "<=", b.infect)]
    objective = ("max", [(1, f"a{v}") for v in nodes])
    return build_instance(decls, rows, uncertainty, objective)


def mcn_text(g: Graph, b: McnBudgets, note: str = "") -> str:
    header = (f"# family=mcn nodes={g.n} arcs={len(g.edges)} omega={b.vaccinate} "
              f"phi={b.infect} lambda={b.protect}{' ' + note if note else ''}\n")
    return header + serialize_qip(gen_mcn(g, b))

"""Text format for program instances.

Layout (sections in this order; UNCERTAINTY and BOUNDS are optional)::

    MINIMIZE -x1 + 2 x2          # or MAXIMIZE; line optional
    SUBJECT TO
    2 x1 + x3 - x5 <= 4
    x1 - x2 = 1
    UNCERTAINTY
    x2 + x4 <= 1
    BOUNDS
    0 <= x1 <= 2
    ORDER
    E x1
    A x2
    END

Coefficients are decimals or `p/q` fractions; a missing coefficient means 1.
`#` starts a comment. Every identifier must be declared in exactly one ORDER
line; undeclared bounds default to 0..1. Quantifier letters E/A are reserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .model import (
    Block,
    Objective,
    QipInstance,
    Quantifier,
    Relation,
    Variable,
    row,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int

    def __str__(self):
        return f"line {self.line}, column {self.column}"


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} ({span})")
        self.message = message
        self.span = span


_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_@'.]*|\d+\.\d+|\d+|<=|>=|=|\+|-|/|\S")
_NUMBER = re.compile(r"\d+\.\d+$|\d+$")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_@'.]*$")

_SECTIONS = ("MINIMIZE", "MAXIMIZE", "SUBJECT", "UNCERTAINTY", "BOUNDS", "ORDER", "END")


@dataclass(frozen=True)
class _Tok:
    text: str
    span: SourceSpan


def _tokenize_line(text: str, lineno: int) -> list[_Tok]:
    text = text.split("#", 1)[0]
    toks = []
    for m in _TOKEN.finditer(text):
        toks.append(_Tok(m.group(0), SourceSpan(lineno, m.start() + 1)))
    return toks


class _LineParser:
    """Parses one logical line worth of tokens."""

    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1]
            raise ParseError("unexpected end of line", last.span)
        self.pos += 1
        return tok

    def done(self) -> bool:
        return self.pos >= len(self.toks)

    def number(self) -> tuple[Fraction, _Tok]:
        tok = self.take()
        if not _NUMBER.match(tok.text):
            raise ParseError(f"expected a number, found {tok.text!r}", tok.span)
        if "." in tok.text:
            whole, frac = tok.text.split(".")
            value = Fraction(int(whole + frac), 10 ** len(frac))
        else:
            value = Fraction(int(tok.text))
        if self.peek() is not None and self.peek().text == "/":
            self.take()
            den_tok = self.take()
            if not den_tok.text.isdigit():
                raise ParseError(f"expected integer denominator, found {den_tok.text!r}", den_tok.span)
            if "." in tok.text:
                raise ParseError("fraction numerator must be an integer", tok.span)
            value = Fraction(int(tok.text), int(den_tok.text))
        return value, tok

    def linexpr(self) -> list[tuple[Fraction, _Tok]]:
        """Parse `term ((+|-) term)*`; a leading sign is permitted."""
        terms: list[tuple[Fraction, _Tok]] = []
        sign = Fraction(1)
        first = True
        while True:
            tok = self.peek()
            if tok is None:
                if first or terms:
                    break
            if tok.text in ("+", "-"):
                self.take()
                sign = Fraction(1) if tok.text == "+" else Fraction(-1)
            elif not first:
                break
            coef = Fraction(1)
            nxt = self.peek()
            if nxt is None:
                raise ParseError("dangling sign in expression", tok.span)
            if _NUMBER.match(nxt.text):
                coef, _ = self.number()
                nxt = self.peek()
            if nxt is None or not _IDENT.match(nxt.text) or nxt.text in _SECTIONS:
                where = nxt.span if nxt is not None else tok.span
                raise ParseError("expected a variable name", where)
            ident = self.take()
            terms.append((sign * coef, ident))
            sign = Fraction(1)
            first = False
            if self.done():
                break
        return terms


def parse_qip(text: str) -> QipInstance:
    """Parse instance text. Validation beyond syntax (admissibility) is the
    caller's job."""
    lines = [(_tokenize_line(raw, i + 1)) for i, raw in enumerate(text.splitlines())]
    lines = [t for t in lines if t]
    if not lines:
        raise ParseError("empty input", SourceSpan(1, 1))

    idx = 0

    def current() -> list[_Tok]:
        if idx >= len(lines):
            last = lines[-1][-1]
            raise ParseError("unexpected end of input", last.span)
        return lines[idx]

    objective_sense = None
    objective_terms: list[tuple[Fraction, _Tok]] = []
    head = current()[0]
    if head.text in ("MINIMIZE", "MAXIMIZE"):
        objective_sense = "min" if head.text == "MINIMIZE" else "max"
        lp = _LineParser(current()[1:])
        objective_terms = lp.linexpr()
        if not lp.done():
            raise ParseError(f"trailing input after objective: {lp.peek().text!r}", lp.peek().span)
        idx += 1

    head = current()
    if head[0].text != "SUBJECT" or len(head) < 2 or head[1].text != "TO":
        raise ParseError("expected SUBJECT TO", head[0].span)
    if len(head) > 2:
        raise ParseError("SUBJECT TO takes no arguments", head[2].span)
    idx += 1

    def parse_rows(stop_words: tuple[str, ...]):
        nonlocal idx
        out = []
        while True:
            toks = current()
            if toks[0].text in stop_words and _IDENT.match(toks[0].text):
                return out
            lp = _LineParser(toks)
            terms = lp.linexpr()
            rel_tok = lp.take()
            if rel_tok.text not in ("<=", ">=", "="):
                raise ParseError(f"expected a relation, found {rel_tok.text!r}", rel_tok.span)
            sign = Fraction(1)
            if lp.peek() is not None and lp.peek().text in ("+", "-"):
                sign = Fraction(1) if lp.take().text == "+" else Fraction(-1)
            rhs, _ = lp.number()
            if not lp.done():
                raise ParseError(f"trailing input after constraint: {lp.peek().text!r}", lp.peek().span)
            out.append((terms, Relation(rel_tok.text), sign * rhs))
            idx += 1

    exist_rows = parse_rows(("UNCERTAINTY", "BOUNDS", "ORDER"))
    univ_rows = []
    if current()[0].text == "UNCERTAINTY":
        idx += 1
        univ_rows = parse_rows(("BOUNDS", "ORDER"))

    bounds: dict[str, tuple[int, int, _Tok]] = {}
    if current()[0].text == "BOUNDS":
        idx += 1
        while current()[0].text != "ORDER":
            lp = _LineParser(current())
            lo = _signed_int(lp)
            _expect(lp, "<=")
            name_tok = lp.take()
            if not _IDENT.match(name_tok.text):
                raise ParseError(f"expected a variable name, found {name_tok.text!r}", name_tok.span)
            _expect(lp, "<=")
            hi = _signed_int(lp)
            if not lp.done():
                raise ParseError("trailing input after bound", lp.peek().span)
            if name_tok.text in bounds:
                raise ParseError(f"duplicate bound for {name_tok.text!r}", name_tok.span)
            bounds[name_tok.text] = (lo, hi, name_tok)
            idx += 1

    if current()[0].text != "ORDER":
        raise ParseError("expected ORDER section", current()[0].span)
    idx += 1

    decls: list[tuple[str, Quantifier, _Tok]] = []
    declared: dict[str, _Tok] = {}
    saw_end = False
    while idx < len(lines):
        toks = current()
        if toks[0].text == "END":
            if len(toks) > 1:
                raise ParseError("trailing input after END", toks[1].span)
            saw_end = True
            idx += 1
            break
        if toks[0].text not in ("E", "A"):
            raise ParseError(f"expected E or A, found {toks[0].text!r}", toks[0].span)
        quant = Quantifier.EXISTS if toks[0].text == "E" else Quantifier.FORALL
        if len(toks) < 2:
            raise ParseError("block declaration lists no variables", toks[0].span)
        for tok in toks[1:]:
            if not _IDENT.match(tok.text) or tok.text in _SECTIONS or tok.text in ("E", "A"):
                raise ParseError(f"bad variable name {tok.text!r}", tok.span)
            if tok.text in declared:
                raise ParseError(f"duplicate variable declaration {tok.text!r}", tok.span)
            declared[tok.text] = tok
            decls.append((tok.text, quant, tok))
        idx += 1
    if not saw_end:
        last = lines[-1][-1]
        raise ParseError("missing END", last.span)
    if idx < len(lines):
        raise ParseError("trailing input after END", current()[0].span)
    if not decls:
        raise ParseError("ORDER declares no variables", SourceSpan(1, 1))

    for name, (lo, hi, tok) in bounds.items():
        if name not in declared:
            raise ParseError(f"bound names undeclared variable {name!r}", tok.span)

    variables: list[Variable] = []
    ids: dict[str, int] = {}
    block_index = -1
    prev = None
    for name, quant, tok in decls:
        if quant is not prev:
            block_index += 1
            prev = quant
        lo, hi = 0, 1
        if name in bounds:
            lo, hi, _ = bounds[name]
        if lo > hi:
            raise ParseError(f"empty bounds {lo}..{hi} for {name!r}", bounds[name][2].span)
        ids[name] = len(variables)
        variables.append(Variable(len(variables), name, lo, hi, quant, block_index))

    def resolve(terms: list[tuple[Fraction, _Tok]]) -> list[tuple[Fraction, int]]:
        out = []
        for coef, tok in terms:
            if tok.text not in ids:
                raise ParseError(f"undeclared variable {tok.text!r}", tok.span)
            out.append((coef, ids[tok.text]))
        return out

    def fold(rows_spec):
        out = []
        for terms, rel, rhs in rows_spec:
            resolved = resolve(terms)
            merged: dict[int, Fraction] = {}
            for c, v in resolved:
                merged[v] = merged.get(v, Fraction(0)) + c
            out.append(row(list((c, v) for v, c in merged.items()), rel, rhs))
        return tuple(out)

    objective = None
    if objective_sense is not None:
        coeffs: dict[int, Fraction] = {}
        for coef, tok in objective_terms:
            if tok.text not in ids:
                raise ParseError(f"undeclared variable {tok.text!r}", tok.span)
            coeffs[ids[tok.text]] = coeffs.get(ids[tok.text], Fraction(0)) + coef
        canon = []
        for vid in sorted(coeffs):
            c = coeffs[vid]
            if c.denominator != 1:
                bad = next(t for _, t in objective_terms if ids[t.text] == vid)
                raise ParseError(f"objective coefficient {c} for {bad.text!r} is not an integer", bad.span)
            if c != 0:
                canon.append((int(c), vid))
        objective = Objective(objective_sense, tuple(canon))

    blocks: list[Block] = []
    for v in variables:
        if v.block == len(blocks):
            blocks.append(Block(v.quantifier, (v,)))
        else:
            blk = blocks[v.block]
            blocks[v.block] = Block(blk.quantifier, blk.variables + (v,))

    return QipInstance(tuple(variables), tuple(blocks), fold(exist_rows), fold(univ_rows), objective)


def _expect(lp: _LineParser, text: str) -> None:
    tok = lp.take()
    if tok.text != text:
        raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.span)


def _signed_int(lp: _LineParser) -> int:
    sign = 1
    if lp.peek() is not None and lp.peek().text in ("+", "-"):
        sign = 1 if lp.take().text == "+" else -1
    value, tok = lp.number()
    if value.denominator != 1:
        raise ParseError(f"bound must be an integer, found {tok.text!r}", tok.span)
    return sign * int(value)


# ---------------------------------------------------------------------------
# Serialization

def format_rational(q: Fraction) -> str:
    """Exact text for a rational: integer, terminating decimal, or p/q."""
    if q.denominator == 1:
        return str(q.numerator)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    digits = max(twos, fives)
    scaled = q.numerator * 10 ** digits // q.denominator
    sign = "-" if scaled < 0 else ""
    body = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{body[:-digits]}.{body[-digits:]}"


def _format_linexpr(terms, names) -> str:
    parts = []
    for i, (coef, vid) in enumerate(terms):
        mag = abs(coef)
        piece = names[vid] if mag == 1 else f"{format_rational(mag)} {names[vid]}"
        if i == 0:
            parts.append(piece if coef > 0 else f"- {piece}")
        else:
            parts.append(f"{'+' if coef > 0 else '-'} {piece}")
    return " ".join(parts) if parts else "0 " + names[0]


def serialize_qip(inst: QipInstance) -> str:
    """Canonical text; `parse_qip(serialize_qip(inst))` equals `inst`."""
    names = {v.id: v.name for v in inst.variables}
    out: list[str] = []
    if inst.objective is not None:
        keyword = "MINIMIZE" if inst.objective.sense == "min" else "MAXIMIZE"
        terms = [(Fraction(c), v) for c, v in inst.objective.coeffs]
        out.append(f"{keyword} {_format_linexpr(terms, names)}")
    out.append("SUBJECT TO")
    for con in inst.exist_system:
        out.append(f"{_format_linexpr(con.terms, names)} {con.relation.value} {format_rational(con.rhs)}")
    if inst.univ_system:
        out.append("UNCERTAINTY")
        for con in inst.univ_system:
            out.append(f"{_format_linexpr(con.terms, names)} {con.relation.value} {format_rational(con.rhs)}")
    nondefault = [v for v in inst.variables if (v.lower, v.upper) != (0, 1)]
    if nondefault:
        out.append("BOUNDS")
        for v in sorted(nondefault, key=lambda v: v.id):
            out.append(f"{v.lower} <= {v.name} <= {v.upper}")
    out.append("ORDER")
    for blk in inst.blocks:
        letter = "E" if blk.quantifier is Quantifier.EXISTS else "A"
        out.append(f"{letter} {' '.join(v.name for v in blk.variables)}")
    out.append("END")
    return "\n".join(out) + "\n"

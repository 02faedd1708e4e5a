"""Concrete text syntax: parsing and canonical formatting.

Grammar sketch (whitespace-insensitive):

    formula   := or | or '|' or | ...
    or        := and ('|' and)*
    and       := until ('&' until)*
    until     := unary ('U' '[a,b]' until)?
    unary     := '!' unary | primary
    primary   := '(' formula ')' | 'true' | atom
               | 'G[a,b](phi)' | 'F[a,b](phi)'
               | 'A{op}[d1,d2; psi](x cmp c)'
               | 'C{op}[d1,d2; psi](phi) cmp c'
               | 'everywhere[d1,d2; psi](phi)' | 'somewhere[d1,d2; psi](phi)'
    atom      := IDENT cmp number
    psi       := proposition names with '!', '|', '&', 'true', parens

`inf` is the upper domain bound for an unbounded band. Named constants in
number position resolve through a caller-supplied table. `&` inside psi is
sugar for the negated disjunction of negations. The names `true`, `inf`,
`everywhere`, and `somewhere` are reserved; `G`, `F`, `A`, `C`, and `U` act
as operators only in operator position, so they stay usable as variables.
"""

from __future__ import annotations

import math
import re
from typing import Mapping

from .errors import ParseError
from .formula import (
    AGG_OPS,
    Agg,
    Always,
    And,
    Atom,
    Count,
    Eventually,
    Everywhere,
    Formula,
    FormulaError,
    Interval,
    Not,
    Or,
    PsiExpr,
    PsiNot,
    PsiOr,
    PsiProp,
    PsiTrue,
    Somewhere,
    SourceSpan,
    SpatialDomain,
    Until,
    Verum,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<cmp><=|>=|<|>)
  | (?P<sym>[()\[\]{},;&|!-])
    """,
    re.VERBOSE,
)

RESERVED = {"true", "inf", "everywhere", "somewhere"}


class _Token:
    __slots__ = ("kind", "text", "start", "end", "line", "column")

    def __init__(self, kind, text, start, end, line, column):
        self.kind = kind
        self.text = text
        self.start = start
        self.end = end
        self.line = line
        self.column = column

    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end, self.line, self.column)


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {text[pos]!r}",
                SourceSpan(pos, pos + 1, line, col),
            )
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, chunk, pos, m.end(), line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(_Token("eof", "", len(text), len(text), line, col))
    return tokens


class _Parser:
    def __init__(self, text: str, constants: Mapping[str, float] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.constants = constants or {}

    # -- token plumbing

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.span())
        return self.next()

    def _span(self, start: _Token, end: _Token | None = None) -> SourceSpan:
        last = end or self.tokens[self.pos - 1]
        return SourceSpan(start.start, last.end, start.line, start.column)

    def _wrap(self, exc: FormulaError, span: SourceSpan) -> ParseError:
        return ParseError(str(exc), span)

    # -- numbers and small pieces

    def number(self, *, allow_inf: bool = False) -> float:
        tok = self.peek()
        sign = 1.0
        if tok.text == "-":
            self.next()
            sign = -1.0
            tok = self.peek()
        if tok.kind == "number":
            self.next()
            return sign * float(tok.text)
        if tok.kind == "ident":
            if tok.text == "inf":
                if not allow_inf:
                    raise ParseError("'inf' is only valid as a domain upper bound", tok.span())
                self.next()
                return sign * math.inf
            if tok.text in self.constants:
                self.next()
                return sign * float(self.constants[tok.text])
            raise ParseError(
                f"unknown constant {tok.text!r} (no entry in the constants table)", tok.span()
            )
        raise ParseError(f"expected a number, found {tok.text or 'end of input'!r}", tok.span())

    def cmp(self) -> str:
        tok = self.peek()
        if tok.kind != "cmp":
            raise ParseError(f"expected a comparison, found {tok.text or 'end of input'!r}", tok.span())
        self.next()
        return tok.text

    def interval(self) -> Interval:
        start = self.expect("[")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        close = self.expect("]")
        try:
            return Interval(lo, hi, span=self._span(start, close))
        except FormulaError as exc:
            raise self._wrap(exc, self._span(start, close)) from None

    def domain(self) -> SpatialDomain:
        start = self.expect("[")
        d1 = self.number()
        self.expect(",")
        d2 = self.number(allow_inf=True)
        self.expect(";")
        psi = self.psi()
        close = self.expect("]")
        try:
            return SpatialDomain(d1, d2, psi, span=self._span(start, close))
        except FormulaError as exc:
            raise self._wrap(exc, self._span(start, close)) from None

    # -- psi (location label conditions)

    def psi(self) -> PsiExpr:
        return self.psi_or()

    def psi_or(self) -> PsiExpr:
        start = self.peek()
        node = self.psi_and()
        while self.peek().text == "|":
            self.next()
            right = self.psi_and()
            node = PsiOr(node, right, span=self._span(start))
        return node

    def psi_and(self) -> PsiExpr:
        # conjunction is sugar: a & b == !(!a | !b)
        start = self.peek()
        node = self.psi_unary()
        while self.peek().text == "&":
            self.next()
            right = self.psi_unary()
            node = PsiNot(PsiOr(PsiNot(node), PsiNot(right)), span=self._span(start))
        return node

    def psi_unary(self) -> PsiExpr:
        tok = self.peek()
        if tok.text == "!":
            self.next()
            child = self.psi_unary()
            return PsiNot(child, span=self._span(tok))
        if tok.text == "(":
            self.next()
            node = self.psi()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.next()
            if tok.text == "true":
                return PsiTrue(span=tok.span())
            if tok.text in RESERVED:
                raise ParseError(f"{tok.text!r} is reserved and not a proposition", tok.span())
            return PsiProp(tok.text, span=tok.span())
        raise ParseError(
            f"expected a proposition, found {tok.text or 'end of input'!r}", tok.span()
        )

    # -- formulas

    def formula(self) -> Formula:
        return self.or_expr()

    def or_expr(self) -> Formula:
        start = self.peek()
        node = self.and_expr()
        while self.peek().text == "|":
            self.next()
            right = self.and_expr()
            node = Or(node, right, span=self._span(start))
        return node

    def and_expr(self) -> Formula:
        start = self.peek()
        node = self.until_expr()
        while self.peek().text == "&":
            self.next()
            right = self.until_expr()
            node = And(node, right, span=self._span(start))
        return node

    def until_expr(self) -> Formula:
        start = self.peek()
        node = self.unary()
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "U" and self.peek(1).text == "[":
            self.next()
            interval = self.interval()
            right = self.until_expr()
            node = Until(interval, node, right, span=self._span(start))
        return node

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.text == "!":
            self.next()
            child = self.unary()
            return Not(child, span=self._span(tok))
        return self.primary()

    def primary(self) -> Formula:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            node = self.formula()
            self.expect(")")
            return node
        if tok.kind == "ident":
            text = tok.text
            if text == "true":
                self.next()
                return Verum(span=tok.span())
            if text in ("G", "F") and self.peek(1).text == "[":
                return self._temporal(tok)
            if text == "A" and self.peek(1).text == "{":
                return self._aggregation(tok)
            if text == "C" and self.peek(1).text == "{":
                return self._counting(tok)
            if text in ("everywhere", "somewhere") and self.peek(1).text == "[":
                return self._spatial_quantifier(tok)
            if text in RESERVED:
                raise ParseError(f"{text!r} is reserved here", tok.span())
            return self._atom(tok)
        raise ParseError(
            f"expected a formula, found {tok.text or 'end of input'!r}", tok.span()
        )

    def _atom(self, tok: _Token) -> Formula:
        self.next()
        cmp = self.cmp()
        threshold = self.number()
        try:
            return Atom(tok.text, cmp, threshold, span=self._span(tok))
        except FormulaError as exc:
            raise self._wrap(exc, self._span(tok)) from None

    def _temporal(self, tok: _Token) -> Formula:
        self.next()
        interval = self.interval()
        self.expect("(")
        child = self.formula()
        self.expect(")")
        cls = Always if tok.text == "G" else Eventually
        return cls(interval, child, span=self._span(tok))

    def _agg_op(self) -> str:
        self.expect("{")
        op_tok = self.peek()
        if op_tok.kind != "ident" or op_tok.text not in AGG_OPS:
            raise ParseError(f"expected one of {AGG_OPS}, found {op_tok.text!r}", op_tok.span())
        self.next()
        self.expect("}")
        return op_tok.text

    def _aggregation(self, tok: _Token) -> Formula:
        self.next()
        op = self._agg_op()
        domain = self.domain()
        self.expect("(")
        var_tok = self.peek()
        if var_tok.kind != "ident" or var_tok.text in RESERVED:
            raise ParseError(f"expected a variable name, found {var_tok.text!r}", var_tok.span())
        self.next()
        cmp = self.cmp()
        threshold = self.number()
        self.expect(")")
        try:
            return Agg(op, domain, var_tok.text, cmp, threshold, span=self._span(tok))
        except FormulaError as exc:
            raise self._wrap(exc, self._span(tok)) from None

    def _counting(self, tok: _Token) -> Formula:
        self.next()
        op = self._agg_op()
        domain = self.domain()
        self.expect("(")
        child = self.formula()
        self.expect(")")
        cmp = self.cmp()
        threshold = self.number()
        try:
            return Count(op, domain, child, cmp, threshold, span=self._span(tok))
        except FormulaError as exc:
            raise self._wrap(exc, self._span(tok)) from None

    def _spatial_quantifier(self, tok: _Token) -> Formula:
        self.next()
        domain = self.domain()
        self.expect("(")
        child = self.formula()
        self.expect(")")
        cls = Everywhere if tok.text == "everywhere" else Somewhere
        return cls(domain, child, span=self._span(tok))


def parse_sastl(text: str, constants: Mapping[str, float] | None = None) -> Formula:
    """Parse formula text; named constants resolve through the given table.

    Raises ParseError with the offending source span on syntax errors and on
    structural violations (bad interval, threshold out of range).
    """
    parser = _Parser(text, constants)
    node = parser.formula()
    tail = parser.peek()
    if tail.kind != "eof":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.span())
    return node


# --- canonical formatting ----------------------------------------------------


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _fmt_psi(psi: PsiExpr) -> str:
    if isinstance(psi, PsiTrue):
        return "true"
    if isinstance(psi, PsiProp):
        return psi.name
    if isinstance(psi, PsiNot):
        return f"!({_fmt_psi(psi.child)})"
    return f"({_fmt_psi(psi.left)} | {_fmt_psi(psi.right)})"


def _fmt_domain(d: SpatialDomain) -> str:
    return f"[{_num(d.d1)},{_num(d.d2)}; {_fmt_psi(d.psi)}]"


def _fmt_interval(i: Interval) -> str:
    return f"[{_num(i.lo)},{_num(i.hi)}]"


def format_formula(f: Formula) -> str:
    """Deterministic text that re-parses to an identical tree.

    The formatter is not an optimizer: nested negations and sugar survive
    verbatim. Binary operators come out fully parenthesized.
    """
    if isinstance(f, Verum):
        return "true"
    if isinstance(f, Atom):
        return f"{f.variable} {f.cmp} {_num(f.threshold)}"
    if isinstance(f, Not):
        return f"!({format_formula(f.child)})"
    if isinstance(f, And):
        return f"({format_formula(f.left)} & {format_formula(f.right)})"
    if isinstance(f, Or):
        return f"({format_formula(f.left)} | {format_formula(f.right)})"
    if isinstance(f, Until):
        return (
            f"({format_formula(f.left)} U{_fmt_interval(f.interval)} "
            f"{format_formula(f.right)})"
        )
    if isinstance(f, Always):
        return f"G{_fmt_interval(f.interval)}({format_formula(f.child)})"
    if isinstance(f, Eventually):
        return f"F{_fmt_interval(f.interval)}({format_formula(f.child)})"
    if isinstance(f, Agg):
        return (
            f"A{{{f.op}}}{_fmt_domain(f.domain)}"
            f"({f.variable} {f.cmp} {_num(f.threshold)})"
        )
    if isinstance(f, Count):
        return (
            f"(C{{{f.op}}}{_fmt_domain(f.domain)}"
            f"({format_formula(f.child)}) {f.cmp} {_num(f.threshold)})"
        )
    if isinstance(f, Everywhere):
        return f"everywhere{_fmt_domain(f.domain)}({format_formula(f.child)})"
    if isinstance(f, Somewhere):
        return f"somewhere{_fmt_domain(f.domain)}({format_formula(f.child)})"
    raise FormulaError(f"not a formula node: {f!r}")

"""Formula syntax tree, derived-operator rewriting, and structural metadata.

The core grammar is atoms, negation, conjunction, bounded until, spatial
aggregation, and spatial counting. Disjunction, always, eventually,
everywhere, and somewhere are sugar; `desugar` rewrites them away before
evaluation. Comparisons are drawn from {<, <=, >, >=}; equality is excluded
because its satisfaction margin is degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .errors import FormulaError

CMP_OPS = ("<", "<=", ">", ">=")
AGG_OPS = ("max", "min", "sum", "avg")


@dataclass(frozen=True)
class SourceSpan:
    """Byte offsets plus line/column of a node in its source text."""

    start: int
    end: int
    line: int
    column: int

    def __post_init__(self):
        if self.start > self.end:
            raise FormulaError(f"span start {self.start} > end {self.end}")


def _span_field():
    # Diagnostics only: spans never participate in equality or hashing,
    # so parsed and hand-built trees compare equal.
    return field(default=None, compare=False, repr=False)


# --- location-condition expressions (psi) ---------------------------------


@dataclass(frozen=True)
class PsiTrue:
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class PsiProp:
    name: str
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class PsiNot:
    child: "PsiExpr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class PsiOr:
    left: "PsiExpr"
    right: "PsiExpr"
    span: SourceSpan | None = _span_field()


PsiExpr = Union[PsiTrue, PsiProp, PsiNot, PsiOr]


@dataclass(frozen=True)
class SpatialDomain:
    """Distance band [d1, d2] around the anchor plus a label condition.

    d2 may be +inf (whole domain). d1 == d2 is allowed as a point annulus.
    """

    d1: float
    d2: float
    psi: PsiExpr = PsiTrue()
    span: SourceSpan | None = _span_field()

    def __post_init__(self):
        if not (self.d1 >= 0 and not math.isnan(self.d1)):
            raise FormulaError(f"domain lower bound must be >= 0, got {self.d1}")
        if math.isnan(self.d2) or self.d2 < self.d1:
            raise FormulaError(f"domain bounds must satisfy d1 <= d2, got [{self.d1}, {self.d2}]")


EVERYWHERE_DOMAIN = SpatialDomain(0.0, math.inf, PsiTrue())


@dataclass(frozen=True)
class Interval:
    """Temporal interval [lo, hi] with 0 <= lo <= hi < inf."""

    lo: float
    hi: float
    span: SourceSpan | None = _span_field()

    def __post_init__(self):
        if not (self.lo >= 0 and self.hi >= self.lo and math.isfinite(self.hi)):
            raise FormulaError(f"bad temporal interval [{self.lo}, {self.hi}]")


# --- formula nodes ----------------------------------------------------------


def _check_cmp(cmp: str):
    if cmp not in CMP_OPS:
        raise FormulaError(f"comparison must be one of {CMP_OPS}, got {cmp!r}")


def _check_op(op: str):
    if op not in AGG_OPS:
        raise FormulaError(f"aggregation op must be one of {AGG_OPS}, got {op!r}")


@dataclass(frozen=True)
class Verum:
    """The always-true formula (used as the left arm of derived eventually)."""

    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Atom:
    variable: str
    cmp: str
    threshold: float
    span: SourceSpan | None = _span_field()

    def __post_init__(self):
        _check_cmp(self.cmp)
        if math.isnan(self.threshold):
            raise FormulaError("atom threshold cannot be NaN")


@dataclass(frozen=True)
class Not:
    child: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Always:
    interval: Interval
    child: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    child: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Agg:
    """Aggregate a variable over the spatial domain and compare: op(values) cmp c."""

    op: str
    domain: SpatialDomain
    variable: str
    cmp: str
    threshold: float
    span: SourceSpan | None = _span_field()

    def __post_init__(self):
        _check_op(self.op)
        _check_cmp(self.cmp)
        if math.isnan(self.threshold):
            raise FormulaError("aggregation threshold cannot be NaN")


@dataclass(frozen=True)
class Count:
    """Compare op({0/1 child satisfaction per domain location}) against c.

    Threshold validity depends on the comparison orientation: thresholds that
    make the comparison trivially true or false are rejected outright.
    For op in {min, max, avg}: c in [0, 1) under {>, <=}, c in (0, 1] under
    {>=, <}. For op=sum: c >= 0 under {>, <=}, c > 0 under {>=, <}; the upper
    bound (the location count) is checked at deployment validation.
    """

    op: str
    domain: SpatialDomain
    child: "Formula"
    cmp: str
    threshold: float
    span: SourceSpan | None = _span_field()

    def __post_init__(self):
        _check_op(self.op)
        _check_cmp(self.cmp)
        c = self.threshold
        if math.isnan(c):
            raise FormulaError("counting threshold cannot be NaN")
        strict_low = self.cmp in (">=", "<")
        if self.op == "sum":
            ok = c > 0 if strict_low else c >= 0
            rng = "(0, n]" if strict_low else "[0, n]"
        else:
            ok = 0 < c <= 1 if strict_low else 0 <= c < 1
            rng = "(0, 1]" if strict_low else "[0, 1)"
        if not ok:
            raise FormulaError(
                f"counting threshold {c} outside valid range {rng} for "
                f"op={self.op!r} cmp={self.cmp!r}"
            )


@dataclass(frozen=True)
class Everywhere:
    domain: SpatialDomain
    child: "Formula"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Somewhere:
    domain: SpatialDomain
    child: "Formula"
    span: SourceSpan | None = _span_field()


Formula = Union[
    Verum, Atom, Not, And, Or, Until, Always, Eventually, Agg, Count, Everywhere, Somewhere
]

CORE_NODES = (Verum, Atom, Not, And, Until, Agg, Count)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Not):
        return (f.child,)
    if isinstance(f, (And, Or)):
        return (f.left, f.right)
    if isinstance(f, Until):
        return (f.left, f.right)
    if isinstance(f, (Always, Eventually)):
        return (f.child,)
    if isinstance(f, (Count, Everywhere, Somewhere)):
        return (f.child,)
    return ()


def desugar(f: Formula) -> Formula:
    """Rewrite derived operators into the core grammar. Idempotent.

    eventually -> true-until, always -> not-eventually-not,
    everywhere -> counting-min > 0, somewhere -> counting-max > 0,
    or -> negated conjunction of negations.
    """
    if isinstance(f, (Verum, Atom)):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.child))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Not(And(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Until):
        return Until(f.interval, desugar(f.left), desugar(f.right))
    if isinstance(f, Eventually):
        return Until(f.interval, Verum(), desugar(f.child))
    if isinstance(f, Always):
        return Not(Until(f.interval, Verum(), Not(desugar(f.child))))
    if isinstance(f, Agg):
        return f
    if isinstance(f, Count):
        return Count(f.op, f.domain, desugar(f.child), f.cmp, f.threshold)
    if isinstance(f, Everywhere):
        return Count("min", f.domain, desugar(f.child), ">", 0.0)
    if isinstance(f, Somewhere):
        return Count("max", f.domain, desugar(f.child), ">", 0.0)
    raise FormulaError(f"not a formula node: {f!r}")


def horizon(f: Formula) -> float:
    """Farthest future time (relative to the anchor) the verdict can depend on."""
    if isinstance(f, (Verum, Atom, Agg)):
        return 0.0
    if isinstance(f, Not):
        return horizon(f.child)
    if isinstance(f, (And, Or)):
        return max(horizon(f.left), horizon(f.right))
    if isinstance(f, Until):
        return f.interval.hi + max(horizon(f.left), horizon(f.right))
    if isinstance(f, (Always, Eventually)):
        return f.interval.hi + horizon(f.child)
    if isinstance(f, (Count, Everywhere, Somewhere)):
        return horizon(f.child)
    raise FormulaError(f"not a formula node: {f!r}")


def psi_propositions(psi: PsiExpr) -> set[str]:
    if isinstance(psi, PsiProp):
        return {psi.name}
    if isinstance(psi, PsiNot):
        return psi_propositions(psi.child)
    if isinstance(psi, PsiOr):
        return psi_propositions(psi.left) | psi_propositions(psi.right)
    return set()


def _domains(f: Formula):
    if isinstance(f, (Agg, Count, Everywhere, Somewhere)):
        yield f.domain, f
    for c in children(f):
        yield from _domains(c)


def _atoms(f: Formula):
    if isinstance(f, Atom):
        yield f
    if isinstance(f, Agg):
        yield f
    for c in children(f):
        yield from _atoms(c)


def validate_formula(
    f: Formula,
    *,
    variables: "set[str] | None" = None,
    propositions: "set[str] | None" = None,
    location_count: "int | None" = None,
) -> None:
    """Check a formula against a concrete deployment.

    Raises ValidationError naming the offending node's span. Structural
    constraints (comparison symbols, interval order, threshold ranges) are
    already enforced at construction; this adds the checks that need the
    deployment: known variables, known propositions, and the upper bound on
    counting-sum thresholds.
    """
    from .errors import ValidationError

    if variables is not None:
        for node in _atoms(f):
            if node.variable not in variables:
                raise ValidationError(f"unknown variable {node.variable!r}", node.span)
    for domain, owner in _domains(f):
        if propositions is not None:
            missing = psi_propositions(domain.psi) - propositions
            if missing:
                raise ValidationError(
                    f"unknown proposition(s) {sorted(missing)!r}", domain.span or owner.span
                )
        if (
            location_count is not None
            and isinstance(owner, Count)
            and owner.op == "sum"
            and owner.threshold > location_count
        ):
            raise ValidationError(
                f"counting-sum threshold {owner.threshold} exceeds the "
                f"{location_count} available locations",
                owner.span,
            )


# --- debugging dump ---------------------------------------------------------


def psi_to_json(psi: PsiExpr) -> dict:
    if isinstance(psi, PsiTrue):
        return {"node": "true"}
    if isinstance(psi, PsiProp):
        return {"node": "proposition", "name": psi.name}
    if isinstance(psi, PsiNot):
        return {"node": "not", "child": psi_to_json(psi.child)}
    return {"node": "or", "left": psi_to_json(psi.left), "right": psi_to_json(psi.right)}


def formula_to_json(f: Formula) -> dict:
    """Tagged-union dump of the tree, for debugging and reports."""
    if isinstance(f, Verum):
        return {"node": "true"}
    if isinstance(f, Atom):
        return {"node": "atom", "variable": f.variable, "cmp": f.cmp, "threshold": f.threshold}
    if isinstance(f, Not):
        return {"node": "not", "child": formula_to_json(f.child)}
    if isinstance(f, (And, Or)):
        tag = "and" if isinstance(f, And) else "or"
        return {"node": tag, "left": formula_to_json(f.left), "right": formula_to_json(f.right)}
    if isinstance(f, Until):
        return {
            "node": "until",
            "interval": [f.interval.lo, f.interval.hi],
            "left": formula_to_json(f.left),
            "right": formula_to_json(f.right),
        }
    if isinstance(f, (Always, Eventually)):
        tag = "always" if isinstance(f, Always) else "eventually"
        return {
            "node": tag,
            "interval": [f.interval.lo, f.interval.hi],
            "child": formula_to_json(f.child),
        }
    if isinstance(f, Agg):
        return {
            "node": "agg",
            "op": f.op,
            "domain": _domain_json(f.domain),
            "variable": f.variable,
            "cmp": f.cmp,
            "threshold": f.threshold,
        }
    if isinstance(f, Count):
        return {
            "node": "count",
            "op": f.op,
            "domain": _domain_json(f.domain),
            "child": formula_to_json(f.child),
            "cmp": f.cmp,
            "threshold": f.threshold,
        }
    if isinstance(f, (Everywhere, Somewhere)):
        tag = "everywhere" if isinstance(f, Everywhere) else "somewhere"
        return {"node": tag, "domain": _domain_json(f.domain), "child": formula_to_json(f.child)}
    raise FormulaError(f"not a formula node: {f!r}")


def _domain_json(d: SpatialDomain) -> dict:
    return {"d1": d.d1, "d2": None if math.isinf(d.d2) else d.d2, "psi": psi_to_json(d.psi)}

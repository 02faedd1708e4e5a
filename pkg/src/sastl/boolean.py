"""Boolean satisfaction evaluation with cost-driven conjunction ordering.

Verdicts carry a vacuous flag: an undefined atom or an empty spatial
domain satisfies by definition, and the flag lets callers tell such
satisfaction apart from the substantive kind. Conjunctions evaluate their
cheaper side first (per the monitoring cost function) so a failing guard
skips expensive spatial work; the result is identical to the unordered
conjunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import Counters, EvalContext, check_horizon, window_offsets
from .errors import FormulaError
from .formula import (
    Agg,
    And,
    Atom,
    Count,
    Formula,
    Interval,
    Not,
    SpatialDomain,
    Until,
    Verum,
    desugar,
)
from .quantitative import selection_rank
from .signal import Labeling, SpatioTemporalSignal
from .spatial import DistanceIndex, de_scan_ids


@dataclass(frozen=True)
class Verdict:
    """Boolean satisfaction; vacuous implies satisfied."""

    satisfied: bool
    vacuous: bool = False

    def __post_init__(self):
        if self.vacuous and not self.satisfied:
            raise ValueError("a vacuous verdict must be satisfied")

    def __bool__(self) -> bool:
        return self.satisfied


class CostModel:
    """Monitoring cost estimates, memoized per (formula node, anchor location).

    Predicates cost 1, negation adds 1, conjunction and until add their
    sides, aggregation costs the domain size, and counting costs the domain
    size times the child cost. Probing domain sizes here does not touch the
    evaluation counters: counters measure signal evaluation work only.
    """

    def __init__(self, index: DistanceIndex, labeling: Labeling):
        self._index = index
        self._labeling = labeling
        self._memo: dict[tuple[Formula, int], float] = {}

    def cost(self, f: Formula, loc_index: int) -> float:
        key = (f, loc_index)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        value = self._compute(f, loc_index)
        self._memo[key] = value
        return value

    def _compute(self, f: Formula, loc: int) -> float:
        if isinstance(f, (Verum, Atom)):
            return 1.0
        if isinstance(f, Not):
            return 1.0 + self.cost(f.child, loc)
        if isinstance(f, (And, Until)):
            return self.cost(f.left, loc) + self.cost(f.right, loc)
        if isinstance(f, Agg):
            return float(max(1, self._domain_size(f.domain, loc)))
        if isinstance(f, Count):
            # the child is evaluated once per domain location
            return max(1, self._domain_size(f.domain, loc)) * self.cost(f.child, loc)
        raise FormulaError(f"cost is defined on core formulas, got {f!r}")

    def _domain_size(self, domain: SpatialDomain, loc: int) -> int:
        return len(de_scan_ids(self._index, self._labeling, loc, domain))


def cost(
    f: Formula,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    model: CostModel | None = None,
) -> float:
    """Monitoring cost of the (desugared) formula anchored at the location."""
    model = model or CostModel(index, labeling)
    return model.cost(desugar(f), index.node_index(location))


def monitor_b(
    f: Formula,
    signal: SpatioTemporalSignal,
    t: int,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    *,
    reorder: bool = True,
    counters: Counters | None = None,
    parallel=None,
    cost_model: CostModel | None = None,
) -> Verdict:
    """Boolean satisfaction at anchor (sample t, location).

    Accepts sugared formulas. Raises IncompleteTraceError when the horizon
    extends past the trace end (offline traces must cover every anchor's
    full window).
    """
    core = desugar(f)
    signal.grid.check_index(t)
    check_horizon(core, signal.grid, t)
    if reorder and cost_model is None:
        cost_model = CostModel(index, labeling)
    ctx = EvalContext(
        signal, index, labeling,
        counters=counters, cost_model=cost_model, reorder=reorder, parallel=parallel,
    )
    satisfied, influenced = sat(core, ctx, t, index.node_index(location))
    return Verdict(satisfied, satisfied and influenced)


def sat(f: Formula, ctx: EvalContext, t: int, loc: int) -> tuple[bool, bool]:
    """Recursive satisfaction over the core grammar. Internal.

    Returns (satisfied, vacuous-influence). The flag marks that a vacuity
    rule (undefined atom, empty location set) directly produced part of the
    satisfying evidence. It attaches to satisfied verdicts only and does not
    cross negation, which keeps verdicts byte-identical no matter the
    conjunction evaluation order.
    """
    if isinstance(f, Verum):
        return True, False
    if isinstance(f, Atom):
        ctx.counters.atom_evals += 1
        v = ctx.value(t, loc, f.variable)
        if math.isnan(v):
            return True, True  # undefined atom: vacuously true
        return _compare(v, f.cmp, f.threshold), False
    if isinstance(f, Not):
        s, _ = sat(f.child, ctx, t, loc)
        return not s, False
    if isinstance(f, And):
        return _and(f, ctx, t, loc)
    if isinstance(f, Until):
        return _until_b(f, ctx, t, loc)
    if isinstance(f, Agg):
        return _aggregate_b(f.variable, f.cmp, f.threshold, f.op, f.domain, ctx, t, loc)
    if isinstance(f, Count):
        return _counting_b(f.child, f.cmp, f.threshold, f.op, f.domain, ctx, t, loc)
    raise FormulaError(f"formula not in core form: {f!r}")


def _compare(value: float, cmp: str, threshold: float) -> bool:
    if cmp == "<":
        return value < threshold
    if cmp == "<=":
        return value <= threshold
    if cmp == ">":
        return value > threshold
    return value >= threshold


def _and(f: And, ctx: EvalContext, t: int, loc: int) -> tuple[bool, bool]:
    first, second = f.left, f.right
    if ctx.reorder and ctx.cost_model is not None:
        # cheaper side first; ties keep the written order
        if ctx.cost_model.cost(f.right, loc) < ctx.cost_model.cost(f.left, loc):
            first, second = f.right, f.left
    s1, i1 = sat(first, ctx, t, loc)
    if not s1:
        ctx.counters.skipped_conjuncts += 1
        return False, False
    s2, i2 = sat(second, ctx, t, loc)
    return s2, (i1 or i2) if s2 else False


def _until_b(f: Until, ctx: EvalContext, t: int, loc: int) -> tuple[bool, bool]:
    """Witness scan: some window sample satisfies the right side while the
    left holds at every sample from the anchor through the witness."""
    lo, hi = window_offsets(f.interval.lo, f.interval.hi, ctx.signal.grid.step)
    prefix_influenced = False
    verified_through = -1
    for off in range(lo, hi + 1):
        while verified_through < off:
            s1, i1 = sat(f.left, ctx, t + verified_through + 1, loc)
            if not s1:
                # the left side broke: no later witness can recover
                return False, False
            prefix_influenced = prefix_influenced or i1
            verified_through += 1
        s2, i2 = sat(f.right, ctx, t + off, loc)
        if s2:
            # earliest-witness evidence: the right side here plus the left
            # side at every sample from the anchor through the witness
            return True, i2 or prefix_influenced
    return False, False


def _aggregate_b(
    variable: str, cmp: str, c: float, op: str, domain: SpatialDomain,
    ctx: EvalContext, t: int, loc: int,
) -> tuple[bool, bool]:
    from .quantitative import _collect_aggregate_values

    values = _collect_aggregate_values(ctx, variable, domain, t, loc)
    if not values:
        return True, True  # nothing to aggregate: vacuously true
    if op == "max":
        agg = max(values)
    elif op == "min":
        agg = min(values)
    elif op == "sum":
        agg = sum(values)
    else:
        agg = sum(values) / len(values)
    return _compare(agg, cmp, c), False


def _counting_b(
    child: Formula, cmp: str, c: float, op: str, domain: SpatialDomain,
    ctx: EvalContext, t: int, loc: int,
) -> tuple[bool, bool]:
    from . import parallel as par

    ctx.counters.descan_calls += 1
    ids = de_scan_ids(ctx.index, ctx.labeling, loc, domain)
    if len(ids) == 0:
        return True, True  # empty location set: vacuously true
    results = par.map_spatial(ctx, par.CountBTask(child), t, ids)
    count = sum(1 for s, _ in results if s)
    satisfied = count_satisfies(op, cmp, c, count, len(ids))
    return satisfied, satisfied and any(i for _, i in results)


def count_satisfies(op: str, cmp: str, c: float, count: int, total: int) -> bool:
    """Does `op(per-location 0/1 indicators) cmp c` hold with this many hits?

    Evaluated in the integer domain (how many satisfying locations the
    threshold demands), which is exact where a float op(...) comparison
    could wobble at boundaries like 0.3 of 10 locations.
    """
    if cmp in ("<", "<="):
        dual = ">=" if cmp == "<" else ">"
        return not count_satisfies(op, dual, c, count, total)
    if op == "max":
        needed = 1  # some location satisfies (valid thresholds sit below 1)
    elif op == "min":
        needed = total  # every location satisfies
    else:
        target = c if op == "sum" else c * total
        needed = selection_rank(target, cmp)
    return count >= needed


# --- public single-operator entry points -------------------------------------


def until_b(
    interval: Interval,
    f1: Formula,
    f2: Formula,
    signal: SpatioTemporalSignal,
    t: int,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    **kwargs,
) -> Verdict:
    return monitor_b(Until(interval, f1, f2), signal, t, location, index, labeling, **kwargs)


def aggregate_b(
    variable: str,
    cmp: str,
    c: float,
    op: str,
    domain: SpatialDomain,
    signal: SpatioTemporalSignal,
    t: int,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    **kwargs,
) -> Verdict:
    return monitor_b(
        Agg(op, domain, variable, cmp, c), signal, t, location, index, labeling, **kwargs
    )


def counting_b(
    f: Formula,
    cmp: str,
    c: float,
    op: str,
    domain: SpatialDomain,
    signal: SpatioTemporalSignal,
    t: int,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    **kwargs,
) -> Verdict:
    return monitor_b(
        Count(op, domain, f, cmp, c), signal, t, location, index, labeling, **kwargs
    )


def and_reordered(
    f1: Formula,
    f2: Formula,
    signal: SpatioTemporalSignal,
    t: int,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    **kwargs,
) -> Verdict:
    """Conjunction with the cheaper side checked first. Same verdict as And."""
    kwargs.setdefault("reorder", True)
    return monitor_b(And(f1, f2), signal, t, location, index, labeling, **kwargs)

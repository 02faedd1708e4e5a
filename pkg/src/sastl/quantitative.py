"""Quantitative (robustness) evaluation.

The satisfaction degree is an extended real: positive means satisfied with
that margin, negative violated, +inf marks vacuous satisfaction (undefined
atom, empty location set), -inf an infeasible counting threshold. Counting
robustness is an order statistic: the k-th largest child robustness, where
k is the number of satisfying locations the threshold demands.
"""

from __future__ import annotations

import heapq
import math

from .engine import Counters, EvalContext, check_horizon, snap_to_int, window_offsets
from .errors import FormulaError
from .formula import (
    Agg,
    And,
    Atom,
    Count,
    Formula,
    Not,
    SpatialDomain,
    Until,
    Verum,
    desugar,
)
from .signal import Labeling, SpatioTemporalSignal
from .spatial import DistanceIndex, de_scan_ids

INF = math.inf


def monitor_q(
    f: Formula,
    signal: SpatioTemporalSignal,
    t: int,
    location: str,
    index: DistanceIndex,
    labeling: Labeling,
    *,
    counters: Counters | None = None,
    parallel=None,
) -> float:
    """Robustness of the formula at anchor (sample t, location).

    Accepts sugared formulas; they are rewritten to the core grammar first.
    Raises IncompleteTraceError when the horizon extends past the trace end.
    """
    core = desugar(f)
    signal.grid.check_index(t)
    check_horizon(core, signal.grid, t)
    ctx = EvalContext(signal, index, labeling, counters=counters, parallel=parallel)
    return rho(core, ctx, t, ctx.index.node_index(location))


def rho(f: Formula, ctx: EvalContext, t: int, loc: int) -> float:
    """Recursive robustness over the core grammar. Internal."""
    if isinstance(f, Verum):
        return INF
    if isinstance(f, Atom):
        ctx.counters.atom_evals += 1
        v = ctx.value(t, loc, f.variable)
        if math.isnan(v):
            return INF  # undefined atom mirrors Boolean vacuous truth
        if f.cmp in (">", ">="):
            return v - f.threshold
        return f.threshold - v
    if isinstance(f, Not):
        return -rho(f.child, ctx, t, loc)
    if isinstance(f, And):
        return min(rho(f.left, ctx, t, loc), rho(f.right, ctx, t, loc))
    if isinstance(f, Until):
        return _until_q(f, ctx, t, loc)
    if isinstance(f, Agg):
        return aggregate_q(
            f.variable, f.cmp, f.threshold, f.op, f.domain, ctx.signal, t,
            ctx.index.nodes[loc], ctx.index, ctx.labeling, _ctx=ctx,
        )
    if isinstance(f, Count):
        return counting_q(
            f.child, f.cmp, f.threshold, f.op, f.domain, ctx.signal, t,
            ctx.index.nodes[loc], ctx.index, ctx.labeling, _ctx=ctx,
        )
    raise FormulaError(f"formula not in core form: {f!r}")


def _until_q(f: Until, ctx: EvalContext, t: int, loc: int) -> float:
    lo, hi = window_offsets(f.interval.lo, f.interval.hi, ctx.signal.grid.step)
    best = -INF
    left_inf = INF
    for off in range(0, hi + 1):
        left_inf = min(left_inf, rho(f.left, ctx, t + off, loc))
        if off >= lo:
            best = max(best, min(rho(f.right, ctx, t + off, loc), left_inf))
    return best


def aggregate_q(
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
    *,
    _ctx: EvalContext | None = None,
) -> float:
    """Robustness of op(defined values of the variable over the domain) cmp c.

    Empty value set: +inf. For op=sum the margin is normalized by the number
    of contributing values, keeping a unit perturbation of every sensor a
    unit change of robustness; max/min/avg subtract the threshold directly.
    """
    ctx = _ctx or EvalContext(signal, index, labeling)
    values = _collect_aggregate_values(ctx, variable, domain, t, index.node_index(location))
    if not values:
        return INF
    if op == "sum":
        margin = (sum(values) - c) / len(values)
    elif op == "avg":
        margin = sum(values) / len(values) - c
    elif op == "max":
        margin = max(values) - c
    else:
        margin = min(values) - c
    return margin if cmp in (">", ">=") else -margin


def _collect_aggregate_values(
    ctx: EvalContext, variable: str, domain: SpatialDomain, t: int, loc: int
) -> list[float]:
    from . import parallel as par

    ctx.counters.descan_calls += 1
    ids = de_scan_ids(ctx.index, ctx.labeling, loc, domain)
    return par.map_spatial(ctx, par.AggValuesTask(variable), t, ids)


def counting_q(
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
    *,
    _ctx: EvalContext | None = None,
) -> float:
    """Robustness of the counting operator over child robustness values.

    op=max/min take the extreme child robustness. op=sum/avg select the k-th
    largest child robustness where k is the satisfying-location count the
    threshold demands; k beyond the location count yields -inf (infeasible).
    A comparison pointing downward ({<, <=}) negates the upward value.
    An empty location set is vacuous: +inf regardless of the comparison.
    """
    ctx = _ctx or EvalContext(signal, index, labeling)
    core = desugar(f)
    values = _collect_counting_values(ctx, core, domain, t, index.node_index(location))
    return counting_robustness_from_values(op, cmp, c, values)


def _collect_counting_values(
    ctx: EvalContext, core: Formula, domain: SpatialDomain, t: int, loc: int
) -> list[float]:
    from . import parallel as par

    ctx.counters.descan_calls += 1
    ids = de_scan_ids(ctx.index, ctx.labeling, loc, domain)
    return par.map_spatial(ctx, par.CountQTask(core), t, ids)


def counting_robustness_from_values(op: str, cmp: str, c: float, values: list[float]) -> float:
    """Counting robustness from the per-location child robustness multiset."""
    if not values:
        return INF
    if cmp in (">", ">="):
        return _counting_upward(op, cmp, c, values)
    # c-downward comparison is the negation of its upward dual:
    # (count < c) == not (count >= c), (count <= c) == not (count > c)
    dual = ">=" if cmp == "<" else ">"
    return -_counting_upward(op, dual, c, values)


def _counting_upward(op: str, cmp: str, c: float, values: list[float]) -> float:
    if op == "max":
        return max(values)
    if op == "min":
        return min(values)
    target = c if op == "sum" else c * len(values)
    k = selection_rank(target, cmp)
    return kth_largest(values, k)


def selection_rank(target: float, cmp: str) -> int:
    """Satisfying-location count demanded by `count cmp target`.

    `>`: the smallest integer strictly above the target. `>=`: the smallest
    integer at or above it, and at least 1. Float noise within 1e-9 of an
    integer is snapped first so thresholds like 0.3 of 10 locations behave
    exactly.
    """
    target = snap_to_int(target)
    if cmp == ">":
        return math.floor(target) + 1
    if cmp == ">=":
        return max(1, math.ceil(target))
    raise FormulaError(f"selection rank defined for upward comparisons, got {cmp!r}")


def kth_largest(values: list[float], k: int) -> float:
    """k-th largest element (1-based); -inf when k exceeds the multiset size."""
    if k < 1:
        raise FormulaError(f"selection rank must be >= 1, got {k}")
    if k > len(values):
        return -INF
    return heapq.nlargest(k, values)[-1]

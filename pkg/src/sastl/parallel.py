"""Task-pool parallel evaluation of spatial operators.

The location set of the outermost spatial operator is split into contiguous
chunks and handed to worker processes; workers evaluate the per-location
subproblem and ship raw values back, and the reduction (fold, count, or
order-statistic selection) always happens centrally in the parent. That
keeps results bitwise identical to the sequential path no matter the worker
count or scheduling. Nested spatial operators stay sequential inside a
worker to avoid pool starvation.

Worker processes are forked per fan-out so they inherit the immutable
signal, index, and labeling by copy-on-write instead of pickling; only
chunk bounds travel to workers and only value lists and counters travel
back.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .engine import Counters, EvalContext
from .errors import ConfigError, EvaluationError
from .formula import Formula

try:
    _MP = multiprocessing.get_context("fork")
except ValueError:  # platform without fork: evaluate sequentially instead
    _MP = None


@dataclass(frozen=True)
class ParallelConfig:
    """Worker pool shape: pool size and the minimum fan-out size worth it."""

    worker_count: int = 1
    parallel_threshold: int = 64

    def __post_init__(self):
        if self.worker_count < 1:
            raise ConfigError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.parallel_threshold < 1:
            raise ConfigError(
                f"parallel_threshold must be >= 1, got {self.parallel_threshold}"
            )


@dataclass(frozen=True)
class AggValuesTask:
    """Collect defined values of a variable at each location."""

    variable: str


@dataclass(frozen=True)
class CountBTask:
    """Boolean-evaluate a core subformula at each location."""

    formula: Formula


@dataclass(frozen=True)
class CountQTask:
    """Robustness-evaluate a core subformula at each location."""

    formula: Formula


def map_spatial(ctx: EvalContext, task, t: int, ids: np.ndarray) -> list:
    """Evaluate the task at every location id, in id order.

    Fans out to worker processes when a pool is configured, the location set
    is at least the threshold, and we are not already inside a worker;
    otherwise runs sequentially. Results are identical either way.
    """
    cfg: ParallelConfig | None = ctx.parallel
    n = len(ids)
    if (
        cfg is None
        or cfg.worker_count <= 1
        or ctx.in_worker
        or n < cfg.parallel_threshold
        or _MP is None
    ):
        ctx.counters.sequential_spatial_ops += 1
        out = []
        for i in ids:
            out.extend(_eval_one(task, ctx, t, int(i)))
        return out

    ctx.counters.parallel_fanouts += 1
    global _FORK_PAYLOAD
    ids = np.ascontiguousarray(ids)
    bounds = _chunk_bounds(n, cfg.worker_count)
    _FORK_PAYLOAD = (task, ctx.signal, ctx.index, ctx.labeling, ctx.reorder, t, ids)
    try:
        with _MP.Pool(processes=cfg.worker_count) as pool:
            parts = pool.map(_run_chunk, bounds)
    finally:
        _FORK_PAYLOAD = None

    out = []
    for part in parts:
        ctx.counters.merge(part["counters"])
        if part["error"] is not None:
            location, cause = part["error"]
            raise EvaluationError(location, cause)
        out.extend(part["values"])
    return out


def _eval_one(task, ctx: EvalContext, t: int, loc: int) -> list:
    """Per-location payload: zero or one aggregate value, or one result."""
    ctx.counters.spatial_child_evals += 1
    if isinstance(task, AggValuesTask):
        v = ctx.value(t, loc, task.variable)
        return [] if math.isnan(v) else [float(v)]
    if isinstance(task, CountBTask):
        from .boolean import sat

        return [sat(task.formula, ctx, t, loc)]
    if isinstance(task, CountQTask):
        from .quantitative import rho

        return [rho(task.formula, ctx, t, loc)]
    raise TypeError(f"unknown spatial task {task!r}")


def _chunk_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    base, extra = divmod(n, parts)
    bounds = []
    start = 0
    for i in range(parts):
        size = base + (1 if i < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


# Set in the parent immediately before forking the pool; workers inherit it.
_FORK_PAYLOAD = None


def _run_chunk(bounds: tuple[int, int]) -> dict:
    task, signal, index, labeling, reorder, t, ids = _FORK_PAYLOAD
    counters = Counters()
    ctx = EvalContext(
        signal, index, labeling,
        counters=counters, reorder=reorder, parallel=None, in_worker=True,
    )
    if reorder:
        from .boolean import CostModel

        ctx.cost_model = CostModel(index, labeling)
    lo, hi = bounds
    values: list = []
    for i in ids[lo:hi]:
        loc = int(i)
        try:
            values.extend(_eval_one(task, ctx, t, loc))
        except Exception as exc:  # surfaced in the parent, naming the location
            return {
                "values": [],
                "counters": counters,
                "error": (index.nodes[loc], repr(exc)),
            }
    return {"values": values, "counters": counters, "error": None}


# --- spec-level entry points for a single parallel spatial operator ---------


def counting_parallel(
    f: Formula,
    cmp: str,
    c: float,
    op: str,
    domain,
    signal,
    t: int,
    location: str,
    index,
    labeling,
    cfg: ParallelConfig,
    *,
    quantitative: bool = False,
    counters: Counters | None = None,
):
    """Counting operator evaluated through the task pool.

    Returns a Verdict (default) or a robustness float (quantitative=True),
    identical to the sequential counting path.
    """
    from .boolean import monitor_b
    from .formula import Count
    from .quantitative import monitor_q

    node = Count(op, domain, f, cmp, c)
    if quantitative:
        return monitor_q(node, signal, t, location, index, labeling,
                         counters=counters, parallel=cfg)
    return monitor_b(node, signal, t, location, index, labeling,
                     counters=counters, parallel=cfg)


def aggregate_parallel(
    variable: str,
    cmp: str,
    c: float,
    op: str,
    domain,
    signal,
    t: int,
    location: str,
    index,
    labeling,
    cfg: ParallelConfig,
    *,
    quantitative: bool = False,
    counters: Counters | None = None,
):
    """Aggregation operator evaluated through the task pool."""
    from .boolean import monitor_b
    from .formula import Agg
    from .quantitative import monitor_q

    node = Agg(op, domain, variable, cmp, c)
    if quantitative:
        return monitor_q(node, signal, t, location, index, labeling,
                         counters=counters, parallel=cfg)
    return monitor_b(node, signal, t, location, index, labeling,
                     counters=counters, parallel=cfg)

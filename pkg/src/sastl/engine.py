"""Shared evaluation context, counters, and numeric helpers.

Internal to the evaluators; the public monitoring entry points live in
`boolean` and `quantitative`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import IncompleteTraceError
from .formula import Formula, horizon
from .signal import Labeling, SampleGrid, SpatioTemporalSignal
from .spatial import DistanceIndex

_GRID_TOL = 1e-9


@dataclass
class Counters:
    """Work counters; merged across parallel workers after the barrier."""

    atom_evals: int = 0
    descan_calls: int = 0
    spatial_child_evals: int = 0
    parallel_fanouts: int = 0
    sequential_spatial_ops: int = 0
    skipped_conjuncts: int = 0

    def merge(self, other: "Counters") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class EvalContext:
    """Everything an evaluation needs besides the formula and the anchor.

    The signal, index, and labeling are immutable and shared; the counters
    and the cost memo are the only mutable pieces. Evaluation addresses
    locations by graph-node index; nodes without a sensor column in the
    signal read as UNDEFINED.
    """

    def __init__(
        self,
        signal: SpatioTemporalSignal,
        index: DistanceIndex,
        labeling: Labeling,
        *,
        counters: Counters | None = None,
        cost_model=None,
        reorder: bool = True,
        parallel=None,
        in_worker: bool = False,
    ):
        self.signal = signal
        self.index = index
        self.labeling = labeling
        self.counters = counters if counters is not None else Counters()
        self.cost_model = cost_model
        self.reorder = reorder
        self.parallel = parallel
        self.in_worker = in_worker
        col = np.full(index.node_count, -1, dtype=np.int64)
        for ci, loc in enumerate(signal.locations):
            try:
                col[index.node_index(loc)] = ci
            except Exception:
                pass  # sensor outside the graph: unreachable from any anchor
        self._col = col
        self._var_cache: dict[str, int] = {}

    def value(self, t: int, node_ix: int, variable: str) -> float:
        """Signal value at (sample, graph node, variable); NaN is UNDEFINED."""
        ci = self._col[node_ix]
        if ci < 0:
            return math.nan
        vi = self._var_cache.get(variable)
        if vi is None:
            vi = self.signal.variable_index(variable)
            self._var_cache[variable] = vi
        return float(self.signal.value_fast(t, int(ci), vi))


def check_horizon(f: Formula, grid: SampleGrid, t: int) -> None:
    """Offline gate: the anchor's horizon must fit inside the trace."""
    needed = grid.time_at(t) + horizon(f)
    if needed > grid.end_time + _GRID_TOL * max(1.0, abs(grid.end_time)):
        raise IncompleteTraceError(grid.count, needed)


def window_offsets(interval_lo: float, interval_hi: float, step: float) -> tuple[int, int]:
    """Sample offsets covered by a temporal interval on a grid of this step."""
    lo = math.ceil(interval_lo / step - _GRID_TOL)
    hi = math.floor(interval_hi / step + _GRID_TOL)
    return lo, hi


def snap_to_int(x: float, tol: float = 1e-9) -> float:
    """Collapse float noise around integers (0.3 * 10 -> 3, not 2.999...)."""
    r = round(x)
    return float(r) if abs(x - r) <= tol else x

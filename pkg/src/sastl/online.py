"""Streaming evaluation: successive verdicts as samples arrive.

Records are fed in timestamp order; a grid sample is frozen once a strictly
later timestamp has been seen (equal timestamps may still arrive), and a
verdict for an anchor sample is finalized exactly once, as soon as every
sample in its horizon is frozen. Each anchor is re-evaluated from the
buffered window rather than by incremental temporal-state propagation,
which keeps online verdicts trivially identical to offline ones.

Reset behavior is configurable per requirement: `keep` (default) lets the
estimate stream run; `reset_on_violation` clears the running estimate after
a violated anchor so current_estimate reflects post-violation anchors only;
`reset_at` starts a requirement's evaluation at a given time, skipping
earlier anchors entirely. Finalized verdicts themselves depend only on
their own window, so policies never change an emitted verdict.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .boolean import CostModel, monitor_b
from .engine import Counters
from .errors import ConfigError, StreamError
from .formula import Formula
from .quantitative import monitor_q
from .reports import Report
from .requirements import Requirement, RequirementSet, anchor_locations
from .signal import Labeling, Record, SampleGrid, SpatialGraph, SpatioTemporalSignal
from .spatial import DistanceIndex, build_index

_TOL = 1e-9


def _formula_variables(f: Formula) -> set[str]:
    from .formula import Agg, Atom, children

    out = set()
    if isinstance(f, (Atom, Agg)):
        out.add(f.variable)
    for c in children(f):
        out |= _formula_variables(c)
    return out


class OnlineMonitor:
    """Rolling-window monitor over a fixed graph and requirement set."""

    def __init__(
        self,
        requirements: RequirementSet | Sequence[Requirement],
        graph: SpatialGraph,
        labeling: Labeling,
        step: float,
        *,
        index: DistanceIndex | None = None,
        start_time: float | None = None,
        window_samples: int | None = None,
        parallel=None,
        reorder: bool = True,
    ):
        self.requirements: list[Requirement] = list(requirements)
        self.graph = graph
        self.labeling = labeling
        self.index = index if index is not None else build_index(graph)
        if step <= 0:
            raise ConfigError(f"step must be positive, got {step}")
        self.step = step
        self.parallel = parallel
        self.reorder = reorder
        self.counters = Counters()
        self._cost_model = CostModel(self.index, labeling) if reorder else None

        self._variables = tuple(
            sorted(set().union(*(_formula_variables(r.formula) for r in self.requirements)) or set())
        )
        horizons = {r.name: r.horizon for r in self.requirements}
        max_h_samples = max(
            (math.ceil(h / step - _TOL) for h in horizons.values()), default=0
        )
        needed = max_h_samples + 1
        if window_samples is None:
            window_samples = needed
        if window_samples < needed:
            raise ConfigError(
                f"window of {window_samples} samples cannot cover the maximum "
                f"requirement horizon ({needed} samples needed)"
            )
        self._window_samples = window_samples

        self._start_time = start_time
        self._watermark: float | None = None
        self._pending: list[Record] = []
        self._hold = np.full((graph.node_count, max(1, len(self._variables))), np.nan)
        self._var_ix = {v: i for i, v in enumerate(self._variables)}
        self._node_ix = {n: i for i, n in enumerate(graph.nodes)}
        self._frames: list[np.ndarray] = []
        self._frame_base = 0  # grid index of _frames[0]
        self._finalized = 0  # grid indices [0, _finalized) are frozen
        self._next_anchor = {r.name: 0 for r in self.requirements}
        self._anchor_locs = {
            r.name: anchor_locations(r, graph.nodes, labeling) for r in self.requirements
        }
        self._estimates: dict[str, float | None] = {r.name: None for r in self.requirements}
        self._epoch = {r.name: 0 for r in self.requirements}

    # -- feeding ------------------------------------------------------------

    def feed(self, records: Iterable[Record]) -> list[Report]:
        """Append a chunk and return every verdict it newly finalizes.

        Chunk timestamps must be non-decreasing and not precede anything fed
        earlier; an out-of-order record rejects the whole chunk before any
        state changes.
        """
        chunk = list(records)
        last = self._watermark
        for r in chunk:
            if last is not None and r.time < last - _TOL:
                raise StreamError(
                    f"out-of-order record at t={r.time} (watermark {last})", r.time
                )
            last = max(r.time, last) if last is not None else r.time
        for r in chunk:
            if r.location not in self._node_ix:
                raise StreamError(f"record at unknown location {r.location!r}", r.time)
        if not chunk:
            return []

        if self._start_time is None:
            self._start_time = chunk[0].time
        self._pending.extend(chunk)
        self._watermark = last
        self._freeze_through(lambda t: self._watermark > t + _TOL)
        return self._emit()

    def finish(self) -> list[Report]:
        """End of stream: freeze every sample at or before the watermark."""
        if self._watermark is None:
            return []
        self._freeze_through(lambda t: self._watermark >= t - _TOL)
        return self._emit()

    def _freeze_through(self, sample_done) -> None:
        if self._start_time is None:
            return
        while True:
            t_next = self._start_time + self._finalized * self.step
            if not sample_done(t_next):
                return
            # apply pending records up to this sample time (zero-order hold)
            keep = []
            for r in self._pending:
                if r.time <= t_next + _TOL:
                    vi = self._var_ix.get(r.variable)
                    if vi is not None:
                        li = self._node_ix[r.location]
                        self._hold[li, vi] = np.nan if r.value is None else r.value
                else:
                    keep.append(r)
            self._pending = keep
            self._frames.append(self._hold.copy())
            self._finalized += 1

    # -- emission -----------------------------------------------------------

    def _grid_time(self, k: int) -> float:
        return self._start_time + k * self.step

    def _emit(self) -> list[Report]:
        if self._finalized == 0:
            return []
        out: list[Report] = []
        for req in self.requirements:
            out.extend(self._emit_requirement(req))
        self._prune()
        return out

    def _emit_requirement(self, req: Requirement) -> list[Report]:
        h = req.horizon
        h_samples = math.ceil(h / self.step - _TOL)
        out: list[Report] = []
        name = req.name
        core = req.core
        while True:
            k = self._next_anchor[name]
            if k + h_samples > self._finalized - 1:
                break
            if req.policy.kind == "reset_at" and self._grid_time(k) < req.policy.at - _TOL:
                self._next_anchor[name] = k + 1
                continue
            window = self._window_signal(k, k + h_samples)
            anchor_rob: list[float] = []
            violated = False
            for loc in self._anchor_locs[name]:
                # the window grid starts at the anchor, so the anchor is sample 0
                verdict = monitor_b(
                    core, window, 0, loc, self.index, self.labeling,
                    reorder=self.reorder, counters=self.counters,
                    parallel=self.parallel, cost_model=self._cost_model,
                )
                rob = monitor_q(
                    core, window, 0, loc, self.index, self.labeling,
                    counters=self.counters, parallel=self.parallel,
                )
                out.append(
                    Report(name, self._grid_time(k), loc, verdict.satisfied, verdict.vacuous, rob)
                )
                anchor_rob.append(rob)
                violated = violated or not verdict.satisfied
            if anchor_rob:
                self._estimates[name] = min(anchor_rob)
            if violated and req.policy.kind == "reset_on_violation":
                self._epoch[name] += 1
                self._estimates[name] = None  # estimate stream restarts after the violation
            self._next_anchor[name] = k + 1
        return out

    def _window_signal(self, lo: int, hi: int) -> SpatioTemporalSignal:
        base = self._frame_base
        stack = np.stack(self._frames[lo - base : hi - base + 1])
        grid = SampleGrid(self._grid_time(lo), self.step, hi - lo + 1)
        variables = self._variables or ("_none",)
        return SpatioTemporalSignal(grid, self.graph.nodes, variables, stack)

    def _prune(self) -> None:
        if not self.requirements:
            return
        oldest_needed = min(self._next_anchor.values())
        drop = oldest_needed - self._frame_base
        if drop > 0:
            del self._frames[:drop]
            self._frame_base = oldest_needed

    # -- queries --------------------------------------------------------------

    def current_estimate(self, requirement: str) -> float | None:
        """Latest finalized robustness (min across anchor locations), or None.

        None before anything is evaluable and right after a reset. Estimates
        may be superseded by later anchors; finalized reports may not.
        """
        if requirement not in self._estimates:
            raise KeyError(requirement)
        return self._estimates[requirement]

    def epoch(self, requirement: str) -> int:
        """How many times the requirement's estimate stream has reset."""
        return self._epoch[requirement]

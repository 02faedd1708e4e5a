"""Benchmark harness: synthetic city workloads and mode comparisons.

Generates a reproducible city (lattice or random-geometric graph, labeled
points of interest, uniform sensor traces), then times Boolean monitoring
of each requirement under several engine modes: `standard` (written
conjunction order, no pool), `reordered` (cost-driven conjunction order),
and `parallelN` (reordered plus an N-worker pool for spatial operators).
Verdicts must be identical across modes; the harness refuses to report
timings for divergent results.
"""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .boolean import CostModel, Verdict, monitor_b
from .engine import Counters
from .errors import SastlError
from .parallel import ParallelConfig
from .requirements import RequirementSet, anchor_locations, anchor_samples
from .signal import Labeling, SampleGrid, SpatialGraph, SpatioTemporalSignal
from .spatial import DistanceIndex, build_index


@dataclass(frozen=True)
class WorkloadSpec:
    """Reproducible synthetic city: graph shape, labels, traces, seed."""

    node_count: int
    topology: str = "lattice"  # "lattice" (unit weights) or "random-geometric"
    poi_labels: Mapping[str, float] = field(default_factory=dict)
    sample_count: int = 100
    variables: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: {"pm": (0.0, 200.0)}
    )
    seed: int = 0
    step: float = 1.0

    def __post_init__(self):
        if self.node_count < 1:
            raise SastlError("node_count must be >= 1")
        if self.topology not in ("lattice", "random-geometric"):
            raise SastlError(f"unknown topology {self.topology!r}")
        for label, density in self.poi_labels.items():
            if not 0.0 <= density <= 1.0:
                raise SastlError(f"density for {label!r} must be in [0,1], got {density}")


def generate_workload(spec: WorkloadSpec) -> tuple[SpatialGraph, Labeling, SpatioTemporalSignal]:
    rng = np.random.default_rng(spec.seed)
    width = len(str(spec.node_count - 1))
    names = [f"n{str(i).zfill(width)}" for i in range(spec.node_count)]

    if spec.topology == "lattice":
        k = math.ceil(math.sqrt(spec.node_count))
        edges = []
        for i in range(spec.node_count):
            row, col = divmod(i, k)
            right = i + 1
            down = i + k
            if col + 1 < k and right < spec.node_count:
                edges.append((names[i], names[right], 1.0))
            if down < spec.node_count:
                edges.append((names[i], names[down], 1.0))
    else:
        points = rng.random((spec.node_count, 2))
        # connection radius chosen to keep the graph near-connected
        radius = 1.8 / math.sqrt(max(spec.node_count, 2))
        edges = []
        for i in range(spec.node_count):
            deltas = points[i + 1 :] - points[i]
            dists = np.hypot(deltas[:, 0], deltas[:, 1])
            for j in np.nonzero(dists <= radius)[0]:
                edges.append((names[i], names[i + 1 + j], float(dists[j])))
    graph = SpatialGraph(names, edges)

    assignment = {}
    for label, density in sorted(spec.poi_labels.items()):
        hits = rng.random(spec.node_count) < density
        for i in np.nonzero(hits)[0]:
            assignment.setdefault(names[i], []).append(label)
    labeling = Labeling(assignment)

    variables = sorted(spec.variables)
    values = np.empty((spec.sample_count, spec.node_count, len(variables)))
    for vi, var in enumerate(variables):
        lo, hi = spec.variables[var]
        values[:, :, vi] = rng.uniform(lo, hi, size=(spec.sample_count, spec.node_count))
    grid = SampleGrid(0.0, spec.step, spec.sample_count)
    signal = SpatioTemporalSignal(grid, graph.nodes, variables, values)
    return graph, labeling, signal


@dataclass(frozen=True)
class BenchMode:
    name: str
    reorder: bool
    workers: int


def parse_modes(names: Sequence[str]) -> list[BenchMode]:
    out = []
    for name in names:
        name = name.strip()
        if name == "standard":
            out.append(BenchMode("standard", reorder=False, workers=1))
        elif name == "reordered":
            out.append(BenchMode("reordered", reorder=True, workers=1))
        elif name.startswith("parallel"):
            workers = int(name[len("parallel"):])
            out.append(BenchMode(name, reorder=True, workers=workers))
        else:
            raise SastlError(f"unknown bench mode {name!r}")
    return out


@dataclass
class BenchRow:
    requirement: str
    mode: str
    median_seconds: float
    runs: tuple[float, ...]
    anchors: int


def run_bench(
    graph: SpatialGraph,
    labeling: Labeling,
    signal: SpatioTemporalSignal,
    requirements: RequirementSet,
    modes: Sequence[BenchMode],
    *,
    repeats: int = 3,
    parallel_threshold: int = 64,
    index: DistanceIndex | None = None,
) -> list[BenchRow]:
    """Time every (requirement, mode) pair; median of `repeats` runs each.

    Raises SastlError if any mode disagrees with any other on any verdict:
    correctness precedes speed.
    """
    if repeats < 1:
        raise SastlError("repeats must be >= 1")
    index = index if index is not None else build_index(graph)
    rows: list[BenchRow] = []
    for req in requirements:
        anchors = [
            (t, loc)
            for t in anchor_samples(req, signal.grid)
            for loc in anchor_locations(req, graph.nodes, labeling)
        ]
        baseline: list[Verdict] | None = None
        for mode in modes:
            parallel = (
                ParallelConfig(mode.workers, parallel_threshold) if mode.workers > 1 else None
            )
            cost_model = CostModel(index, labeling) if mode.reorder else None
            core = req.core

            def one_pass() -> list[Verdict]:
                return [
                    monitor_b(
                        core, signal, t, loc, index, labeling,
                        reorder=mode.reorder, parallel=parallel,
                        cost_model=cost_model, counters=Counters(),
                    )
                    for t, loc in anchors
                ]

            verdicts = one_pass()  # warm caches; also the correctness sample
            if baseline is None:
                baseline = verdicts
            elif verdicts != baseline:
                raise SastlError(
                    f"mode {mode.name!r} diverges from {modes[0].name!r} on "
                    f"requirement {req.name!r}; refusing to report timings"
                )
            runs = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                got = one_pass()
                runs.append(time.perf_counter() - t0)
                if got != baseline:
                    raise SastlError(
                        f"mode {mode.name!r} is nondeterministic on requirement {req.name!r}"
                    )
            rows.append(
                BenchRow(req.name, mode.name, statistics.median(runs), tuple(runs), len(anchors))
            )
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["requirement", "mode", "median_seconds", "anchors", "runs"])
        for row in rows:
            writer.writerow(
                [
                    row.requirement,
                    row.mode,
                    f"{row.median_seconds:.6f}",
                    row.anchors,
                    ";".join(f"{r:.6f}" for r in row.runs),
                ]
            )


def format_bench_table(rows: Sequence[BenchRow]) -> str:
    """Aligned text table, one row per (requirement, mode)."""
    requirements = []
    for row in rows:
        if row.requirement not in requirements:
            requirements.append(row.requirement)
    modes = []
    for row in rows:
        if row.mode not in modes:
            modes.append(row.mode)
    by_key = {(r.requirement, r.mode): r for r in rows}
    name_w = max([len("requirement")] + [len(r) for r in requirements])
    col_w = max([12] + [len(m) + 4 for m in modes])
    header = "requirement".ljust(name_w) + "".join(f"{m + ' (s)':>{col_w}}" for m in modes)
    lines = [header, "-" * len(header)]
    for req in requirements:
        cells = []
        for mode in modes:
            row = by_key.get((req, mode))
            cells.append(f"{row.median_seconds:>{col_w}.3f}" if row else " " * col_w)
        lines.append(req.ljust(name_w) + "".join(cells))
    return "\n".join(lines)


def speedup(rows: Sequence[BenchRow], requirement: str, slow_mode: str, fast_mode: str) -> float:
    """Median-time ratio slow/fast for one requirement."""
    by_key = {(r.requirement, r.mode): r for r in rows}
    slow = by_key[(requirement, slow_mode)]
    fast = by_key[(requirement, fast_mode)]
    return slow.median_seconds / fast.median_seconds

"""Spatio-temporal traces, location labels, and the weighted location graph.

A trace maps (sample, location, variable) to a real value or UNDEFINED.
Time is discretized onto a uniform sample grid; every temporal operator in
the evaluators works in grid samples. UNDEFINED is a first-class value, not
an error: evaluators treat undefined atoms as vacuously true.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptySignalError,
    GraphError,
    SampleOutOfRangeError,
    SignalError,
    UnknownLocationError,
    UnknownVariableError,
)

#: Marker for a missing measurement (the bottom value of the semantics).
UNDEFINED = None

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class SampleGrid:
    """Uniform time grid: sample k lives at start_time + k * step."""

    start_time: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise SignalError(f"grid step must be positive, got {self.step}")
        if self.count < 1:
            raise SignalError(f"grid needs at least one sample, got {self.count}")

    def time_at(self, index: int) -> float:
        if not 0 <= index < self.count:
            raise SampleOutOfRangeError(index, self.count)
        return self.start_time + index * self.step

    @property
    def end_time(self) -> float:
        return self.start_time + (self.count - 1) * self.step

    def check_index(self, index: int) -> int:
        if not 0 <= index < self.count:
            raise SampleOutOfRangeError(index, self.count)
        return index


@dataclass(frozen=True)
class Record:
    """One timestamped measurement. value=None records an explicit dropout."""

    time: float
    location: str
    variable: str
    value: float | None


class SpatioTemporalSignal:
    """Immutable trace over a sample grid, a location set, and variables.

    Values are stored densely; NaN encodes UNDEFINED internally and is never
    exposed: lookups return None for missing cells.
    """

    def __init__(
        self,
        grid: SampleGrid,
        locations: Sequence[str],
        variables: Sequence[str],
        values: np.ndarray,
    ):
        if len(set(locations)) != len(locations):
            raise SignalError("duplicate location ids")
        if len(set(variables)) != len(variables):
            raise SignalError("duplicate variable names")
        expected = (grid.count, len(locations), len(variables))
        if values.shape != expected:
            raise SignalError(f"value array shape {values.shape} != {expected}")
        self.grid = grid
        self.locations: tuple[str, ...] = tuple(locations)
        self.variables: tuple[str, ...] = tuple(variables)
        self._values = np.array(values, dtype=float)
        self._values.flags.writeable = False
        self._loc_ix = {l: i for i, l in enumerate(self.locations)}
        self._var_ix = {v: i for i, v in enumerate(self.variables)}

    @classmethod
    def from_cells(
        cls,
        grid: SampleGrid,
        locations: Sequence[str],
        variables: Sequence[str],
        cells: Mapping[tuple[int, str, str], float | None],
    ) -> "SpatioTemporalSignal":
        """Build from a sparse {(sample, location, variable): value} mapping."""
        arr = np.full((grid.count, len(locations), len(variables)), np.nan)
        loc_ix = {l: i for i, l in enumerate(locations)}
        var_ix = {v: i for i, v in enumerate(variables)}
        for (k, loc, var), value in cells.items():
            grid.check_index(k)
            if loc not in loc_ix:
                raise UnknownLocationError(loc)
            if var not in var_ix:
                raise UnknownVariableError(var)
            arr[k, loc_ix[loc], var_ix[var]] = np.nan if value is None else value
        return cls(grid, locations, variables, arr)

    def value_at(self, t: int, location: str, variable: str) -> float | None:
        """Stored value at (sample t, location, variable); None models UNDEFINED."""
        self.grid.check_index(t)
        try:
            li = self._loc_ix[location]
        except KeyError:
            raise UnknownLocationError(location) from None
        try:
            vi = self._var_ix[variable]
        except KeyError:
            raise UnknownVariableError(variable) from None
        v = self._values[t, li, vi]
        return None if math.isnan(v) else float(v)

    def value_fast(self, t: int, loc_index: int, var_index: int) -> float:
        """Raw cell access by integer indices; NaN means UNDEFINED. No checks."""
        return self._values[t, loc_index, var_index]

    def location_index(self, location: str) -> int:
        try:
            return self._loc_ix[location]
        except KeyError:
            raise UnknownLocationError(location) from None

    def variable_index(self, variable: str) -> int:
        try:
            return self._var_ix[variable]
        except KeyError:
            raise UnknownVariableError(variable) from None

    def perturbed(self, delta: np.ndarray) -> "SpatioTemporalSignal":
        """New signal with delta added to every defined cell (UNDEFINED kept)."""
        if delta.shape != self._values.shape:
            raise SignalError("perturbation shape mismatch")
        return SpatioTemporalSignal(
            self.grid, self.locations, self.variables, self._values + delta
        )

    def defined_mask(self) -> np.ndarray:
        return ~np.isnan(self._values)

    def to_records(self) -> list[Record]:
        """Flatten to timestamped records, time-ordered.

        UNDEFINED cells become explicit dropout records (value None) so that
        replaying the records through a zero-order hold reproduces this
        signal exactly instead of holding stale values across the gap.
        """
        out: list[Record] = []
        for k in range(self.grid.count):
            t = self.grid.time_at(k)
            for li, loc in enumerate(self.locations):
                for vi, var in enumerate(self.variables):
                    v = self._values[k, li, vi]
                    out.append(Record(t, loc, var, None if math.isnan(v) else float(v)))
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpatioTemporalSignal):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.locations == other.locations
            and self.variables == other.variables
            and np.array_equal(self._values, other._values, equal_nan=True)
        )


def normalize_frequency(
    records: Iterable[Record],
    target_step: float,
    *,
    start_time: float | None = None,
    count: int | None = None,
) -> SpatioTemporalSignal:
    """Resample raw timestamped records onto a uniform grid.

    Each (location, variable) stream is resampled with a zero-order hold:
    a grid cell takes the value of the latest record at or before its sample
    time. Cells with no covering record are UNDEFINED. The grid spans the
    record time range unless start_time/count are given.
    """
    if not target_step > 0:
        raise SignalError(f"target_step must be positive, got {target_step}")
    recs = list(records)
    if not recs:
        raise EmptySignalError("cannot build a signal from zero records")

    times = [r.time for r in recs]
    start = min(times) if start_time is None else start_time
    if count is None:
        span = max(times) - start
        count = max(1, math.floor(span / target_step + _TIME_TOL) + 1)
    grid = SampleGrid(start, target_step, count)

    locations = sorted({r.location for r in recs})
    variables = sorted({r.variable for r in recs})

    streams: dict[tuple[str, str], list[tuple[float, float | None]]] = {}
    for r in recs:
        streams.setdefault((r.location, r.variable), []).append((r.time, r.value))

    arr = np.full((count, len(locations), len(variables)), np.nan)
    loc_ix = {l: i for i, l in enumerate(locations)}
    var_ix = {v: i for i, v in enumerate(variables)}
    for (loc, var), stream in streams.items():
        # stable sort: among equal timestamps the later record wins
        stream.sort(key=lambda tv: tv[0])
        stream_times = [t for t, _ in stream]
        li, vi = loc_ix[loc], var_ix[var]
        for k in range(count):
            sample_t = grid.time_at(k)
            pos = bisect_right(stream_times, sample_t + _TIME_TOL) - 1
            if pos >= 0:
                v = stream[pos][1]
                arr[k, li, vi] = np.nan if v is None else v

    return SpatioTemporalSignal(grid, locations, variables, arr)


# --- CSV interface: header `time,location,variable,value`, empty value = UNDEFINED


def read_signal_csv(path) -> list[Record]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"time", "location", "variable", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SignalError(
                f"{path}: expected CSV header time,location,variable,value"
            )
        out = []
        for row in reader:
            raw = (row["value"] or "").strip()
            value = None if raw == "" else float(raw)
            out.append(Record(float(row["time"]), row["location"], row["variable"], value))
    return out


def write_signal_csv(path, records: Iterable[Record]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "location", "variable", "value"])
        for r in records:
            writer.writerow([r.time, r.location, r.variable, "" if r.value is None else r.value])


def infer_step(records: Sequence[Record]) -> float:
    """Smallest positive gap between distinct record timestamps (1.0 fallback)."""
    times = sorted({r.time for r in records})
    gaps = [b - a for a, b in zip(times, times[1:]) if b - a > _TIME_TOL]
    return min(gaps) if gaps else 1.0


class Labeling:
    """Assigns each location the set of propositions true there.

    Locations absent from the mapping carry the empty set, so the assignment
    is total over any companion graph.
    """

    def __init__(self, assignment: Mapping[str, Iterable[str]]):
        self._labels = {loc: frozenset(props) for loc, props in assignment.items()}
        self.propositions: frozenset[str] = frozenset(
            p for props in self._labels.values() for p in props
        )

    def labels_for(self, location: str) -> frozenset[str]:
        return self._labels.get(location, frozenset())

    def locations_with(self, proposition: str) -> list[str]:
        return sorted(l for l, props in self._labels.items() if proposition in props)

    @classmethod
    def from_json(cls, path) -> "Labeling":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise SignalError(f"{path}: labels JSON must be an object")
        return cls({loc: list(props) for loc, props in data.items()})

    def to_json_obj(self) -> dict:
        return {loc: sorted(props) for loc, props in sorted(self._labels.items())}


class SpatialGraph:
    """Weighted undirected location graph; no self loops, weights >= 0.

    Node ids are kept in sorted order; that order is the deterministic
    tie-break used everywhere downstream.
    """

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str, float]]):
        self.nodes: tuple[str, ...] = tuple(sorted(set(nodes)))
        node_set = set(self.nodes)
        seen: dict[tuple[str, str], float] = {}
        for a, b, w in edges:
            if a not in node_set:
                raise GraphError(f"edge endpoint {a!r} is not a node")
            if b not in node_set:
                raise GraphError(f"edge endpoint {b!r} is not a node")
            if a == b:
                raise GraphError(f"self loop on {a!r}")
            if not (isinstance(w, (int, float)) and w >= 0):
                raise GraphError(f"edge {a!r}-{b!r} has invalid weight {w!r}")
            key = (a, b) if a < b else (b, a)
            if key in seen and seen[key] != w:
                raise GraphError(f"conflicting weights for edge {key[0]!r}-{key[1]!r}")
            seen[key] = float(w)
        self.edges: tuple[tuple[str, str, float], ...] = tuple(
            (a, b, w) for (a, b), w in sorted(seen.items())
        )

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @classmethod
    def from_json(cls, path) -> "SpatialGraph":
        with open(path) as fh:
            data = json.load(fh)
        try:
            nodes = data["nodes"]
            edges = [(e["a"], e["b"], e["w"]) for e in data.get("edges", [])]
        except (KeyError, TypeError) as exc:
            raise GraphError(f'{path}: expected {{"nodes": [...], "edges": [{{"a","b","w"}}]}}: {exc}')
        return cls(nodes, edges)

    def to_json_obj(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"a": a, "b": b, "w": w} for a, b, w in self.edges],
        }

    def canonical_json(self) -> str:
        """Stable serialization used to key the distance cache."""
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))

"""Named requirements: formulas plus evaluation anchors and stream policy.

The requirements file is JSON: a constants table for named thresholds, a
distance unit scale, a default temporal horizon for templates, and a list
of requirements given either as formula text or as template slots. Each
requirement says where it is anchored (all locations, label-filtered, or an
explicit list) and at which times (every horizon-covered sample, or
explicit time points).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ValidationError
from .formula import Formula, desugar, horizon, validate_formula
from .parser import parse_sastl
from .signal import Labeling, SampleGrid, SpatioTemporalSignal
from .templates import TranslateConfig, template_from_json, translate_template

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class AnchorSpec:
    """Where and when a requirement is evaluated.

    locations: "all", ("label", proposition), or an explicit id tuple.
    times: "all" (every sample whose horizon fits in the trace) or explicit
    time points that must sit on the grid.
    """

    locations: "str | tuple" = "all"
    times: "str | tuple[float, ...]" = "all"


@dataclass(frozen=True)
class StreamPolicy:
    """Online reset behavior: keep, reset_on_violation, or reset_at a time."""

    kind: str = "keep"
    at: float | None = None

    def __post_init__(self):
        if self.kind not in ("keep", "reset_on_violation", "reset_at"):
            raise ValidationError(f"unknown stream policy {self.kind!r}")
        if (self.kind == "reset_at") != (self.at is not None):
            raise ValidationError("reset_at needs a time; other policies take none")


@dataclass(frozen=True)
class Requirement:
    name: str
    formula: Formula
    anchors: AnchorSpec = AnchorSpec()
    policy: StreamPolicy = StreamPolicy()
    source: str = ""  # original text or "template", for reports

    @property
    def core(self) -> Formula:
        return desugar(self.formula)

    @property
    def horizon(self) -> float:
        return horizon(self.formula)


@dataclass
class RequirementSet:
    requirements: list[Requirement]
    constants: dict = field(default_factory=dict)
    unit_scale: float = 1.0
    default_horizon: float = 24.0

    def __post_init__(self):
        names = [r.name for r in self.requirements]
        if len(set(names)) != len(names):
            raise ValidationError("requirement names must be unique")

    def __iter__(self):
        return iter(self.requirements)

    def get(self, name: str) -> Requirement:
        for r in self.requirements:
            if r.name == name:
                return r
        raise KeyError(name)

    def validate_against(
        self,
        *,
        variables: "set[str] | None" = None,
        propositions: "set[str] | None" = None,
        location_count: "int | None" = None,
    ) -> None:
        for r in self.requirements:
            try:
                validate_formula(
                    r.formula,
                    variables=variables,
                    propositions=propositions,
                    location_count=location_count,
                )
            except ValidationError as exc:
                raise ValidationError(f"requirement {r.name!r}: {exc}", exc.span) from None


def load_requirements(path) -> RequirementSet:
    from .errors import ParseError, TemplateError

    with open(path) as fh:
        data = json.load(fh)
    try:
        return requirements_from_obj(data)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}", exc.span) from None
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}", exc.span) from None
    except TemplateError as exc:
        raise TemplateError(f"{path}: {exc}") from None


def requirements_from_obj(data: dict) -> RequirementSet:
    if not isinstance(data, dict) or "requirements" not in data:
        raise ValidationError('requirements file needs a top-level "requirements" list')
    constants = dict(data.get("constants", {}))
    unit_scale = float(data.get("unit_scale", 1.0))
    default_horizon = float(data.get("default_horizon", 24.0))
    tconfig = TranslateConfig(
        constants=constants, unit_scale=unit_scale, default_horizon=default_horizon
    )

    out: list[Requirement] = []
    for i, item in enumerate(data["requirements"]):
        name = item.get("name")
        if not name:
            raise ValidationError(f"requirement #{i} has no name")
        has_formula = "formula" in item
        has_template = "template" in item
        if has_formula == has_template:
            raise ValidationError(
                f"requirement {name!r} needs exactly one of 'formula' or 'template'"
            )
        if has_formula:
            formula = parse_sastl(item["formula"], constants)
            source = item["formula"]
        else:
            formula = translate_template(template_from_json(item["template"]), tconfig)
            source = "template"
        out.append(
            Requirement(
                name=name,
                formula=formula,
                anchors=_anchors_from_obj(item.get("anchors"), name),
                policy=_policy_from_obj(item.get("policy"), name),
                source=source,
            )
        )
    return RequirementSet(out, constants, unit_scale, default_horizon)


def _anchors_from_obj(obj, name: str) -> AnchorSpec:
    if obj is None:
        return AnchorSpec()
    locations = obj.get("locations", "all")
    if isinstance(locations, list):
        locations = tuple(locations)
    elif isinstance(locations, dict):
        if set(locations) != {"label"}:
            raise ValidationError(f"requirement {name!r}: anchor locations object takes only 'label'")
        locations = ("label", locations["label"])
    elif locations != "all":
        raise ValidationError(f"requirement {name!r}: bad anchor locations {locations!r}")
    times = obj.get("times", "all")
    if isinstance(times, list):
        times = tuple(float(t) for t in times)
    elif times != "all":
        raise ValidationError(f"requirement {name!r}: bad anchor times {times!r}")
    return AnchorSpec(locations, times)


def _policy_from_obj(obj, name: str) -> StreamPolicy:
    if obj is None:
        return StreamPolicy()
    if isinstance(obj, str):
        return StreamPolicy(obj)
    if isinstance(obj, dict) and set(obj) == {"reset_at"}:
        return StreamPolicy("reset_at", float(obj["reset_at"]))
    raise ValidationError(f"requirement {name!r}: bad policy {obj!r}")


def anchor_locations(req: Requirement, nodes: Sequence[str], labeling: Labeling) -> list[str]:
    spec = req.anchors.locations
    if spec == "all":
        return list(nodes)
    if isinstance(spec, tuple) and len(spec) == 2 and spec[0] == "label":
        known = set(nodes)
        return [l for l in labeling.locations_with(spec[1]) if l in known]
    missing = [l for l in spec if l not in set(nodes)]
    if missing:
        raise ValidationError(
            f"requirement {req.name!r}: anchor location(s) {missing} not in the graph"
        )
    return list(spec)


def anchor_samples(req: Requirement, grid: SampleGrid) -> list[int]:
    """Sample indices to evaluate: explicit times mapped onto the grid, or
    every sample whose horizon fits inside the trace."""
    h = req.horizon
    if req.anchors.times == "all":
        latest = grid.end_time - h
        out = []
        for k in range(grid.count):
            if grid.time_at(k) <= latest + _TIME_TOL * max(1.0, abs(latest)):
                out.append(k)
        return out
    out = []
    for t in req.anchors.times:
        k = round((t - grid.start_time) / grid.step)
        if not 0 <= k < grid.count or abs(grid.time_at(int(k)) - t) > _TIME_TOL * max(1.0, abs(t)):
            raise ValidationError(
                f"requirement {req.name!r}: anchor time {t} is not on the sample grid"
            )
        out.append(int(k))
    return out


def signal_consistency(
    signal: SpatioTemporalSignal, nodes: Sequence[str], *, source: str = "signal"
) -> None:
    """Every signal location must be a graph node."""
    unknown = [l for l in signal.locations if l not in set(nodes)]
    if unknown:
        raise ValidationError(f"{source}: location(s) {unknown} are not graph nodes")

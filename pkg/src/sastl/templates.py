"""Structured requirement templates and their translation to formulas.

Requirements arrive as slot-filled structured English ("The <average>
<air quality> within <1> mile of all <parks> should <always> be <above>
<good>") rather than formula text. Slots map deterministically onto
operators: points of interest become an everywhere/somewhere/percentage
quantifier over labeled locations, a radius becomes the aggregation domain,
the temporal slot becomes an always/eventually window, and the recursive
template connectives become implication, prohibition, conjunction, until,
and exception.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

from .errors import TemplateError
from .formula import (
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
    PsiProp,
    PsiTrue,
    Somewhere,
    SpatialDomain,
    Until,
)

_COMPARISONS = {
    "above": ">",
    "more than": ">",
    "greater than": ">",
    "below": "<",
    "less than": "<",
    "at least": ">=",
    "at most": "<=",
    "<": "<",
    "<=": "<=",
    ">": ">",
    ">=": ">=",
}

_AGGREGATIONS = {
    "average": "avg",
    "avg": "avg",
    "mean": "avg",
    "maximum": "max",
    "max": "max",
    "worst": "max",
    "minimum": "min",
    "min": "min",
    "total": "sum",
    "sum": "sum",
}

_PERCENT_RE = re.compile(r"at least\s+(\d+(\.\d+)?)\s*%\s*(of)?", re.IGNORECASE)


@dataclass(frozen=True)
class TemplateForm:
    """One slot-filled template sentence.

    entity, comparison, and parameter are mandatory; everything else is
    optional. duration is a single "within t hours" bound, window a
    "from m to n" pair; radius a single "within d" distance, band a
    "from a to b" pair. Exactly one of each pair may be present.
    """

    entity: str
    comparison: str
    parameter: "float | str"
    aggregation: str | None = None
    radius: float | None = None
    band: "tuple[float, float] | None" = None
    spatial: str | None = None  # "all" | "some" | "percent"
    percent: float | None = None
    pois: str | None = None
    temporal: str | None = None  # "always" | "eventually"
    duration: float | None = None
    window: "tuple[float, float] | None" = None

    def __post_init__(self):
        if not self.entity:
            raise TemplateError("template is missing the mandatory <entity> slot")
        if not self.comparison:
            raise TemplateError("template is missing the mandatory <comparison> slot")
        if self.parameter is None or self.parameter == "":
            raise TemplateError("template is missing the mandatory <parameter> slot")
        if self.duration is not None and self.window is not None:
            raise TemplateError("duration and window are contradictory; give one")
        if self.radius is not None and self.band is not None:
            raise TemplateError("radius and band are contradictory; give one")
        if self.spatial == "percent" and self.percent is None:
            raise TemplateError("a percentage quantifier needs the percent value")


@dataclass(frozen=True)
class IfThen:
    condition: "Template"
    consequence: "Template"


@dataclass(frozen=True)
class Prohibited:
    body: "Template"


@dataclass(frozen=True)
class Combo:
    left: "Template"
    op: str  # "and" | "until" | "except"
    right: "Template"

    def __post_init__(self):
        if self.op not in ("and", "until", "except"):
            raise TemplateError(f"unknown template connective {self.op!r}")


Template = Union[TemplateForm, IfThen, Prohibited, Combo]


@dataclass(frozen=True)
class TranslateConfig:
    """Knobs the template language leaves to the deployment.

    unit_scale converts template distances (miles, km) into graph distance
    units. default_horizon is the always-window, in trace time units, used
    when a template omits its duration.
    """

    constants: Mapping[str, float] = field(default_factory=dict)
    unit_scale: float = 1.0
    default_horizon: float = 24.0


def template_from_json(obj) -> Template:
    """Decode the nested template JSON into template nodes."""
    if not isinstance(obj, dict):
        raise TemplateError(f"template must be a JSON object, got {type(obj).__name__}")
    if "if" in obj or "then" in obj:
        if not ("if" in obj and "then" in obj):
            raise TemplateError("an implication template needs both 'if' and 'then'")
        return IfThen(template_from_json(obj["if"]), template_from_json(obj["then"]))
    if "prohibited" in obj:
        return Prohibited(template_from_json(obj["prohibited"]))
    if "op" in obj or ("left" in obj and "right" in obj):
        for key in ("left", "op", "right"):
            if key not in obj:
                raise TemplateError(f"a combined template needs 'left', 'op', 'right'; missing {key!r}")
        return Combo(template_from_json(obj["left"]), obj["op"], template_from_json(obj["right"]))
    return _leaf_from_json(obj)


def _leaf_from_json(obj: dict) -> TemplateForm:
    known = {
        "entity", "comparison", "parameter", "aggregation", "radius", "band",
        "spatial", "percent", "pois", "temporal", "duration", "window",
    }
    unknown = set(obj) - known
    if unknown:
        raise TemplateError(f"unknown template slot(s): {sorted(unknown)}")
    spatial = obj.get("spatial")
    percent = obj.get("percent")
    if isinstance(spatial, str):
        m = _PERCENT_RE.fullmatch(spatial.strip())
        if m:
            spatial, percent = "percent", float(m.group(1))
        elif spatial.strip().lower() in ("all", "every"):
            spatial = "all"
        elif spatial.strip().lower() in ("some", "any"):
            spatial = "some"
        elif spatial.strip().lower() == "percent":
            spatial = "percent"
        else:
            raise TemplateError(f"unknown spatial quantifier {spatial!r}")
    band = tuple(obj["band"]) if obj.get("band") is not None else None
    window = tuple(obj["window"]) if obj.get("window") is not None else None
    try:
        return TemplateForm(
            entity=obj.get("entity", ""),
            comparison=obj.get("comparison", ""),
            parameter=obj.get("parameter"),
            aggregation=obj.get("aggregation"),
            radius=obj.get("radius"),
            band=band,
            spatial=spatial,
            percent=percent,
            pois=obj.get("pois"),
            temporal=obj.get("temporal"),
            duration=obj.get("duration"),
            window=window,
        )
    except TypeError as exc:
        raise TemplateError(str(exc)) from None


def translate_template(t: Template, config: TranslateConfig | None = None) -> Formula:
    """Deterministic slot-to-operator mapping; output passes formula validation."""
    config = config or TranslateConfig()
    if isinstance(t, TemplateForm):
        return _translate_leaf(t, config)
    if isinstance(t, IfThen):
        return Or(Not(translate_template(t.condition, config)),
                  translate_template(t.consequence, config))
    if isinstance(t, Prohibited):
        return Not(translate_template(t.body, config))
    if isinstance(t, Combo):
        left = translate_template(t.left, config)
        right = translate_template(t.right, config)
        if t.op == "and":
            return And(left, right)
        if t.op == "except":
            return Or(left, right)
        interval = _until_interval(t.right, config)
        return Until(interval, left, right)
    raise TemplateError(f"not a template node: {t!r}")


def _until_interval(right: Template, config: TranslateConfig) -> Interval:
    # the until deadline comes from the right-hand template's time slots
    if isinstance(right, TemplateForm):
        if right.window is not None:
            return Interval(float(right.window[0]), float(right.window[1]))
        if right.duration is not None:
            return Interval(0.0, float(right.duration))
    return Interval(0.0, config.default_horizon)


def _translate_leaf(t: TemplateForm, config: TranslateConfig) -> Formula:
    cmp = _COMPARISONS.get(t.comparison.strip().lower())
    if cmp is None:
        raise TemplateError(f"unknown comparison {t.comparison!r}")
    threshold = _resolve_parameter(t.parameter, config)
    variable = sanitize_entity(t.entity)

    core = _measure(t, variable, cmp, threshold, config)
    timed = _timed(t, core, config)
    return _quantified(t, timed)


def _measure(t: TemplateForm, variable: str, cmp: str, threshold: float,
             config: TranslateConfig) -> Formula:
    scale = config.unit_scale
    if t.band is not None:
        domain = SpatialDomain(t.band[0] * scale, t.band[1] * scale, PsiTrue())
    elif t.radius is not None:
        domain = SpatialDomain(0.0, t.radius * scale, PsiTrue())
    else:
        domain = None
    try:
        if t.aggregation is not None:
            op = _AGGREGATIONS.get(t.aggregation.strip().lower())
            if op is None:
                raise TemplateError(f"unknown aggregation {t.aggregation!r}")
            if domain is None:
                domain = SpatialDomain(0.0, math.inf, PsiTrue())
            return Agg(op, domain, variable, cmp, threshold)
        atom = Atom(variable, cmp, threshold)
        if domain is not None:
            # a bare radius without an aggregation reads "every sensor within d"
            return Everywhere(domain, atom)
        return atom
    except FormulaError as exc:
        raise TemplateError(str(exc)) from None


def _timed(t: TemplateForm, core: Formula, config: TranslateConfig) -> Formula:
    temporal = (t.temporal or "always").strip().lower()
    if t.window is not None:
        interval = Interval(float(t.window[0]), float(t.window[1]))
    elif t.duration is not None:
        interval = Interval(0.0, float(t.duration))
    else:
        interval = Interval(0.0, config.default_horizon)
    if temporal == "always":
        return Always(interval, core)
    if temporal == "eventually":
        return Eventually(interval, core)
    raise TemplateError(f"unknown temporal operator {t.temporal!r}")


def _quantified(t: TemplateForm, timed: Formula) -> Formula:
    if t.pois is None and t.spatial is None:
        return timed
    psi = PsiProp(t.pois) if t.pois is not None else PsiTrue()
    domain = SpatialDomain(0.0, math.inf, psi)
    spatial = t.spatial or "all"
    if spatial == "all":
        return Everywhere(domain, timed)
    if spatial == "some":
        return Somewhere(domain, timed)
    try:
        return Count("avg", domain, timed, ">", t.percent / 100.0)
    except FormulaError as exc:
        raise TemplateError(str(exc)) from None


def _resolve_parameter(parameter: "float | str", config: TranslateConfig) -> float:
    if isinstance(parameter, (int, float)) and not isinstance(parameter, bool):
        return float(parameter)
    name = str(parameter)
    if name in config.constants:
        return float(config.constants[name])
    raise TemplateError(f"parameter {name!r} is not a number or a known constant")


def sanitize_entity(entity: str) -> str:
    """Entity text to a variable name: 'air quality' -> 'air_quality'."""
    name = re.sub(r"[^A-Za-z0-9_]+", "_", entity.strip()).strip("_")
    if not name or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        raise TemplateError(f"cannot derive a variable name from entity {entity!r}")
    return name

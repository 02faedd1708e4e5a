"""Report records and their JSON-lines wire format (schema version 1)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .engine import Counters

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Report:
    """One finalized verdict for a requirement at an anchor."""

    requirement: str
    anchor_time: float
    anchor_location: str
    satisfied: bool
    vacuous: bool
    robustness: float

    @property
    def verdict_sign(self) -> int:
        if self.robustness > 0:
            return 1
        if self.robustness < 0:
            return -1
        return 0

    def to_json_obj(self, counters: Counters | None = None) -> dict:
        obj = {
            "v": SCHEMA_VERSION,
            "requirement": self.requirement,
            "anchor_time": self.anchor_time,
            "anchor_location": self.anchor_location,
            "satisfied": self.satisfied,
            "vacuous": self.vacuous,
            "robustness": _json_float(self.robustness),
            "verdict_sign": self.verdict_sign,
        }
        if counters is not None:
            obj["eval_counters"] = counters.as_dict()
        return obj


def _json_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def verdict_report_line(
    requirement: str,
    anchor_time: float,
    anchor_location: str,
    satisfied: bool,
    vacuous: bool,
    counters: Counters | None = None,
) -> str:
    """Boolean verdict line: {requirement, anchor, satisfied, vacuous, counters}."""
    obj = {
        "v": SCHEMA_VERSION,
        "requirement": requirement,
        "anchor_time": anchor_time,
        "anchor_location": anchor_location,
        "satisfied": satisfied,
        "vacuous": vacuous,
    }
    if counters is not None:
        obj["eval_counters"] = counters.as_dict()
    return json.dumps(obj)


def robustness_report_line(
    requirement: str,
    anchor_time: float,
    anchor_location: str,
    robustness: float,
) -> str:
    """Robustness line: {requirement, anchor, robustness, verdict_sign}."""
    sign = 1 if robustness > 0 else (-1 if robustness < 0 else 0)
    obj = {
        "v": SCHEMA_VERSION,
        "requirement": requirement,
        "anchor_time": anchor_time,
        "anchor_location": anchor_location,
        "robustness": _json_float(robustness),
        "verdict_sign": sign,
    }
    return json.dumps(obj)


def report_line(report: Report, counters: Counters | None = None) -> str:
    return json.dumps(report.to_json_obj(counters))

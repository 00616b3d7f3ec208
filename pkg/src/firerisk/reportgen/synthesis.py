"""Fusion of agent findings into one operational report.

The qualification level is a presentation ceiling (the highest finding
severity, lowered one step when every finding has low confidence). It is not
an aggregate risk score; the per-target classes are always shown separately.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Protocol

from ..core import OPERATIONAL_TARGETS, TargetKind
from .agents import AgentFinding, canonical_number

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
LEVEL_LABELS = ("low", "moderate", "high", "very high", "extreme")

# Illustrative, non-doctrinal catalogue. Edit freely for a given service.
RECOMMENDATIONS: dict[int, tuple[str, ...]] = {
    0: ("Routine monitoring; no change to standby posture.",),
    1: ("Routine monitoring.", "Check availability of first-response engines."),
    2: ("Increase lookout and patrol frequency in wooded sectors.",
        "Confirm readiness of first-response engines."),
    3: ("Pre-position engine groups near high-exposure interfaces.",
        "Run ground and air patrols during the afternoon peak.",
        "Alert neighbouring centres for possible reinforcement."),
    4: ("Pre-position reinforced engine groups and aerial means.",
        "Continuous patrols over the most exposed massifs.",
        "Request reinforcement and prepare public access restrictions."),
}
RECOMMENDATION_NOTE = "Recommendations are illustrative and do not represent operational doctrine."

RELIABILITY_NOTES: dict[str, tuple[str, str]] = {
    TargetKind.DFE.value: ("high", "Weather-driven and strongly persistent from day to day; "
                                   "forecasts are comparatively reliable."),
    TargetKind.NUM_FIRES.value: ("low", "Depends on human activity and chance ignitions; "
                                        "treat the forecast class as indicative only."),
    TargetKind.INTERVENTION_TIME.value: ("low", "Depends on which fires occur and on access "
                                                "conditions; treat as indicative only."),
    TargetKind.RESOURCES.value: ("low", "Depends on which fires occur and on dispatch "
                                        "choices; treat as indicative only."),
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "zone", "date", "qualification", "per_target_classes",
                 "justification", "reliability_notes", "recommendations", "context_notes"],
    "properties": {
        "schema_version": {"type": "string"},
        "zone": {"type": "integer"},
        "date": {"type": "string", "pattern": r"^\d{4}-\d{2}-\d{2}$"},
        "qualification": {
            "type": "object", "required": ["level", "label"],
            "properties": {"level": {"type": "integer", "minimum": 0, "maximum": 4},
                           "label": {"enum": list(LEVEL_LABELS)}},
        },
        "per_target_classes": {"type": "object",
                               "additionalProperties": {"type": "integer", "minimum": 0,
                                                        "maximum": 4}},
        "justification": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "required": ["agent", "confidence", "evidence"],
                      "properties": {"agent": {"enum": ["hazard", "deviation", "importance"]},
                                     "confidence": {"enum": ["low", "medium", "high"]},
                                     "evidence": {"type": "array", "minItems": 1}}},
        },
        "reliability_notes": {
            "type": "array",
            "items": {"type": "object", "required": ["target", "predictability", "note"],
                      "properties": {"predictability": {"enum": ["low", "high"]}}},
        },
        "recommendations": {"type": "array", "items": {"type": "string"}},
        "context_notes": {"type": "array", "items": {"type": "string"}},
        "provenance": {"type": "object"},
    },
}


@dataclass
class OperationalReport:
    zone: int
    date: str
    qualification: int
    per_target_classes: dict[str, int]
    justification: list[dict]
    reliability_notes: list[dict]
    recommendations: list[str]
    context_notes: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return LEVEL_LABELS[self.qualification]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION, "zone": self.zone, "date": self.date,
            "qualification": {"level": self.qualification, "label": self.label},
            "per_target_classes": dict(self.per_target_classes),
            "justification": self.justification, "reliability_notes": self.reliability_notes,
            "recommendations": list(self.recommendations),
            "context_notes": list(self.context_notes), "provenance": dict(self.provenance),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "OperationalReport":
        return cls(int(d["zone"]), str(d["date"]), int(d["qualification"]["level"]),
                   {k: int(v) for k, v in d["per_target_classes"].items()},
                   list(d["justification"]), list(d["reliability_notes"]),
                   list(d["recommendations"]), list(d.get("context_notes", [])),
                   dict(d.get("provenance", {})))


class Backend(Protocol):
    name: str

    def complete(self, request: dict) -> dict: ...


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def build_request(findings: Sequence[AgentFinding], context: Sequence[str]) -> dict:
    return {"schema_version": SCHEMA_VERSION,
            "findings": [f.to_dict() for f in findings],
            "context": {"notes": list(context)}}


def input_digest(request: dict) -> str:
    return hashlib.sha256(canonical_json(request).encode("utf-8")).hexdigest()


def reliability_notes(targets: Sequence[str]) -> list[dict]:
    """One note per target; the three operational targets are always marked low."""
    names = [t.value for t in TargetKind]
    ordered = [t for t in names if t in targets] + sorted(t for t in targets if t not in names)
    for t in OPERATIONAL_TARGETS:
        if t.value not in ordered:
            ordered.append(t.value)
    out = []
    for t in ordered:
        level, note = RELIABILITY_NOTES.get(t, ("low", "No predictability assessment."))
        out.append({"target": t, "predictability": level, "note": note})
    return out


def template_report(findings: Sequence[AgentFinding], context: Sequence[str] = ()) -> OperationalReport:
    if not findings:
        raise ValueError("need at least one finding")
    zone, date = findings[0].zone, findings[0].date
    level = max(f.severity for f in findings)
    if all(f.confidence == "low" for f in findings):
        level = max(0, level - 1)
    classes: dict[str, int] = {}
    for f in findings:
        if f.agent == "hazard":
            classes.update(f.classes)
    justification = [{"agent": f.agent, "target": f.target, "severity": f.severity,
                      "confidence": f.confidence, "flags": list(f.flags),
                      "evidence": [e.to_dict() for e in f.evidence]} for f in findings]
    recs = list(RECOMMENDATIONS[level]) + [RECOMMENDATION_NOTE]
    return OperationalReport(zone, date, level, classes, justification,
                             reliability_notes(list(classes) or [TargetKind.DFE.value]),
                             recs, list(context))


_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}")
_NUM_RE = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?![\w.])")


def _walk(doc, numbers: list[str], strings: list[str]) -> None:
    if isinstance(doc, bool) or doc is None:
        return
    if isinstance(doc, (int, float)):
        numbers.append(canonical_number(doc))
    elif isinstance(doc, str):
        strings.append(doc)
    elif isinstance(doc, Mapping):
        for k, v in doc.items():
            strings.append(str(k))
            _walk(v, numbers, strings)
    elif isinstance(doc, (list, tuple)):
        for v in doc:
            _walk(v, numbers, strings)


def numerals(doc) -> tuple[set[str], set[str]]:
    """Canonical numbers and ISO dates appearing anywhere in ``doc``."""
    numbers: list[str] = []
    strings: list[str] = []
    _walk(doc, numbers, strings)
    dates: set[str] = set()
    for s in strings:
        dates.update(_DATE_RE.findall(s))
        s = _DATE_RE.sub(" ", s)
        numbers.extend(canonical_number(float(m)) for m in _NUM_RE.findall(s))
    return set(numbers), dates


def invented_numbers(report: dict, request: dict) -> set[str]:
    """Numerals in ``report`` that do not appear in the request's findings."""
    allowed, allowed_dates = numerals(request["findings"])
    # the qualification level is checked structurally in synthesize_report
    found, dates = numerals({k: v for k, v in report.items()
                             if k not in ("schema_version", "provenance", "qualification")})
    return (found - allowed) | {d for d in dates if d not in allowed_dates}


def validate_report_doc(doc: dict) -> None:
    import jsonschema

    jsonschema.validate(doc, REPORT_SCHEMA)
    if doc["qualification"]["label"] != LEVEL_LABELS[doc["qualification"]["level"]]:
        raise jsonschema.ValidationError("qualification label does not match its level")
    for t in OPERATIONAL_TARGETS:
        notes = [n for n in doc["reliability_notes"] if n["target"] == t.value]
        if not notes or notes[0]["predictability"] != "low":
            raise jsonschema.ValidationError(f"{t.value} must be flagged low-predictability")


def synthesize_report(findings: Sequence[AgentFinding], context: Sequence[str] = (),
                      backend: Backend | None = None) -> OperationalReport:
    """Fuse findings with the template rules or an external completion backend.

    External responses are accepted only if schema-valid and free of numbers
    absent from the findings; otherwise, or on backend failure, the template
    report is returned with the reason recorded in its provenance.
    """
    if not findings:
        raise ValueError("need at least one finding")
    request = build_request(findings, context)
    digest = input_digest(request)
    fallback_reason = None
    if backend is not None:
        try:
            doc = backend.complete(request)
            validate_report_doc(doc)
            top = max(f.severity for f in findings)
            if doc["qualification"]["level"] not in (top, max(0, top - 1)):
                raise ValueError("qualification level is neither the top severity nor one below it")
            bad = invented_numbers(doc, request)
            if bad:
                raise ValueError(f"response contains numbers absent from the findings: {sorted(bad)}")
            report = OperationalReport.from_dict(doc)
            report.provenance = {"backend": backend.name, "input_digest": digest,
                                 "schema_version": SCHEMA_VERSION}
            return report
        except Exception as exc:  # any failure falls back to the template
            fallback_reason = f"{type(exc).__name__}: {exc}"
            logger.warning("external report backend rejected, using template: %s", fallback_reason)
    report = template_report(findings, context)
    report.provenance = {"backend": "template", "input_digest": digest,
                         "schema_version": SCHEMA_VERSION}
    if fallback_reason is not None:
        report.provenance["fallback_from"] = backend.name
        report.provenance["fallback_reason"] = fallback_reason
    return report

"""Analysis agents. Each turns one kind of model output into an ``AgentFinding``."""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..core import TargetKind, check_risk_class

CONFIDENCE_LEVELS = ("low", "medium", "high")


def canonical_number(x: float | int) -> str:
    """Decimal text used wherever numbers are compared: at most 4 decimals, no trailing zeros."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    s = f"{float(x):.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _r4(x: float) -> float:
    return float(canonical_number(x))


@dataclass(frozen=True)
class Evidence:
    statement: str
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"evidence without numeric backing: {self.statement!r}")

    def to_dict(self) -> dict:
        return {"statement": self.statement, "values": [_num(v) for v in self.values]}


def _num(v: float) -> int | float:
    f = float(v)
    return int(f) if f.is_integer() else f


@dataclass
class AgentFinding:
    agent: str  # hazard | deviation | importance
    target: str  # a target name or "all"
    zone: int
    date: str
    severity: int
    confidence: str
    evidence: list[Evidence]
    flags: list[str] = field(default_factory=list)
    classes: dict[str, int] = field(default_factory=dict)  # argmax class per cited target

    def __post_init__(self):
        check_risk_class(self.severity)
        if self.confidence not in CONFIDENCE_LEVELS:
            raise ValueError(f"unknown confidence {self.confidence!r}")

    def to_dict(self) -> dict:
        return {"agent": self.agent, "target": self.target, "zone": self.zone, "date": self.date,
                "severity": self.severity, "confidence": self.confidence,
                "evidence": [e.to_dict() for e in self.evidence], "flags": list(self.flags),
                "classes": dict(self.classes)}


def confidence_from_probability(p: float, high: float = 0.8, medium: float = 0.5) -> str:
    if p >= high:
        return "high"
    return "medium" if p >= medium else "low"


def _argmax_lower(probs: Sequence[float]) -> int:
    return int(np.argmax(np.asarray(probs, float)))


def hazard_agent(forecasts: Mapping[str, Sequence[float]], zone: int, date: str,
                 high: float = 0.8, medium: float = 0.5) -> AgentFinding:
    """Severity and confidence from the DFE probabilities; every target's forecast is cited.

    Without a DFE forecast the severity is the highest argmax class among the
    remaining targets and the finding is flagged ``degraded``.
    """
    if not forecasts:
        raise ValueError("hazard agent needs at least one forecast")
    order = [t.value for t in TargetKind if t.value in forecasts]
    order += sorted(k for k in forecasts if k not in order)
    evidence = []
    classes = {}
    for t in order:
        probs = [_r4(p) for p in forecasts[t]]
        c = _argmax_lower(forecasts[t])
        classes[t] = c
        evidence.append(Evidence(
            f"{t}: forecast class {c} with probability {canonical_number(probs[c])}; "
            f"class probabilities {', '.join(canonical_number(p) for p in probs)}",
            (c, *probs)))
    dfe = TargetKind.DFE.value
    if dfe in forecasts:
        severity = classes[dfe]
        conf = confidence_from_probability(max(forecasts[dfe]), high, medium)
        return AgentFinding("hazard", dfe, zone, date, severity, conf, evidence, [], classes)
    src = max(order, key=lambda t: (classes[t], -order.index(t)))
    conf = confidence_from_probability(max(forecasts[src]), high, medium)
    return AgentFinding("hazard", src, zone, date, classes[src], conf, evidence, ["degraded"],
                        classes)


def modal_class(observed: Sequence[int]) -> int:
    counts = Counter(int(v) for v in observed)
    if not counts:
        raise ValueError("empty observation window")
    top = max(counts.values())
    return min(c for c, n in counts.items() if n == top)


def deviation_agent(predicted: int, observed: Sequence[int], zone: int, date: str,
                    target: str = TargetKind.DFE.value) -> AgentFinding:
    """Compare the predicted class with the modal class of the recent observations."""
    if len(observed) == 0:
        raise ValueError("empty observation window")
    predicted = check_risk_class(predicted)
    mode = modal_class(observed)
    dev = predicted - mode
    conf = "low" if abs(dev) >= 2 else ("high" if dev == 0 else "medium")
    ev = [Evidence(f"{target}: predicted class {predicted} against modal class {mode} "
                   f"over the last {len(observed)} observed days (deviation {dev:+d})",
                   (predicted, mode, dev, len(observed)))]
    flags = ["regime-change"] if abs(dev) >= 2 else []
    return AgentFinding("deviation", target, zone, date, predicted, conf, ev, flags)


def importance_agent(importances: Mapping[str, float], severity: int, zone: int, date: str,
                     k: int = 5, target: str = TargetKind.DFE.value) -> AgentFinding:
    """Top-k features by permutation importance (ties by name); severity is copied, not re-rated."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    if all(v == 0 for v in importances.values()):
        flags, conf = ["uninformative"], "low"
    else:
        flags, conf = [], "medium"
    ev = [Evidence(f"{name}: IoU drop {canonical_number(v)} when permuted", (_r4(v),))
          for name, v in ranked]
    if not ev:
        ev = [Evidence("no feature importances available", (0,))]
        flags = ["uninformative"]
    return AgentFinding("importance", target, zone, date, severity, conf, ev, flags)

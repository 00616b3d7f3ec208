from __future__ import annotations

import json

from .synthesis import OperationalReport


def report_json(report: OperationalReport) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def report_text(report: OperationalReport) -> str:
    lines = [f"Operational wildfire risk report - zone {report.zone}, {report.date}",
             "",
             f"Risk qualification: {report.label.upper()} (level {report.qualification})",
             "  (presentation ceiling over the findings, not a combined score)",
             "",
             "Forecast class per target:"]
    for t, c in report.per_target_classes.items():
        lines.append(f"  {t:<18} {c}")
    lines += ["", "Justification:"]
    for j in report.justification:
        flags = f" [{', '.join(j.get('flags', []))}]" if j.get("flags") else ""
        lines.append(f"  {j['agent']} agent, confidence {j['confidence']}{flags}:")
        for e in j["evidence"]:
            lines.append(f"    - {e['statement']}")
    lines += ["", "Reliability:"]
    for n in report.reliability_notes:
        lines.append(f"  {n['target']:<18} {n['predictability']:<5} {n['note']}")
    lines += ["", "Recommendations:"]
    lines += [f"  {i}. {r}" for i, r in enumerate(report.recommendations, 1)]
    if report.context_notes:
        lines += ["", "Context notes:"] + [f"  - {c}" for c in report.context_notes]
    prov = report.provenance
    lines += ["", f"Backend: {prov.get('backend', '?')}; input digest {prov.get('input_digest', '?')}"]
    if "fallback_reason" in prov:
        lines.append(f"Fallback from {prov['fallback_from']}: {prov['fallback_reason']}")
    return "\n".join(lines) + "\n"

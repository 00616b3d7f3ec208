import copy
from collections import Counter
from pathlib import Path

import jsonschema
import pytest
from hypothesis import given, strategies as st

from firerisk.reportgen import (AgentFinding, BackendConfigError, Evidence, ExternalBackend,
                                MockCompletionServer, canonical_number, deviation_agent,
                                hazard_agent, importance_agent, invented_numbers, modal_class,
                                report_json, report_text, synthesize_report, template_report)
from firerisk.reportgen.synthesis import build_request, validate_report_doc
from report_fixtures import CONTEXT, DATE, ZONE, fixture_findings

GOLDEN = Path(__file__).parent / "golden"


def test_hazard_agent_examples():
    h = hazard_agent({"dfe": [0.01, 0.04, 0.1, 0.25, 0.6]}, 61, DATE)
    assert (h.severity, h.confidence) == (4, "medium")
    u = hazard_agent({"dfe": [0.2] * 5}, 61, DATE)
    assert (u.severity, u.confidence) == (0, "low")
    d = hazard_agent({"num_fires": [0.1, 0.2, 0.5, 0.1, 0.1]}, 61, DATE)
    assert d.severity == 2 and "degraded" in d.flags
    assert hazard_agent({"dfe": [0, 0, 0.05, 0.05, 0.9]}, 61, DATE).confidence == "high"
    with pytest.raises(ValueError):
        hazard_agent({}, 61, DATE)


@given(st.lists(st.floats(0, 1), min_size=5, max_size=5).filter(lambda v: sum(v) > 0))
def test_hazard_severity_is_cited_argmax(raw):
    probs = [v / sum(raw) for v in raw]
    h = hazard_agent({"dfe": probs}, 61, DATE)
    ev = h.evidence[0]
    assert h.severity == ev.values[0]
    cited = ev.values[1:]
    assert cited[h.severity] == max(cited)
    assert all(e.values for e in h.evidence)


def test_deviation_agent_examples():
    f = deviation_agent(4, [1, 1, 1, 2, 0, 1, 3], 61, DATE)
    assert f.evidence[0].values[2] == 3 and f.confidence == "low"
    assert "regime-change" in f.flags
    g = deviation_agent(2, [2, 2, 1, 2, 3, 2, 2], 61, DATE)
    assert g.evidence[0].values[2] == 0 and g.confidence == "high"
    assert deviation_agent(2, [1, 1, 1], 61, DATE).confidence == "medium"
    with pytest.raises(ValueError):
        deviation_agent(2, [], 61, DATE)


@given(st.lists(st.integers(0, 4), min_size=7, max_size=7))
def test_modal_class_brute_force(window):
    counts = Counter(window)
    best = None
    for c in range(5):
        if counts[c] and (best is None or counts[c] > counts[best]):
            best = c
    assert modal_class(window) == best


def test_importance_agent_examples():
    imp = {"a": 0.1, "b": 0.05, "c": 0.0}
    f = importance_agent(imp, 3, 61, DATE, k=2)
    assert [e.statement.split(":")[0] for e in f.evidence] == ["a", "b"]
    assert f.severity == 3
    tie = importance_agent({"zeta": 0.2, "beta": 0.1, "alpha": 0.1}, 1, 61, DATE, k=2)
    assert [e.statement.split(":")[0] for e in tie.evidence] == ["zeta", "alpha"]
    big = importance_agent(imp, 0, 61, DATE, k=10)
    assert len(big.evidence) == 3
    flat = importance_agent({"a": 0.0, "b": 0.0}, 2, 61, DATE)
    assert flat.flags == ["uninformative"] and flat.confidence == "low"


def test_evidence_needs_numbers():
    with pytest.raises(ValueError):
        Evidence("no numbers", ())
    with pytest.raises(ValueError):
        AgentFinding("hazard", "dfe", 61, DATE, 5, "high", [])


def test_canonical_number():
    assert canonical_number(0.60000) == "0.6"
    assert canonical_number(3) == "3"
    assert canonical_number(0.123456) == "0.1235"
    assert canonical_number(-0.00001) == "0"


def _finding(sev, conf, agent="hazard"):
    return AgentFinding(agent, "dfe", 61, DATE, sev, conf, [Evidence("x", (sev,))])


def test_fusion_examples():
    r = synthesize_report([_finding(3, "high")])
    assert r.qualification == 3 and len(r.justification) == 1
    r = synthesize_report([_finding(4, "low"), _finding(2, "low", "deviation"),
                           _finding(1, "low", "importance")])
    assert r.qualification == 3
    r = synthesize_report([_finding(4, "low"), _finding(2, "medium", "deviation")])
    assert r.qualification == 4


def test_reliability_notes_always_flag_operational_targets():
    for findings in ([_finding(0, "high")], fixture_findings()):
        doc = synthesize_report(findings).to_dict()
        notes = {n["target"]: n["predictability"] for n in doc["reliability_notes"]}
        for t in ("num_fires", "intervention_time", "resources"):
            assert notes[t] == "low"
        validate_report_doc(doc)


def test_template_golden_files():
    r = synthesize_report(fixture_findings(), CONTEXT)
    assert report_json(r) == (GOLDEN / "template_report.json").read_text(encoding="utf-8")
    assert report_text(r) == (GOLDEN / "template_report.txt").read_text(encoding="utf-8")


def test_template_is_pure():
    a = report_json(synthesize_report(fixture_findings(), CONTEXT))
    b = report_json(synthesize_report(fixture_findings(), CONTEXT))
    assert a == b
    with pytest.raises(ValueError):
        template_report([])


def _canned():
    doc = template_report(fixture_findings(), CONTEXT).to_dict()
    doc["recommendations"] = ["Hold engine groups at the forest interface.",
                              "Recommendations are illustrative and do not represent operational doctrine."]
    doc.pop("provenance")
    return doc


def test_mock_backend_echoes_valid_response():
    canned = _canned()
    with MockCompletionServer(response=canned) as srv:
        r = synthesize_report(fixture_findings(), CONTEXT, ExternalBackend(srv.url, token="t0k"))
        assert srv.requests[0]["auth"] == "Bearer t0k"
        assert srv.requests[0]["body"] == build_request(fixture_findings(), CONTEXT)
    out = r.to_dict()
    assert out.pop("provenance")["backend"] == "external"
    assert out == canned


def test_tampered_number_falls_back_to_template():
    canned = _canned()
    canned["justification"][0]["evidence"][0]["statement"] += " (probability 0.75)"
    findings = fixture_findings()
    request = build_request(findings, CONTEXT)
    assert invented_numbers(canned, request) == {"0.75"}
    with MockCompletionServer(response=canned) as srv:
        r = synthesize_report(findings, CONTEXT, ExternalBackend(srv.url))
    assert r.provenance["backend"] == "template"
    assert r.provenance["fallback_from"] == "external"
    assert "0.75" in r.provenance["fallback_reason"]
    expected = synthesize_report(findings, CONTEXT).to_dict()
    got = r.to_dict()
    got["provenance"] = expected["provenance"]
    assert got == expected


def test_invented_date_and_bad_level_rejected():
    findings = fixture_findings()
    canned = _canned()
    canned["context_notes"] = ["Compare with 2019-07-28."]
    with MockCompletionServer(response=canned) as srv:
        assert synthesize_report(findings, CONTEXT, ExternalBackend(srv.url)).provenance[
            "backend"] == "template"
    canned = _canned()
    canned["qualification"] = {"level": 1, "label": "moderate"}
    with MockCompletionServer(response=canned) as srv:
        r = synthesize_report(findings, CONTEXT, ExternalBackend(srv.url))
    assert r.provenance["backend"] == "template"


def test_schema_invalid_and_missing_reliability_fall_back():
    findings = fixture_findings()
    bad = _canned()
    del bad["justification"]
    with MockCompletionServer(response=bad) as srv:
        assert synthesize_report(findings, (), ExternalBackend(srv.url)).provenance[
            "backend"] == "template"
    bad = _canned()
    bad["reliability_notes"] = [n for n in bad["reliability_notes"] if n["target"] != "resources"]
    with pytest.raises(jsonschema.ValidationError):
        validate_report_doc(bad)


def test_backend_failures_fall_back():
    with MockCompletionServer(response=_canned(), status=500) as srv:
        r = synthesize_report(fixture_findings(), (), ExternalBackend(srv.url, retries=0))
    assert "fallback_reason" in r.provenance
    with MockCompletionServer(response=_canned(), delay=1.0) as srv:
        r = synthesize_report(fixture_findings(), (),
                              ExternalBackend(srv.url, timeout=0.2, retries=0))
    assert r.provenance["backend"] == "template"


def test_backend_needs_endpoint(monkeypatch):
    monkeypatch.delenv("FIRERISK_REPORT_ENDPOINT", raising=False)
    with pytest.raises(BackendConfigError):
        ExternalBackend.from_env()
    monkeypatch.setenv("FIRERISK_REPORT_ENDPOINT", "http://127.0.0.1:9/x")
    monkeypatch.setenv("FIRERISK_REPORT_TOKEN", "abc")
    b = ExternalBackend.from_env()
    assert b.endpoint.endswith("/x") and b.token == "abc"


@given(st.lists(st.tuples(st.integers(0, 4), st.sampled_from(["low", "medium", "high"])),
                min_size=1, max_size=5))
def test_qualification_ceiling(pairs):
    findings = [_finding(s, c, a) for (s, c), a in
                zip(pairs, ["hazard", "deviation", "importance", "hazard", "deviation"])]
    r = template_report(findings)
    top = max(s for s, _ in pairs)
    if all(c == "low" for _, c in pairs):
        assert r.qualification == max(0, top - 1)
    else:
        assert r.qualification == top
    assert len(r.justification) == len(findings)

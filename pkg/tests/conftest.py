import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_dataset():
    from firerisk.synthgen import DEFAULT_PROFILES, GeneratorConfig, build_dataset

    cfg = GeneratorConfig(seed=3, years=(2020, 2022), profiles=DEFAULT_PROFILES[:3],
                          train_years=(2020, 2020))
    return build_dataset(cfg)


TINY_CONFIG = """\
seed: 5
data:
  years: [2020, 2022]
  train_years: [2020, 2020]
  val_years: [2021, 2021]
  test_years: [2022, 2022]
  zones: [61, 62, 65]
model:
  hidden_size: 6
  num_layers: 1
  head_hidden: 8
  embedding: 4
training:
  max_epochs: 4
  patience: 1
  scan_max_epochs: 2
  scan_patience: 1
undersampling:
  rates: [0.5, 1.0]
baselines:
  rho_grid: [0.5, 0.8]
  logreg_max_iter: 100
report:
  importance_repeats: 1
"""


@pytest.fixture(scope="session")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.yaml"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory, tiny_config):
    """Synthetic dataset plus a trained manifest at toy scale, shared by CLI tests."""
    from firerisk.cli import main

    root = tmp_path_factory.mktemp("tiny_run")
    data = root / "data.csv"
    assert main(["synth", "--config", str(tiny_config), "--out", str(data)]) == 0
    assert main(["train", str(data), "--config", str(tiny_config), "--out",
                 str(root / "run")]) == 0
    return root, data, root / "run" / "manifest.json"


# acceptance summary: one line per criterion, whatever the pytest verbosity
_CRITERIA: dict[int, dict] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    props = report.user_properties
    numbers = [v for k, v in props if k == "criterion"]
    if not numbers:
        return
    entry = _CRITERIA.setdefault(numbers[0], {"ok": True, "detail": []})
    if report.failed:
        entry["ok"] = False
    if report.when == "call":
        entry["detail"] += [v for k, v in props if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        status = "PASS" if e["ok"] else "FAIL"
        detail = "; ".join(e["detail"])
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {detail}".rstrip())

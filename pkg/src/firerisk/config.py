"""Experiment configuration: typed sections loaded from a YAML document.

Unset keys take the reference hyperparameters. ``desk_config()`` returns the
bundled reduced-budget profile used by the CLI when no file is given.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .core import DEFAULT_ZONES, TargetKind
from .features import DEFAULT_RATE_GRID
from .baselines import DEFAULT_RHO_GRID


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


def derive_seed(root: int, component: str) -> int:
    """32-bit sub-seed from the root seed and a component name."""
    digest = hashlib.sha256(f"{int(root)}/{component}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class DataSection:
    years: tuple[int, int] = (2020, 2023)
    train_years: tuple[int, int] = (2020, 2021)
    val_years: tuple[int, int] = (2022, 2022)
    test_years: tuple[int, int] = (2023, 2023)
    zones: tuple[int, ...] = DEFAULT_ZONES

    def validate(self) -> None:
        for name in ("years", "train_years", "val_years", "test_years"):
            a, b = getattr(self, name)
            if b < a:
                raise ConfigError(f"data.{name}", "end year before start year")
        spans = [self.train_years, self.val_years, self.test_years]
        for i in range(3):
            for j in range(i + 1, 3):
                if spans[i][0] <= spans[j][1] and spans[j][0] <= spans[i][1]:
                    raise ConfigError("data", "train/val/test years overlap")


@dataclass
class FeatureSection:
    variance_threshold: float = 1e-8
    correlation_threshold: float = 0.95
    sequence_length: int = 11

    def validate(self) -> None:
        if self.variance_threshold < 0:
            raise ConfigError("features.variance_threshold", "must be >= 0")
        if not 0 < self.correlation_threshold <= 1:
            raise ConfigError("features.correlation_threshold", "must lie in (0, 1]")
        if self.sequence_length < 1:
            raise ConfigError("features.sequence_length", "must be >= 1")


@dataclass
class ModelSection:
    hidden_size: int = 128
    num_layers: int = 2
    head_hidden: int = 256
    embedding: int = 64
    dropout: float = 0.03

    def validate(self) -> None:
        for f in ("hidden_size", "num_layers", "head_hidden", "embedding"):
            if getattr(self, f) < 1:
                raise ConfigError(f"model.{f}", "must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ConfigError("model.dropout", "must lie in [0, 1)")


@dataclass
class TrainingSection:
    learning_rate: float = 5e-4
    max_epochs: int = 3000
    patience: int = 100
    batch_size: int = 64
    horizons: tuple[int, ...] = (1,)
    scan_max_epochs: int = 3000
    scan_patience: int = 100

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("training.learning_rate", "must be > 0")
        for f in ("max_epochs", "batch_size", "scan_max_epochs"):
            if getattr(self, f) < 1:
                raise ConfigError(f"training.{f}", "must be >= 1")
        if not 0 <= self.patience <= self.max_epochs:
            raise ConfigError("training.patience", "must lie in [0, max_epochs]")
        if not 0 <= self.scan_patience <= self.scan_max_epochs:
            raise ConfigError("training.scan_patience", "must lie in [0, scan_max_epochs]")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError("training.horizons", "need one or more horizons >= 1")


@dataclass
class SamplingSection:
    rates: tuple[float, ...] = DEFAULT_RATE_GRID
    enabled: bool = True

    def validate(self) -> None:
        if not self.rates:
            raise ConfigError("undersampling.rates", "empty grid")
        if any(not 0.05 - 1e-12 <= r <= 1.0 + 1e-12 for r in self.rates):
            raise ConfigError("undersampling.rates", "rates must lie in [0.05, 1.0]")


@dataclass
class BaselineSection:
    rho_grid: tuple[float, ...] = DEFAULT_RHO_GRID
    logreg_max_iter: int = 2000

    def validate(self) -> None:
        if not self.rho_grid or any(not 0 < r <= 1 for r in self.rho_grid):
            raise ConfigError("baselines.rho_grid", "values must lie in (0, 1]")
        if self.logreg_max_iter < 1:
            raise ConfigError("baselines.logreg_max_iter", "must be >= 1")


@dataclass
class ReportSection:
    confidence_high: float = 0.8
    confidence_medium: float = 0.5
    top_k: int = 5
    deviation_window: int = 7
    importance_repeats: int = 3
    endpoint_env: str = "FIRERISK_REPORT_ENDPOINT"
    token_env: str = "FIRERISK_REPORT_TOKEN"
    timeout_seconds: float = 10.0

    def validate(self) -> None:
        if not 0 <= self.confidence_medium <= self.confidence_high <= 1:
            raise ConfigError("report", "need 0 <= confidence_medium <= confidence_high <= 1")
        if self.top_k < 1 or self.deviation_window < 1 or self.importance_repeats < 1:
            raise ConfigError("report", "top_k, deviation_window and importance_repeats must be >= 1")
        if self.timeout_seconds <= 0:
            raise ConfigError("report.timeout_seconds", "must be > 0")


@dataclass
class ExperimentConfig:
    seed: int = 0
    targets: tuple[str, ...] = tuple(t.value for t in TargetKind)
    data: DataSection = field(default_factory=DataSection)
    features: FeatureSection = field(default_factory=FeatureSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    undersampling: SamplingSection = field(default_factory=SamplingSection)
    baselines: BaselineSection = field(default_factory=BaselineSection)
    report: ReportSection = field(default_factory=ReportSection)

    def validate(self) -> "ExperimentConfig":
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        if not self.targets:
            raise ConfigError("targets", "need at least one target")
        for t in self.targets:
            try:
                TargetKind.parse(t)
            except ValueError as exc:
                raise ConfigError("targets", str(exc)) from None
        for f in fields(self):
            section = getattr(self, f.name)
            if hasattr(section, "validate") and f.name not in ("seed", "targets"):
                section.validate()
        return self

    def target_kinds(self) -> list[TargetKind]:
        return [TargetKind.parse(t) for t in self.targets]

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _coerce(value: Any, default: Any, path: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, f"expected a list, got {value!r}")
        if default:
            return tuple(_coerce(v, default[0], f"{path}[{i}]") for i, v in enumerate(value))
        return tuple(value)
    return value


def _merge(section: Any, raw: Any, path: str) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected a mapping, got {type(raw).__name__}")
    known = {f.name: f for f in fields(section)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    updates = {}
    for key, value in raw.items():
        current = getattr(section, key)
        sub = f"{path}.{key}" if path else key
        if dataclasses.is_dataclass(current):
            updates[key] = _merge(current, value, sub)
        elif key == "targets":
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise ConfigError(sub, "expected a list of target names")
            updates[key] = tuple(value)
        else:
            updates[key] = _coerce(value, current, sub)
    return dataclasses.replace(section, **updates)


def config_from_dict(raw: dict | None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = ExperimentConfig() if base is None else base
    if raw is None:
        return base.validate()
    return _merge(base, raw, "").validate()


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Parse a YAML config; with no path, return the desk profile."""
    if path is None:
        return desk_config()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {p}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"malformed YAML: {exc}") from None
    return config_from_dict(raw)


def desk_config() -> ExperimentConfig:
    text = resources.files("firerisk").joinpath("configs/desk.yaml").read_text(encoding="utf-8")
    return config_from_dict(yaml.safe_load(text))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)

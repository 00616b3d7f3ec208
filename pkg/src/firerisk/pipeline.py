"""End-to-end experiment: dataset -> labels -> features -> models -> predictions -> manifest.

Artifacts live in one output directory and are referenced from
``manifest.json`` by relative path and SHA-256 digest. Nothing time- or
host-dependent is written, so reruns with the same inputs are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .baselines import (PoissonRates, WeekModeTable, ConstantClass, last_day, logreg_train,
                        persistence_lookup)
from .config import ExperimentConfig, derive_seed
from .core import OPERATIONAL_TARGETS, RecordValidationError, TargetKind, validate_record
from .features import (SamplingPlan, Standardizer, WindowTensor, build_feature_matrix,
                       make_windows, scan_undersampling, select_features, undersample)
from .metrics import evaluate, permutation_importance, target_correlation_matrix
from .nn import GruConfig, TrainConfig, load_checkpoint, predict, save_checkpoint, train
from .synthgen import CSV_COLUMNS, read_csv, records_frame
from .targets import BinningModel, build_labels, fit_target_binnings

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SPLITS = ("train", "val", "test")
MODEL_COLUMNS = ("gru", "persistence", "week_mode", "poisson", "logreg")
PROB_COLUMNS = tuple(f"p{c}" for c in range(5))


class DataValidationError(ValueError):
    pass


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n",
                    encoding="utf-8")


def load_dataset(path: str | Path, zones=None) -> pd.DataFrame:
    """Read and validate a dataset CSV; raises DataValidationError with the first bad row."""
    try:
        data = read_csv(path)
    except (OSError, ValueError) as exc:
        raise DataValidationError(str(exc)) from None
    kw = {} if zones is None else {"zones": zones}
    for i, row in enumerate(records_frame(data).to_dict("records")):
        try:
            validate_record(row, **kw)
        except RecordValidationError as exc:
            raise DataValidationError(f"row {i + 2}: {exc}") from None
    if data.duplicated(["zone", "date"]).any():
        raise DataValidationError("duplicate (zone, date) rows")
    return data.sort_values(["zone", "date"]).reset_index(drop=True)


def split_of(dates: pd.Series, cfg: ExperimentConfig) -> np.ndarray:
    years = pd.to_datetime(dates).dt.year.to_numpy()
    out = np.full(len(years), "", dtype=object)
    for name, (a, b) in (("train", cfg.data.train_years), ("val", cfg.data.val_years),
                         ("test", cfg.data.test_years)):
        out[(years >= a) & (years <= b)] = name
    return out


@dataclass
class Prepared:
    data: pd.DataFrame
    labels: pd.DataFrame
    binnings: dict
    fm: pd.DataFrame
    split: np.ndarray
    kept: list[str]
    dropped: dict[str, str]
    standardizer: Standardizer


def prepare(data: pd.DataFrame, cfg: ExperimentConfig) -> Prepared:
    # feature rows come back sorted by (zone, date); keep everything aligned to that order
    data = data.sort_values(["zone", "date"]).reset_index(drop=True)
    split = split_of(data["date"], cfg)
    if not (split == "train").any():
        raise DataValidationError("no rows in the training years")
    binnings = fit_target_binnings(data, cfg.data.train_years, seed=derive_seed(cfg.seed, "binning"))
    labels = build_labels(data, binnings)
    fm = build_feature_matrix(data, labels, zones=cfg.data.zones)
    train_fm = fm[split == "train"]
    sel = select_features(train_fm, cfg.features.variance_threshold,
                          cfg.features.correlation_threshold)
    std = Standardizer.fit(train_fm, sel.kept)
    return Prepared(data, labels, binnings, fm, split, sel.kept, sel.dropped, std)


def windows_for(prep: Prepared, cfg: ExperimentConfig, target: TargetKind, split: str,
                horizon: int) -> WindowTensor:
    mask = prep.split == split
    return make_windows(prep.fm[mask], prep.labels.loc[mask, target.value].to_numpy(), prep.kept,
                        cfg.features.sequence_length, horizon, target, prep.standardizer)


def gru_config(cfg: ExperimentConfig, n_channels: int) -> GruConfig:
    m = cfg.model
    return GruConfig(n_channels, cfg.features.sequence_length, m.hidden_size, m.num_layers,
                     m.head_hidden, m.embedding, dropout=m.dropout)


def train_config(cfg: ExperimentConfig, target: TargetKind, horizon: int,
                 scan: bool = False) -> TrainConfig:
    t = cfg.training
    return TrainConfig(learning_rate=t.learning_rate,
                       max_epochs=t.scan_max_epochs if scan else t.max_epochs,
                       patience=t.scan_patience if scan else t.patience,
                       batch_size=t.batch_size,
                       seed=derive_seed(cfg.seed, f"gru/{target.value}/h{horizon}"),
                       horizon=horizon)


def choose_sampling(prep: Prepared, cfg: ExperimentConfig, target: TargetKind,
                    train_w: WindowTensor, val_w: WindowTensor) -> SamplingPlan:
    """Rate scan on the primary horizon; DFE and disabled scans keep every window."""
    seed = derive_seed(cfg.seed, f"undersample/{target.value}")
    if target is TargetKind.DFE or not cfg.undersampling.enabled:
        return SamplingPlan(rate=1.0, seed=seed)
    gcfg = gru_config(cfg, len(prep.kept))
    tcfg = train_config(cfg, target, train_w.horizon, scan=True)

    def score(w: WindowTensor) -> float:
        return train(w, val_w, gcfg, tcfg)[1].best_val_iou

    return scan_undersampling(train_w, score, cfg.undersampling.rates, seed)


def _label_frame(w: WindowTensor, split: str, target: TargetKind) -> pd.DataFrame:
    return pd.DataFrame({
        "split": split, "target": target.value, "horizon": w.horizon,
        "zone": w.zones.astype(int), "date": pd.to_datetime(w.dates).strftime("%Y-%m-%d"),
        "y_true": w.y.astype(int),
    })


def run_train(dataset_path: str | Path, cfg: ExperimentConfig, out_dir: str | Path,
              targets: list[TargetKind] | None = None) -> Path:
    """Train GRUs and baselines for each target; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    targets = cfg.target_kinds() if targets is None else targets
    data = load_dataset(dataset_path, cfg.data.zones)
    prep = prepare(data, cfg)
    horizons = list(cfg.training.horizons)
    h0 = horizons[0]

    labels_path = out / "labels.csv"
    lab = prep.labels.copy()
    lab["date"] = pd.to_datetime(lab["date"]).dt.strftime("%Y-%m-%d")
    lab["split"] = prep.split
    lab.to_csv(labels_path, index=False, lineterminator="\n")

    pred_frames, checkpoints, plans, histories, importances = [], {}, {}, {}, {}
    baseline_state: dict[str, dict] = {}
    train_rows = prep.split == "train"
    train_data = prep.data[train_rows]
    train_labels = prep.labels[train_rows]
    gcfg = gru_config(cfg, len(prep.kept))

    for target in targets:
        logger.info("target %s", target.value)
        wins = {s: {h: windows_for(prep, cfg, target, s, h) for h in horizons} for s in SPLITS}
        if len(wins["train"][h0]) == 0:
            raise DataValidationError(f"{target.value}: no training windows")
        plan = choose_sampling(prep, cfg, target, wins["train"][h0], wins["val"][h0])
        plans[target.value] = plan.to_dict()

        week = WeekModeTable.fit(train_labels, target.value)
        const = ConstantClass.fit(train_labels[target.value].to_numpy())
        binning = prep.binnings.get(target, prep.binnings.get(TargetKind.NUM_FIRES))
        rates = PoissonRates.fit(train_data, target if target is not TargetKind.DFE
                                 else TargetKind.NUM_FIRES)
        baseline_state[target.value] = {"week_mode": week.to_dict(), "constant": const.value,
                                        "poisson": rates.to_dict()}

        checkpoints[target.value] = {}
        histories[target.value] = {}
        for h in horizons:
            tw = undersample(wins["train"][h], plan.rate, plan.seed)
            tcfg = train_config(cfg, target, h)
            model, hist = train(tw, wins["val"][h], gcfg, tcfg)
            ck = out / f"gru_{target.value}_h{h}.json"
            save_checkpoint(ck, model, tcfg, hist.best_val_iou,
                            extra={"target": target.value, "horizon": h,
                                   "features": prep.kept, "sampling": plan.to_dict()})
            checkpoints[target.value][str(h)] = {"path": ck.name, "sha256": sha256_file(ck)}
            histories[target.value][str(h)] = {"epochs": len(hist), "best_epoch": hist.best_epoch,
                                              "best_val_iou": hist.best_val_iou}

            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", RuntimeWarning)
                lr = logreg_train(last_day(wins["train"][h].x), wins["train"][h].y,
                                  last_day(wins["val"][h].x), wins["val"][h].y,
                                  cfg.baselines.rho_grid,
                                  seed=derive_seed(cfg.seed, f"logreg/{target.value}"),
                                  max_iter=cfg.baselines.logreg_max_iter)
            for wmsg in caught:
                logger.info("%s (%s, h=%d)", wmsg.message, target.value, h)
            baseline_state[target.value][f"logreg_h{h}"] = {"rho": lr.rho, "val_iou": lr.val_iou}

            for s in ("val", "test"):
                w = wins[s][h]
                if len(w) == 0:
                    continue
                fc = predict(model, w)
                frame = _label_frame(w, s, target)
                frame["gru"] = fc.classes
                frame["persistence"] = persistence_lookup(prep.labels, target.value, w.zones,
                                                          w.dates, h)
                frame["week_mode"] = week.predict(w.zones, w.dates)
                frame["poisson"] = (rates.predict(w.zones, binning) if binning is not None
                                    else np.zeros(len(w), dtype=int))
                frame["logreg"] = lr.predict(last_day(w.x))
                frame["constant"] = const.predict(len(w))
                for c in range(5):
                    frame[f"p{c}"] = fc.probs[:, c]
                pred_frames.append(frame)
                if s == "test" and h == h0:
                    importances[target.value] = permutation_importance(
                        lambda x, m=model: predict(m, x).classes, w.x, w.y, w.feature_names,
                        seed=derive_seed(cfg.seed, f"importance/{target.value}"),
                        repeats=cfg.report.importance_repeats)

    preds = pd.concat(pred_frames, ignore_index=True)
    pred_path = out / "predictions.csv"
    preds.to_csv(pred_path, index=False, float_format="%.12g", lineterminator="\n")

    evaluations = [evaluate(g["y_true"], g[m], t, s, m).to_dict()
                   for (s, t), g in preds[preds["horizon"] == h0].groupby(["split", "target"], sort=True)
                   for m in MODEL_COLUMNS]
    corr = target_correlation_matrix(prep.labels[train_rows],
                                     [t for t in TargetKind if t.value in prep.labels])
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "tool_version": __version__,
        "config": cfg.to_dict(),
        "targets": [t.value for t in targets],
        "horizons": horizons,
        "dataset": {"path": str(Path(dataset_path).resolve().name),
                    "sha256": sha256_file(dataset_path), "rows": len(data)},
        "preprocessing": {
            "kept_columns": prep.kept, "dropped_columns": prep.dropped,
            "standardizer": prep.standardizer.to_dict(),
            "binnings": {t.value: m.to_dict() for t, m in prep.binnings.items()
                         if isinstance(m, BinningModel)},
        },
        "sampling": plans,
        "checkpoints": checkpoints,
        "histories": histories,
        "baselines": baseline_state,
        "labels": {"path": labels_path.name, "sha256": sha256_file(labels_path)},
        "predictions": {"path": pred_path.name, "sha256": sha256_file(pred_path)},
        "evaluations": evaluations,
        "importances": importances,
        "target_correlation": {k: [None if np.isnan(v) else v for v in row]
                               for k, row in zip(corr.index, corr.to_numpy().tolist())},
    }
    path = out / "manifest.json"
    write_json(path, manifest)
    return path


def load_manifest(path: str | Path, verify: bool = True) -> tuple[dict, Path]:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    if not p.exists():
        raise FileNotFoundError(f"manifest not found: {p}")
    doc = json.loads(p.read_text(encoding="utf-8"))
    base = p.parent
    if verify:
        refs = [doc["predictions"], doc["labels"]]
        refs += [ck for per_t in doc["checkpoints"].values() for ck in per_t.values()]
        for ref in refs:
            f = base / ref["path"]
            if not f.exists():
                raise FileNotFoundError(f"missing artifact referenced by manifest: {f}")
            if sha256_file(f) != ref["sha256"]:
                raise DataValidationError(f"digest mismatch for {f}")
    return doc, base


def evaluation_table(manifest_path: str | Path, split: str = "test") -> pd.DataFrame:
    """Target x model IoU recomputed from the stored per-day predictions."""
    if split not in ("val", "test"):
        raise ValueError(f"unknown split {split!r}; expected 'val' or 'test'")
    doc, base = load_manifest(manifest_path)
    preds = pd.read_csv(base / doc["predictions"]["path"])
    h0 = doc["horizons"][0]
    sub = preds[(preds["split"] == split) & (preds["horizon"] == h0)]
    rows = {}
    for t in doc["targets"]:
        g = sub[sub["target"] == t]
        if len(g) == 0:
            continue
        rows[t] = {m: evaluate(g["y_true"], g[m], t, split, m).iou for m in MODEL_COLUMNS}
    return pd.DataFrame.from_dict(rows, orient="index", columns=list(MODEL_COLUMNS))


def load_model(doc: dict, base: Path, target: str, horizon: int | None = None):
    h = str(doc["horizons"][0] if horizon is None else horizon)
    try:
        ref = doc["checkpoints"][target][h]
    except KeyError:
        raise FileNotFoundError(f"no checkpoint for target {target!r}, horizon {h}") from None
    return load_checkpoint(base / ref["path"])[0]


def operational_targets_in(doc: dict) -> list[str]:
    return [t.value for t in OPERATIONAL_TARGETS if t.value in doc["targets"]]


# --------------------------------------------------------------------- report
def report_findings(doc: dict, base: Path, zone: int, date: str, high: float = 0.8,
                    medium: float = 0.5, top_k: int = 5, window: int = 7) -> list:
    """Agent findings for one test-split zone-day from the stored predictions."""
    from .reportgen import deviation_agent, hazard_agent, importance_agent

    preds = pd.read_csv(base / doc["predictions"]["path"])
    h0 = doc["horizons"][0]
    test = preds[(preds["split"] == "test") & (preds["horizon"] == h0)]
    rows = test[(test["zone"] == int(zone)) & (test["date"] == date)]
    if rows.empty:
        dates = sorted(test["date"].unique())
        span = f"{dates[0]}..{dates[-1]}" if dates else "none"
        raise LookupError(f"no test-split forecast for zone {zone} on {date} (test dates {span})")
    forecasts = {r.target: [getattr(r, c) for c in PROB_COLUMNS] for r in rows.itertuples()}
    hazard = hazard_agent(forecasts, int(zone), date, high, medium)
    findings = [hazard]

    labels = pd.read_csv(base / doc["labels"]["path"])
    t = hazard.target
    z = labels[labels["zone"] == int(zone)].sort_values("date")
    last_obs = (pd.Timestamp(date) - pd.Timedelta(days=h0)).strftime("%Y-%m-%d")
    hist = z[z["date"] <= last_obs][t].to_numpy()[-window:]
    if len(hist):
        findings.append(deviation_agent(hazard.classes[t], hist, int(zone), date, t))
    imp = doc.get("importances", {}).get(t)
    if imp:
        findings.append(importance_agent(imp, hazard.severity, int(zone), date, top_k, t))
    return findings


__all__ = ["CSV_COLUMNS", "DataValidationError", "MODEL_COLUMNS", "evaluation_table",
           "load_dataset", "load_manifest", "load_model", "prepare", "report_findings",
           "run_train"]

"""Command line: ``firerisk synth | train | evaluate | report``.

Exit codes: 0 success, 2 configuration error, 3 data validation error,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from .config import ConfigError, ExperimentConfig, load_config
from .core import RecordValidationError, TargetKind
from .pipeline import DataValidationError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

logger = logging.getLogger("firerisk")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "targets", None):
        names = [s.strip() for s in args.targets.split(",") if s.strip()]
        cfg = dataclasses.replace(cfg, targets=tuple(names))
    if getattr(args, "horizon", None) is not None:
        cfg = dataclasses.replace(cfg, training=dataclasses.replace(
            cfg.training, horizons=(args.horizon,)))
    return cfg.validate()


def generator_config(cfg: ExperimentConfig):
    from .synthgen import DEFAULT_PROFILES, GeneratorConfig

    profiles = tuple(p for p in DEFAULT_PROFILES if p.zone in cfg.data.zones)
    missing = sorted(set(cfg.data.zones) - {p.zone for p in profiles})
    if missing:
        raise ConfigError("data.zones", f"no synthetic profile for zones {missing}")
    return GeneratorConfig(seed=cfg.seed, years=cfg.data.years, profiles=profiles,
                           train_years=cfg.data.train_years)


def cmd_synth(args) -> int:
    from .synthgen import build_dataset, write_csv

    cfg = _config(args)
    data = build_dataset(generator_config(cfg))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(data, out)
    years = sorted({d.year for d in data["date"]})
    print(f"wrote {out}: {len(data)} rows, {data['zone'].nunique()} zones, "
          f"years {years[0]}-{years[-1]}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .pipeline import run_train

    cfg = _config(args)
    path = run_train(args.dataset, cfg, args.out, cfg.target_kinds())
    doc = json.loads(path.read_text(encoding="utf-8"))
    n_models = sum(len(v) for v in doc["checkpoints"].values())
    print(f"wrote {path}: {n_models} GRU checkpoint(s), "
          f"{len(doc['baselines'])} target(s) with baselines")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from . import plotting
    from .pipeline import evaluation_table, load_manifest

    if args.split not in ("val", "test"):
        raise ConfigError("--split", f"unknown split {args.split!r}; expected val or test")
    table = evaluation_table(args.manifest, args.split)
    doc, base = load_manifest(args.manifest)
    out = Path(args.out) if args.out else base
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"evaluation_{args.split}.csv"
    table.to_csv(csv_path, index_label="target", float_format="%.4f", lineterminator="\n")
    print(table.to_string(float_format=lambda v: f"{v:.4f}"))
    preds = pd.read_csv(base / doc["predictions"]["path"])
    preds = preds[(preds["split"] == args.split) & (preds["horizon"] == doc["horizons"][0])]
    plotting.iou_bars(table, out / f"iou_{args.split}.png", f"ordinal IoU ({args.split})")
    plotting.confusion_grid(preds, out / f"confusion_{args.split}.png")
    zone = int(sorted(preds["zone"].unique())[0]) if args.zone is None else args.zone
    plotting.signal_plot(preds, zone, out / f"signal_{args.split}_zone{zone}.png")
    corr = pd.DataFrame(doc["target_correlation"]).T.astype(float)
    corr.columns = corr.index
    plotting.correlation_heatmap(corr, out / "target_correlation.png")
    print(f"wrote {csv_path} and figures in {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .pipeline import load_manifest, report_findings
    from .reportgen import ExternalBackend, report_json, report_text, synthesize_report

    doc, base = load_manifest(args.manifest)
    rc = doc["config"]["report"]
    backend = None
    if args.backend == "external":
        backend = ExternalBackend.from_env(rc["endpoint_env"], rc["token_env"],
                                           rc["timeout_seconds"])
    try:
        findings = report_findings(doc, base, args.zone, args.date, rc["confidence_high"],
                                   rc["confidence_medium"], rc["top_k"], rc["deviation_window"])
    except LookupError as exc:
        raise ConfigError("--date", str(exc)) from None
    report = synthesize_report(findings, args.note or [], backend)
    out = Path(args.out) if args.out else base
    out.mkdir(parents=True, exist_ok=True)
    stem = f"report_zone{args.zone}_{args.date}"
    (out / f"{stem}.json").write_text(report_json(report), encoding="utf-8")
    (out / f"{stem}.txt").write_text(report_text(report), encoding="utf-8")
    print(report_text(report), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="firerisk", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write the synthetic dataset CSV")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="fit GRUs and baselines, write a manifest")
    t.add_argument("dataset")
    t.add_argument("--config")
    t.add_argument("--seed", type=int)
    t.add_argument("--targets", help="comma-separated subset, e.g. dfe,num_fires")
    t.add_argument("--horizon", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="IoU table and figures from a manifest")
    e.add_argument("manifest")
    e.add_argument("--split", default="test")
    e.add_argument("--zone", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="operational report for one zone-day")
    r.add_argument("manifest")
    r.add_argument("--zone", type=int, required=True)
    r.add_argument("--date", required=True)
    r.add_argument("--backend", choices=("template", "external"), default="template")
    r.add_argument("--note", action="append", help="free-form context note (repeatable)")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    from .reportgen import BackendConfigError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, BackendConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataValidationError, RecordValidationError) as exc:
        print(f"data validation error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Model-ready inputs: per zone-day features, filtering, windows and class-0 undersampling.

Preprocessing statistics (variance, correlation, standardisation) are always
fitted on training rows only and then applied to every split.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import stats

from . import fwi
from .core import TargetKind, make_calendar_features

logger = logging.getLogger(__name__)

DEFAULT_RATE_GRID = tuple(round(0.05 * k, 2) for k in range(1, 21))
MIN_RATE, MAX_RATE = 0.05, 1.0


def aggregate_sources(values: Mapping[str, Iterable[float]]) -> dict[str, float]:
    """Mean, max and min of each feature over its sources for one zone-day."""
    out: dict[str, float] = {}
    for base, vals in values.items():
        v = np.asarray(list(vals), dtype=float)
        if v.size == 0:
            raise ValueError(f"no source values for feature {base!r}")
        out[f"{base}_mean"] = float(v.mean())
        out[f"{base}_max"] = float(v.max())
        out[f"{base}_min"] = float(v.min())
    return out


def build_feature_matrix(dataset: pd.DataFrame, labels: pd.DataFrame | None = None,
                         zones: Sequence[int] | None = None) -> pd.DataFrame:
    """Assemble every candidate feature for each (zone, date) row.

    Temperature readings at 12h and 16h are the sources aggregated into
    ``temperature_mean/max/min``. Indices are computed per zone, restarting at
    season gaps. ``labels`` (one column per target, as returned by
    ``targets.build_labels``) adds ``past_risk_<target>``, the class observed
    on the row's own day.
    """
    df = dataset.sort_values(["zone", "date"]).reset_index(drop=True)
    df["date"] = pd.to_datetime(df["date"])
    zones = sorted(df["zone"].unique()) if zones is None else list(zones)
    parts = []
    for zone, g in df.groupby("zone", sort=True):
        idx = fwi.compute_indices(g)
        parts.append(idx)
    indices = pd.concat(parts).loc[df.index]

    temps = np.stack([df["temp12"].to_numpy(float), df["temp16"].to_numpy(float)], axis=1)
    out = pd.DataFrame({"zone": df["zone"].astype(int), "date": df["date"]})
    out["temperature_mean"] = temps.mean(axis=1)
    out["temperature_max"] = temps.max(axis=1)
    out["temperature_min"] = temps.min(axis=1)
    out["dew_point"] = df["dewpoint"].to_numpy(float)
    out["relative_humidity"] = df["rh"].to_numpy(float)
    out["wind_speed"] = df["wind_speed"].to_numpy(float)
    rad = np.deg2rad(df["wind_dir"].to_numpy(float))
    out["wind_dir_sin"] = np.sin(rad)
    out["wind_dir_cos"] = np.cos(rad)
    out["precipitation_24h"] = df["precip24"].to_numpy(float)
    out["snow_height"] = df["snow"].to_numpy(float)
    for col in fwi.INDEX_COLUMNS:
        out[col] = indices[col].to_numpy(float)

    cal = [make_calendar_features(d.date()) for d in df["date"]]
    out["day_of_week"] = [c.day_of_week for c in cal]
    out["iso_week"] = [c.iso_week for c in cal]
    out["is_weekend"] = [float(c.is_weekend) for c in cal]
    out["is_holiday"] = [float(c.is_holiday) for c in cal]
    for z in zones:
        out[f"zone_{z}"] = (out["zone"] == z).astype(float)

    if labels is not None:
        lab = labels.copy()
        lab["date"] = pd.to_datetime(lab["date"])
        merged = out[["zone", "date"]].merge(lab, on=["zone", "date"], how="left")
        for t in TargetKind:
            if t.value in merged:
                if merged[t.value].isna().any():
                    raise ValueError(f"missing {t.value} label for some rows")
                out[f"past_risk_{t.value}"] = merged[t.value].to_numpy(float)
    feature_cols = [c for c in out.columns if c not in ("zone", "date")]
    if out[feature_cols].isna().any().any():
        raise ValueError("missing values in assembled features")
    return out


def feature_columns(fm: pd.DataFrame) -> list[str]:
    return [c for c in fm.columns if c not in ("zone", "date")]


def variance_filter(fm: pd.DataFrame, threshold: float = 1e-8,
                    columns: Sequence[str] | None = None) -> list[str]:
    """Columns whose sample variance (ddof=1) is at least ``threshold``, in input order."""
    cols = feature_columns(fm) if columns is None else list(columns)
    var = fm[cols].var(axis=0, ddof=1)
    return [c for c in cols if not var[c] < threshold]


def _tied_pairs(key: np.ndarray) -> int:
    c = np.unique(key, return_counts=True)[1].astype(np.int64)
    return int((c * (c - 1) // 2).sum())


def _strict_inversions(v: np.ndarray) -> int:
    """Pairs i < j with v[i] > v[j], by bottom-up merging with searchsorted."""
    n = len(v)
    v = v.astype(np.int64)
    idx = np.arange(n)
    total, w = 0, 1
    while w < n:
        block = idx // (2 * w)
        left = idx % (2 * w) < w
        key = block * (n + 1) + v
        lk, rb = key[left], block[~left]
        pos = np.searchsorted(lk, key[~left], side="right")
        end = np.searchsorted(lk, (rb + 1) * (n + 1), side="left")
        total += int((end - pos).sum())
        v = np.sort(key) - block * (n + 1)
        w *= 2
    return total


def kendall_tau_b(x, y) -> float:
    """Kendall tau-b from exact integer pair counts; NaN if either input is constant."""
    xr = np.unique(np.asarray(x, float), return_inverse=True)[1].ravel()
    yr = np.unique(np.asarray(y, float), return_inverse=True)[1].ravel()
    n = len(xr)
    tot = n * (n - 1) // 2
    nx, ny = tot - _tied_pairs(xr), tot - _tied_pairs(yr)
    if nx == 0 or ny == 0:
        return float("nan")
    order = np.lexsort((yr, xr))
    dis = _strict_inversions(yr[order])
    s = nx + ny - tot + _tied_pairs(xr.astype(np.int64) * n + yr) - 2 * dis
    return s / math.sqrt(nx * ny)


def _max_abs_correlation(a: np.ndarray, b: np.ndarray) -> float:
    best = 0.0
    for fn in (stats.pearsonr, stats.spearmanr):
        r = fn(a, b)[0]
        if np.isfinite(r):
            best = max(best, abs(float(r)))
    r = kendall_tau_b(a, b)
    if np.isfinite(r):
        best = max(best, abs(r))
    return best


def correlation_filter(fm: pd.DataFrame, threshold: float = 0.95,
                       columns: Sequence[str] | None = None,
                       reasons: dict[str, str] | None = None) -> list[str]:
    """Drop the lower-variance member of every pair correlated above ``threshold``.

    A pair counts as correlated when |Pearson|, |Spearman| or |Kendall tau-b|
    exceeds the threshold. Columns are visited by decreasing variance (ties in
    input order); each is kept only if it is not correlated with any column
    kept before it. The kept set is returned in input order.
    """
    cols = feature_columns(fm) if columns is None else list(columns)
    var = fm[cols].var(axis=0, ddof=1).to_numpy()
    order = sorted(range(len(cols)), key=lambda i: (-var[i], i))
    data = {c: fm[c].to_numpy(float) for c in cols}
    kept: list[str] = []
    for i in order:
        c = cols[i]
        clash = None
        for k in kept:
            r = _max_abs_correlation(data[k], data[c])
            if r > threshold:
                clash = (k, r)
                break
        if clash is None:
            kept.append(c)
        elif reasons is not None:
            reasons[c] = f"correlated with {clash[0]} (|r|={clash[1]:.3f})"
    keep = set(kept)
    return [c for c in cols if c in keep]


@dataclass
class FeatureSelection:
    kept: list[str]
    dropped: dict[str, str]

    def summary(self) -> str:
        lines = ["column                         status   reason"]
        for c in self.kept:
            lines.append(f"{c:<30} kept")
        for c, why in self.dropped.items():
            lines.append(f"{c:<30} dropped  {why}")
        return "\n".join(lines)


def select_features(train_fm: pd.DataFrame, variance_threshold: float = 1e-8,
                    correlation_threshold: float = 0.95,
                    protected: Sequence[str] = ()) -> FeatureSelection:
    """Variance then correlation filtering on training rows.

    ``protected`` columns skip the correlation filter (e.g. past-risk columns
    that must survive for every target).
    """
    cols = feature_columns(train_fm)
    dropped: dict[str, str] = {}
    after_var = variance_filter(train_fm, variance_threshold, cols)
    for c in cols:
        if c not in after_var:
            dropped[c] = f"variance < {variance_threshold:g}"
    candidates = [c for c in after_var if c not in protected]
    after_corr = correlation_filter(train_fm, correlation_threshold, candidates, reasons=dropped)
    kept_set = set(after_corr) | {c for c in after_var if c in protected}
    kept = [c for c in cols if c in kept_set]
    return FeatureSelection(kept, dropped)


@dataclass
class Standardizer:
    columns: list[str]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, fm: pd.DataFrame, columns: Sequence[str]) -> "Standardizer":
        x = fm[list(columns)].to_numpy(float)
        std = x.std(axis=0)
        std[std == 0] = 1.0
        return cls(list(columns), x.mean(axis=0), std)

    def transform(self, fm: pd.DataFrame) -> np.ndarray:
        return (fm[self.columns].to_numpy(float) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"columns": self.columns, "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Standardizer":
        return cls(list(d["columns"]), np.asarray(d["mean"], float), np.asarray(d["std"], float))


@dataclass
class WindowTensor:
    """Windows of shape (B, C_in, T) with one ordinal label each.

    ``dates`` are label dates (last input date + horizon).
    """

    x: np.ndarray
    y: np.ndarray
    zones: np.ndarray
    dates: np.ndarray
    feature_names: list[str]
    horizon: int
    target: TargetKind
    standardizer: Standardizer | None = None
    summary: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx: np.ndarray) -> "WindowTensor":
        return replace(self, x=self.x[idx], y=self.y[idx], zones=self.zones[idx],
                       dates=self.dates[idx])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=5)


def make_windows(fm: pd.DataFrame, labels: np.ndarray | pd.Series, columns: Sequence[str],
                 sequence_length: int = 11, horizon: int = 1,
                 target: TargetKind = TargetKind.DFE,
                 standardizer: Standardizer | None = None) -> WindowTensor:
    """Slide windows over consecutive days of each zone.

    ``labels`` is aligned with the rows of ``fm``. Runs of consecutive dates
    shorter than ``sequence_length + horizon`` yield no windows and are noted
    in ``summary``.
    """
    if sequence_length < 1 or horizon < 1:
        raise ValueError("sequence_length and horizon must be >= 1")
    labels = np.asarray(labels, dtype=int)
    if len(labels) != len(fm):
        raise ValueError("labels must align with the feature rows")
    data = fm.reset_index(drop=True)
    values = standardizer.transform(data) if standardizer else data[list(columns)].to_numpy(float)
    dates = pd.to_datetime(data["date"]).to_numpy()
    zones = data["zone"].to_numpy()
    xs, ys, zs, ds, summary = [], [], [], [], []
    n_feat = values.shape[1]
    for zone in sorted(np.unique(zones)):
        rows = np.nonzero(zones == zone)[0]
        rows = rows[np.argsort(dates[rows], kind="stable")]
        d = dates[rows]
        gaps = np.diff(d).astype("timedelta64[D]").astype(int)
        cuts = np.concatenate([[0], np.nonzero(gaps != 1)[0] + 1, [len(rows)]])
        for a, b in zip(cuts[:-1], cuts[1:]):
            run = rows[a:b]
            n_win = len(run) - sequence_length - horizon + 1
            if n_win <= 0:
                summary.append(f"zone {zone} run starting {str(d[a])[:10]}: {len(run)} days "
                               f"< T + horizon = {sequence_length + horizon}, 0 windows")
                continue
            block = values[run]  # (L, C)
            win = np.lib.stride_tricks.sliding_window_view(block, sequence_length, axis=0)
            xs.append(win[:n_win])  # (n_win, C, T)
            lab_rows = run[sequence_length - 1 + horizon: sequence_length - 1 + horizon + n_win]
            ys.append(labels[lab_rows])
            zs.append(zones[lab_rows])
            ds.append(dates[lab_rows])
    if xs:
        x = np.ascontiguousarray(np.concatenate(xs))
        y = np.concatenate(ys)
        z = np.concatenate(zs)
        dd = np.concatenate(ds)
    else:
        x = np.zeros((0, n_feat, sequence_length))
        y = np.zeros(0, dtype=int)
        z = np.zeros(0, dtype=int)
        dd = np.zeros(0, dtype="datetime64[ns]")
    return WindowTensor(x, y, z, dd, list(columns), horizon, target, standardizer, summary)


@dataclass(frozen=True)
class SamplingPlan:
    rate: float
    seed: int
    selected_by: float | None = None  # validation IoU achieved at this rate

    def __post_init__(self):
        if not MIN_RATE - 1e-12 <= self.rate <= MAX_RATE + 1e-12:
            raise ValueError(f"undersampling rate {self.rate} outside [{MIN_RATE}, {MAX_RATE}]")

    def to_dict(self) -> dict:
        return {"rate": self.rate, "seed": self.seed, "selected_by": self.selected_by}


def undersample_indices(labels: np.ndarray, rate: float, seed: int) -> np.ndarray:
    """Sorted indices kept: ceil(rate * n0) class-0 entries plus every other entry.

    The class-0 survivors are the first ceil(rate * n0) positions of
    ``default_rng(seed).permutation(n0)`` over the class-0 entries in order.
    """
    if not MIN_RATE - 1e-12 <= rate <= MAX_RATE + 1e-12:
        raise ValueError(f"undersampling rate {rate} outside [{MIN_RATE}, {MAX_RATE}]")
    labels = np.asarray(labels)
    zero = np.nonzero(labels == 0)[0]
    n_keep = min(len(zero), math.ceil(rate * len(zero) - 1e-9))
    chosen = zero[np.random.default_rng(seed).permutation(len(zero))[:n_keep]]
    keep = np.concatenate([np.nonzero(labels != 0)[0], chosen])
    return np.sort(keep)


def undersample(windows: WindowTensor, rate: float, seed: int) -> WindowTensor:
    if rate >= MAX_RATE:
        return windows
    return windows.subset(undersample_indices(windows.y, rate, seed))


def apply_plan(windows_by_horizon: Mapping[int, WindowTensor],
               plan: SamplingPlan) -> dict[int, WindowTensor]:
    """Undersample every horizon's training windows with the same rate and seed."""
    return {h: undersample(w, plan.rate, plan.seed) for h, w in windows_by_horizon.items()}


def scan_undersampling(train: WindowTensor, score: Callable[[WindowTensor], float],
                       rates: Sequence[float] = DEFAULT_RATE_GRID, seed: int = 0) -> SamplingPlan:
    """Pick the rate whose undersampled training set scores best on validation.

    ``score`` fits a model on the given training windows and returns its
    validation IoU. Ties go to the higher rate (less data discarded).
    """
    if not rates:
        raise ValueError("empty rate grid")
    best_rate, best = None, -np.inf
    for rate in sorted(rates):
        s = score(undersample(train, rate, seed))
        logger.info("undersampling rate %.2f -> validation IoU %.4f", rate, s)
        if s >= best:
            best_rate, best = rate, s
    return SamplingPlan(rate=float(best_rate), seed=seed, selected_by=float(best))

"""Reference predictors: persistence, per-(zone, week) mode, constant class,
zone-wise Poisson rates and multinomial logistic regression."""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .core import N_CLASSES, TARGET_SOURCE_COLUMN, TargetKind
from .metrics import ordinal_iou
from .targets import BinningModel, assign_classes

logger = logging.getLogger(__name__)


def _mode_lower(values: Iterable[int]) -> int:
    counts = Counter(int(v) for v in values)
    if not counts:
        raise ValueError("mode of an empty collection")
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


# ---------------------------------------------------------------- persistence
def persistence_predict(series: Sequence[int], horizon: int = 1) -> np.ndarray:
    """Class observed ``horizon`` days earlier in one consecutive series; 0 before that."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    y = np.asarray(series, dtype=int)
    out = np.zeros_like(y)
    out[horizon:] = y[:-horizon] if horizon < len(y) else out[horizon:]
    return out


def persistence_lookup(labels: pd.DataFrame, target: str, zones: np.ndarray,
                       dates: np.ndarray, horizon: int = 1) -> np.ndarray:
    """Observed class at (zone, date - horizon) for each requested pair; 0 when absent."""
    lab = labels[["zone", "date", target]].copy()
    lab["date"] = pd.to_datetime(lab["date"])
    table = {(int(z), d): int(c) for z, d, c in lab.itertuples(index=False, name=None)}
    prev = pd.to_datetime(pd.Series(dates)) - pd.Timedelta(days=horizon)
    return np.array([table.get((int(z), d), 0) for z, d in zip(zones, prev)], dtype=int)


# ------------------------------------------------------------------ week mode
@dataclass
class WeekModeTable:
    table: dict[tuple[int, int], int]
    fallback: int

    @classmethod
    def fit(cls, labels: pd.DataFrame, target: str) -> "WeekModeTable":
        if len(labels) == 0:
            raise ValueError("empty training set")
        weeks = pd.to_datetime(labels["date"]).dt.isocalendar().week.astype(int).to_numpy()
        groups: dict[tuple[int, int], list[int]] = {}
        for z, w, c in zip(labels["zone"].to_numpy(), weeks, labels[target].to_numpy()):
            groups.setdefault((int(z), int(w)), []).append(int(c))
        table = {k: _mode_lower(v) for k, v in groups.items()}
        return cls(table, _mode_lower(labels[target]))

    def predict_one(self, zone: int, date) -> int:
        week = pd.Timestamp(date).isocalendar()[1]
        return self.table.get((int(zone), int(week)), self.fallback)

    def predict(self, zones: Sequence[int], dates: Sequence) -> np.ndarray:
        return np.array([self.predict_one(z, d) for z, d in zip(zones, dates)], dtype=int)

    def to_dict(self) -> dict:
        return {"table": [[z, w, c] for (z, w), c in sorted(self.table.items())],
                "fallback": self.fallback}


@dataclass
class ConstantClass:
    """Always predicts the modal training class."""

    value: int

    @classmethod
    def fit(cls, labels: Sequence[int]) -> "ConstantClass":
        if len(labels) == 0:
            raise ValueError("empty training set")
        return cls(_mode_lower(labels))

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.value, dtype=int)


# -------------------------------------------------------------------- poisson
@dataclass
class PoissonRates:
    """Per-zone daily event rate; ``unit`` converts an event count into the target's units."""

    rates: dict[int, float]
    pooled: float
    unit: dict[int, float] = field(default_factory=dict)
    pooled_unit: float = 1.0

    @classmethod
    def fit(cls, data: pd.DataFrame, target: TargetKind = TargetKind.NUM_FIRES) -> "PoissonRates":
        """Maximum-likelihood rates (training means of daily fire counts).

        For intervention time and engines the count is scaled by the zone's
        mean value per fire, a proxy since those targets are not counts.
        """
        if len(data) == 0:
            raise ValueError("empty training set")
        counts = data["n_fires"].to_numpy(float)
        if np.any(counts < 0):
            raise ValueError("negative counts")
        rates = {int(z): float(g["n_fires"].mean()) for z, g in data.groupby("zone")}
        unit: dict[int, float] = {}
        pooled_unit = 1.0
        if target is not TargetKind.NUM_FIRES:
            col = TARGET_SOURCE_COLUMN[target]
            tot = data[col].sum()
            pooled_unit = float(tot / counts.sum()) if counts.sum() > 0 else 1.0
            for z, g in data.groupby("zone"):
                n = g["n_fires"].sum()
                unit[int(z)] = float(g[col].sum() / n) if n > 0 else pooled_unit
        return cls(rates, float(counts.mean()), unit, pooled_unit)

    def rate(self, zone: int) -> float:
        return self.rates.get(int(zone), self.pooled)

    def predict(self, zones: Sequence[int], binning: BinningModel) -> np.ndarray:
        cache: dict[int, int] = {}
        out = []
        for z in zones:
            z = int(z)
            if z not in cache:
                cache[z] = poisson_class(self.rate(z), binning, self.unit.get(z, self.pooled_unit))
            out.append(cache[z])
        return np.array(out, dtype=int)

    def to_dict(self) -> dict:
        return {"rates": {str(k): v for k, v in sorted(self.rates.items())}, "pooled": self.pooled,
                "unit": {str(k): v for k, v in sorted(self.unit.items())},
                "pooled_unit": self.pooled_unit}


def poisson_class_masses(lam: float, binning: BinningModel, unit: float = 1.0) -> np.ndarray:
    """Probability of each class when the daily count is Poisson(lam).

    Count k maps to class 0 when k = 0, else to the class of ``k * unit``.
    The tail beyond the summation limit is added to the class of the limit.
    """
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError("rate must be finite and >= 0")
    masses = np.zeros(N_CLASSES)
    if lam == 0:
        masses[0] = 1.0
        return masses
    k_max = int(lam + 12.0 * math.sqrt(lam) + 30)
    k = np.arange(k_max + 1)
    pmf = stats.poisson.pmf(k, lam)
    classes = np.zeros(len(k), dtype=int)
    classes[1:] = assign_classes(k[1:] * unit, binning)
    np.add.at(masses, classes, pmf)
    masses[classes[-1]] += stats.poisson.sf(k_max, lam)
    return masses


def poisson_class(lam: float, binning: BinningModel, unit: float = 1.0) -> int:
    # argmax returns the first maximum, i.e. the lower class on ties
    return int(np.argmax(poisson_class_masses(lam, binning, unit)))


# ------------------------------------------------------- logistic regression
def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray,
                  l2: float = 0.0) -> float:
    p = _softmax(x @ w + b)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300)))
                 + 0.5 * l2 * np.sum(w * w))


def cross_entropy_grad(w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray,
                       l2: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    p = _softmax(x @ w + b)
    p[np.arange(len(y)), y] -= 1.0
    p /= len(y)
    return x.T @ p + l2 * w, p.sum(axis=0)


@dataclass
class LogRegModel:
    weights: np.ndarray  # (features, classes)
    intercepts: np.ndarray
    rho: float | None = None
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    val_iou: float | None = None

    def _scale(self, x: np.ndarray) -> np.ndarray:
        if self.mean is None:
            return x
        return (x - self.mean) / self.std

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return _softmax(self._scale(np.asarray(x, float)) @ self.weights + self.intercepts)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba(x).argmax(axis=1)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "intercepts": self.intercepts.tolist(),
                "rho": self.rho, "val_iou": self.val_iou,
                "mean": None if self.mean is None else self.mean.tolist(),
                "std": None if self.std is None else self.std.tolist()}


def fit_logreg(x: np.ndarray, y: np.ndarray, max_iter: int = 2000, tol: float = 1e-6,
               l2: float = 1e-4, n_classes: int = N_CLASSES) -> LogRegModel:
    """Full-batch gradient descent on multinomial cross-entropy.

    Step size is 1/L with L an upper bound on the curvature, so the loss
    decreases monotonically. Warns (and still returns) if the gradient norm
    stays above ``tol``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, int)
    if len(y) == 0:
        raise ValueError("empty training set")
    n, d = x.shape
    xa = np.hstack([x, np.ones((n, 1))])
    lip = 0.5 * np.linalg.eigvalsh(xa.T @ xa / n)[-1] + l2
    step = 1.0 / lip
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    gnorm = np.inf
    for _ in range(max_iter):
        gw, gb = cross_entropy_grad(w, b, x, y, l2)
        gnorm = math.sqrt(float(np.sum(gw * gw) + np.sum(gb * gb)))
        if gnorm < tol:
            break
        w -= step * gw
        b -= step * gb
    else:
        warnings.warn(f"logistic regression did not converge; final gradient norm {gnorm:.3g}",
                      RuntimeWarning, stacklevel=2)
    return LogRegModel(w, b)


def majority_subsample(y: np.ndarray, rho: float, seed: int) -> np.ndarray:
    """Sorted row indices where class 0 makes up at most fraction ``rho``.

    Keeps every non-zero row and round(rho * n_other / (1 - rho)) class-0
    rows, chosen by ``default_rng(seed).permutation``; all rows when class 0 is
    already at or below ``rho``.
    """
    y = np.asarray(y)
    zero = np.nonzero(y == 0)[0]
    other = np.nonzero(y != 0)[0]
    if rho >= 1.0 or len(zero) == 0:
        return np.arange(len(y))
    n_keep = min(len(zero), max(1, int(round(rho * len(other) / (1.0 - rho)))))
    chosen = zero[np.random.default_rng(seed).permutation(len(zero))[:n_keep]]
    return np.sort(np.concatenate([other, chosen]))


DEFAULT_RHO_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))


def logreg_train(x_train: np.ndarray, y_train: np.ndarray, x_val: np.ndarray, y_val: np.ndarray,
                 rho_grid: Sequence[float] = DEFAULT_RHO_GRID, seed: int = 0,
                 max_iter: int = 2000, l2: float = 1e-4) -> LogRegModel:
    """Scan the class-0 proportion and keep the fit with the best validation IoU.

    Inputs are standardised with training statistics. Ties in IoU go to the
    earlier grid value.
    """
    x_train = np.asarray(x_train, float)
    if len(rho_grid) == 0:
        raise ValueError("empty rho grid")
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std[std == 0] = 1.0
    xs = (x_train - mean) / std
    best: LogRegModel | None = None
    for rho in rho_grid:
        idx = majority_subsample(y_train, rho, seed)
        m = fit_logreg(xs[idx], np.asarray(y_train)[idx], max_iter=max_iter, l2=l2)
        m.mean, m.std, m.rho = mean, std, float(rho)
        m.val_iou = ordinal_iou(y_val, m.predict(x_val)) if len(y_val) else 0.0
        logger.debug("logreg rho=%.2f val IoU %.4f", rho, m.val_iou)
        if best is None or m.val_iou > best.val_iou:
            best = m
    return best


def last_day(x: np.ndarray) -> np.ndarray:
    """Flatten (N, C, T) windows to their last time step."""
    return np.asarray(x)[:, :, -1]


def baseline_names() -> tuple[str, ...]:
    return ("persistence", "week_mode", "poisson", "logreg")


def fit_week_and_constant(labels: pd.DataFrame, target: str) -> tuple[WeekModeTable, ConstantClass]:
    return WeekModeTable.fit(labels, target), ConstantClass.fit(labels[target].to_numpy())


def rates_from_mapping(d: Mapping) -> PoissonRates:
    return PoissonRates({int(k): float(v) for k, v in d["rates"].items()}, float(d["pooled"]),
                        {int(k): float(v) for k, v in d.get("unit", {}).items()},
                        float(d.get("pooled_unit", 1.0)))

"""Ordinal targets: DFE passthrough and K-means binning of operational quantities.

Zero days form class 0. Positive values are clustered into four groups by
1-D K-means and relabelled by ascending centroid, giving classes 1..4.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .core import OPERATIONAL_TARGETS, TARGET_SOURCE_COLUMN, TargetKind, check_risk_class


class DegenerateTargetError(ValueError):
    pass


@dataclass(frozen=True)
class BinningModel:
    target: TargetKind
    centroids: tuple[float, ...]
    boundaries: tuple[float, ...] = field(default=())
    fitted_on: tuple[int, int] | None = None

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if len(c) < 1 or np.any(np.diff(c) <= 0):
            raise ValueError(f"centroids must be strictly increasing: {self.centroids}")
        if not self.boundaries:
            object.__setattr__(self, "boundaries", tuple(float(b) for b in (c[:-1] + c[1:]) / 2))
        b = np.asarray(self.boundaries, dtype=float)
        if len(b) != len(c) - 1 or np.any(b <= c[:-1]) or np.any(b >= c[1:]):
            raise ValueError("boundaries must interleave the centroids")

    def to_dict(self) -> dict:
        return {"target": self.target.value, "centroids": list(self.centroids),
                "boundaries": list(self.boundaries),
                "fitted_on": list(self.fitted_on) if self.fitted_on else None}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BinningModel":
        fitted = d.get("fitted_on")
        return cls(TargetKind(d["target"]), tuple(d["centroids"]), tuple(d["boundaries"]),
                   tuple(fitted) if fitted else None)


def kmeans_sse(values: np.ndarray, centroids: np.ndarray) -> float:
    """Sum of squared distances from each value to its nearest centroid."""
    v = np.asarray(values, dtype=float)[:, None]
    return float(np.min((v - np.asarray(centroids, dtype=float)[None, :]) ** 2, axis=1).sum())


def _assign_sorted(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    bounds = (centroids[:-1] + centroids[1:]) / 2
    return np.searchsorted(bounds, x, side="left")


def _kmeanspp_init(u: np.ndarray, w: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: each new center is the best of several D^2-weighted draws."""
    n_trials = 2 + int(np.log(k))
    centers = [u[rng.choice(len(u), p=w / w.sum())]]
    d2 = (u - centers[0]) ** 2
    for _ in range(1, k):
        total = (w * d2).sum()
        if total <= 0:
            break
        cand = rng.choice(len(u), size=n_trials, p=w * d2 / total)
        pots = [(w * np.minimum(d2, (u - u[c]) ** 2)).sum() for c in cand]
        best = cand[int(np.argmin(pots))]
        centers.append(u[best])
        d2 = np.minimum(d2, (u - u[best]) ** 2)
    return np.sort(np.asarray(centers))


def _lloyd(u: np.ndarray, w: np.ndarray, centroids: np.ndarray, max_iter: int = 300) -> np.ndarray:
    k = len(centroids)
    c = centroids.copy()
    for _ in range(max_iter):
        labels = _assign_sorted(u, c)
        counts = np.bincount(labels, weights=w, minlength=k)
        sums = np.bincount(labels, weights=w * u, minlength=k)
        new = c.copy()
        nz = counts > 0
        new[nz] = sums[nz] / counts[nz]
        if not np.all(nz):
            # move each empty cluster onto the worst-fitted value
            resid = w * (u - new[labels]) ** 2
            for j in np.nonzero(~nz)[0]:
                i = int(np.argmax(resid))
                new[j] = u[i]
                resid[i] = -1.0
        new = np.sort(new)
        if np.array_equal(new, c):
            break
        c = new
    return c


def _hartigan_refine(u: np.ndarray, w: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Move boundary values between neighbouring clusters while the SSE drops.

    ``u`` holds sorted distinct values with multiplicities ``w``, so clusters
    are contiguous runs and tied values always move together.
    """
    k = len(centroids)
    labels = _assign_sorted(u, centroids)
    splits = [int(np.searchsorted(labels, j, side="left")) for j in range(k)] + [len(u)]
    n = np.array([w[splits[j]:splits[j + 1]].sum() for j in range(k)])
    s = np.array([(w * u)[splits[j]:splits[j + 1]].sum() for j in range(k)])
    improved = True
    while improved:
        improved = False
        for j in range(1, k):
            for leftward in (False, True):
                # False: last value of run j-1 joins run j; True: first value of run j joins j-1
                src, dst = (j, j - 1) if leftward else (j - 1, j)
                i = splits[j] if leftward else splits[j] - 1
                if splits[src + 1] - splits[src] <= 1:
                    continue
                v, m = u[i], w[i]
                m_src, m_dst = s[src] / n[src], s[dst] / n[dst]
                # exact SSE change of moving weight m at value v from src to dst
                gain = (n[src] * m / (n[src] - m) * (v - m_src) ** 2
                        - n[dst] * m / (n[dst] + m) * (v - m_dst) ** 2)
                if gain > 1e-12 * max(1.0, m * v * v):
                    n[src] -= m
                    n[dst] += m
                    s[src] -= m * v
                    s[dst] += m * v
                    splits[j] += 1 if leftward else -1
                    improved = True
    return s / n


def _run_sse(cw: np.ndarray, cwu: np.ndarray, cwu2: np.ndarray, a: int, b: int) -> float:
    m = cw[b] - cw[a]
    if m <= 0:
        return 0.0
    s = cwu[b] - cwu[a]
    return max(0.0, (cwu2[b] - cwu2[a]) - s * s / m)


def _relocate(u: np.ndarray, w: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Re-cut adjacent pairs of runs exactly, then try merge/split relocations.

    A relocation merges two adjacent runs and splits another at its best
    cut. Steps are accepted only when the SSE drops.
    """
    k = len(centroids)
    if k < 3:
        return centroids
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cwu = np.concatenate([[0.0], np.cumsum(w * u)])
    cwu2 = np.concatenate([[0.0], np.cumsum(w * u * u)])

    def runs_of(c):
        labels = _assign_sorted(u, c)
        return [int(np.searchsorted(labels, j, side="left")) for j in range(k)] + [len(u)]

    def total(splits):
        return sum(_run_sse(cw, cwu, cwu2, splits[j], splits[j + 1]) for j in range(k))

    def best_cut(a, b):
        cost, cut = np.inf, None
        for t in range(a + 1, b):
            c = _run_sse(cw, cwu, cwu2, a, t) + _run_sse(cw, cwu, cwu2, t, b)
            if c < cost:
                cost, cut = c, t
        return cost, cut

    def resplit_pairs(splits):
        # exact best cut inside every pair of adjacent runs, until no cut moves
        moved = True
        while moved:
            moved = False
            for j in range(1, k):
                a, b = splits[j - 1], splits[j + 1]
                old = (_run_sse(cw, cwu, cwu2, a, splits[j])
                       + _run_sse(cw, cwu, cwu2, splits[j], b))
                cost, cut = best_cut(a, b)
                if cut is not None and cost < old - 1e-12 * max(1.0, old):
                    splits[j] = cut
                    moved = True
        return splits

    splits = resplit_pairs(runs_of(centroids))
    current = total(splits)
    while True:
        best = (current, None)
        runs = [(splits[j], splits[j + 1]) for j in range(k)]
        for j in range(k - 1):
            merged = (runs[j][0], runs[j + 1][1])
            others = runs[:j] + runs[j + 2:]
            base = _run_sse(cw, cwu, cwu2, *merged) + sum(
                _run_sse(cw, cwu, cwu2, *r) for r in others)
            for i, (a, b) in enumerate(others):
                if b - a < 2:
                    continue
                cost, cut = best_cut(a, b)
                cand = base - _run_sse(cw, cwu, cwu2, a, b) + cost
                if cand < best[0] - 1e-12 * max(1.0, current):
                    new_runs = sorted(others[:i] + [(a, cut), (cut, b)] + [merged])
                    best = (cand, [r[0] for r in new_runs] + [len(u)])
        if best[1] is None:
            break
        splits = best[1]
        means = np.array([(cwu[splits[j + 1]] - cwu[splits[j]]) / (cw[splits[j + 1]] - cw[splits[j]])
                          for j in range(k)])
        means = _lloyd(u, w, _hartigan_refine(u, w, _lloyd(u, w, means)))
        splits = resplit_pairs(runs_of(means))
        new = total(splits)
        if new >= current:
            break
        current = new
    return np.array([(cwu[splits[j + 1]] - cwu[splits[j]]) / (cw[splits[j + 1]] - cw[splits[j]])
                     for j in range(k)])


def kmeans_1d(values: Iterable[float], k: int = 4, seed: int = 0,
              n_restarts: int = 50) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding, best of ``n_restarts`` by SSE.

    Each restart is polished with boundary moves between adjacent clusters and
    the winner with merge/split relocations. Work happens on sorted distinct values with multiplicities, so any
    permutation of the same values gives the same answer. Returns ascending
    centroids.
    """
    x = np.asarray(list(values), dtype=float)
    u, w = np.unique(x, return_counts=True)
    w = w.astype(float)
    if len(u) < k:
        raise DegenerateTargetError(
            f"degenerate target distribution: fewer than {k} distinct values")
    rng = np.random.default_rng(seed)
    best, best_sse = None, np.inf
    for _ in range(n_restarts):
        c = _kmeanspp_init(u, w, k, rng)
        if len(c) < k:
            continue
        c = _lloyd(u, w, c)
        if len(np.unique(c)) < k:
            continue
        c = _lloyd(u, w, _hartigan_refine(u, w, c))
        if len(np.unique(c)) < k:
            continue
        sse = float((w * np.min((u[:, None] - c[None, :]) ** 2, axis=1)).sum())
        if sse < best_sse:
            best, best_sse = c, sse
    if best is None:
        raise DegenerateTargetError("k-means failed to produce k distinct centroids")
    return _relocate(u, w, best)


def fit_binning(values: Iterable[float], target: TargetKind, k: int = 4, seed: int = 0,
                fitted_on: tuple[int, int] | None = None) -> BinningModel:
    """Fit the positive-value binning for one operational target.

    Zeros are ignored; only strictly positive training values are clustered.
    """
    v = np.asarray(list(values), dtype=float)
    pos = v[v > 0]
    centroids = kmeans_1d(pos, k=k, seed=seed)
    return BinningModel(target, tuple(float(c) for c in centroids), fitted_on=fitted_on)


def assign_class(value: float, model: BinningModel) -> int:
    if value < 0:
        raise ValueError(f"negative value {value!r} cannot be binned")
    if value == 0:
        return 0
    # equality with a boundary goes to the lower class
    return 1 + int(np.searchsorted(model.boundaries, value, side="left"))


def assign_classes(values: np.ndarray, model: BinningModel) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("negative values cannot be binned")
    cls = 1 + np.searchsorted(np.asarray(model.boundaries), v, side="left")
    return np.where(v == 0, 0, cls).astype(int)


Binnings = Mapping[TargetKind, "BinningModel | Mapping[int, BinningModel]"]


def fit_target_binnings(dataset: pd.DataFrame, train_years: tuple[int, int], seed: int = 0,
                        per_zone: bool = False,
                        targets: Iterable[TargetKind] = OPERATIONAL_TARGETS) -> dict:
    """Fit one binning per operational target on training years only.

    With ``per_zone`` each target maps to ``{zone: BinningModel}`` instead.
    """
    years = pd.to_datetime(dataset["date"]).dt.year
    train = dataset[(years >= train_years[0]) & (years <= train_years[1])]
    out: dict = {}
    for t in targets:
        if t is TargetKind.DFE:
            continue
        col = TARGET_SOURCE_COLUMN[t]
        if per_zone:
            out[t] = {int(z): fit_binning(g[col], t, seed=seed, fitted_on=train_years)
                      for z, g in train.groupby("zone")}
        else:
            out[t] = fit_binning(train[col], t, seed=seed, fitted_on=train_years)
    return out


def build_labels(dataset: pd.DataFrame, binnings: Binnings) -> pd.DataFrame:
    """Per-(zone, date) ordinal label for each target.

    DFE is copied from the observed column; operational targets are binned
    from n_fires, intervention_minutes and engines.
    """
    out = dataset[["zone", "date"]].copy()
    out[TargetKind.DFE.value] = [check_risk_class(v) for v in dataset["dfe"]]
    for t, model in binnings.items():
        col = dataset[TARGET_SOURCE_COLUMN[t]].to_numpy(float)
        if isinstance(model, BinningModel):
            out[t.value] = assign_classes(col, model)
        else:
            labels = np.zeros(len(dataset), dtype=int)
            zones = dataset["zone"].to_numpy()
            for z, m in model.items():
                mask = zones == z
                labels[mask] = assign_classes(col[mask], m)
            out[t.value] = labels
    return out

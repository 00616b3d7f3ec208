import datetime as dt
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from firerisk.config import ExperimentConfig, DataSection
from firerisk.core import TargetKind
from firerisk.features import (DEFAULT_RATE_GRID, SamplingPlan, Standardizer, aggregate_sources,
                               apply_plan, build_feature_matrix, correlation_filter,
                               kendall_tau_b,
                               make_windows, scan_undersampling, select_features, undersample,
                               undersample_indices, variance_filter)
from firerisk.pipeline import prepare
from oracles import kendall_tau_b_pairs


def test_aggregate_examples():
    assert aggregate_sources({"t": [4.5]}) == {"t_mean": 4.5, "t_max": 4.5, "t_min": 4.5}
    assert aggregate_sources({"t": [1, 2, 3]}) == {"t_mean": 2.0, "t_max": 3.0, "t_min": 1.0}
    with pytest.raises(ValueError):
        aggregate_sources({"t": []})


def test_aggregate_brute_force():
    v = np.random.default_rng(0).normal(size=100).tolist()
    out = aggregate_sources({"x": v})
    total = 0.0
    for a in v:
        total += a
    hi = lo = v[0]
    for a in v:
        hi = a if a > hi else hi
        lo = a if a < lo else lo
    assert out["x_mean"] == pytest.approx(total / 100, rel=1e-12)
    assert (out["x_max"], out["x_min"]) == (hi, lo)


def _frame(cols):
    df = pd.DataFrame(cols)
    df.insert(0, "zone", 61)
    df.insert(1, "date", pd.date_range("2021-06-01", periods=len(df)))
    return df


def test_variance_filter_examples():
    rng = np.random.default_rng(1)
    df = _frame({"c": np.full(50, 3.0), "r": rng.normal(size=50)})
    assert variance_filter(df, 1e-12) == ["r"]
    assert variance_filter(df, 0) == ["c", "r"]


def test_variance_filter_brute_force():
    rng = np.random.default_rng(2)
    cols = {f"f{i}": rng.normal(0, rng.uniform(0, 2), 30) for i in range(20)}
    df = _frame(cols)
    thr = 0.8
    ref = []
    for name, v in cols.items():
        m = sum(v) / len(v)
        var = sum((a - m) ** 2 for a in v) / (len(v) - 1)
        if var >= thr:
            ref.append(name)
    assert variance_filter(df, thr) == ref


def test_duplicate_columns_keep_first():
    x = np.random.default_rng(3).normal(size=40)
    df = _frame({"a": x, "b": x.copy(), "c": np.random.default_rng(4).normal(size=40)})
    assert correlation_filter(df, 0.95) == ["a", "c"]


def test_independent_columns_survive():
    rng = np.random.default_rng(5)
    df = _frame({"a": rng.normal(size=1000), "b": rng.normal(size=1000)})
    assert correlation_filter(df, 0.9) == ["a", "b"]


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=0, max_size=40))
def test_kendall_matches_pair_enumeration_exactly(pairs):
    x = [float(a) for a, _ in pairs]
    y = [float(b) for _, b in pairs]
    want = kendall_tau_b_pairs(x, y)
    got = kendall_tau_b(x, y)
    assert (math.isnan(want) and math.isnan(got)) or got == want


def test_kendall_continuous_and_scipy_agree():
    from scipy import stats
    rng = np.random.default_rng(8)
    x = rng.normal(size=300)
    y = x + rng.normal(size=300)
    assert kendall_tau_b(x, y) == kendall_tau_b_pairs(x.tolist(), y.tolist())
    assert kendall_tau_b(x, y) == pytest.approx(stats.kendalltau(x, y)[0], abs=1e-12)
    assert math.isnan(kendall_tau_b([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]))


def test_discordant_pair_dropped():
    assert kendall_tau_b_pairs([1, 2, 3], [3, 2, 1]) == -1
    df = _frame({"x": [1.0, 2, 3], "y": [3.0, 2, 1]})
    assert len(correlation_filter(df, 0.9)) == 1


def test_monotone_nonlinear_dropped_by_rank_measures():
    x = np.linspace(0.1, 5, 200)
    df = _frame({"x": x, "y": np.exp(3 * x)})
    assert abs(np.corrcoef(x, np.exp(3 * x))[0, 1]) < 0.9
    assert len(correlation_filter(df, 0.9)) == 1


def test_select_features_is_stable_and_reported():
    rng = np.random.default_rng(6)
    x = rng.normal(size=60)
    df = _frame({"a": x, "const": np.zeros(60), "b": 2 * x + 1, "c": rng.normal(size=60)})
    sel = select_features(df)
    assert sel.kept == ["b", "c"]  # b has the larger variance
    assert set(sel.dropped) == {"a", "const"}
    assert "variance" in sel.dropped["const"] and "correlated with b" in sel.dropped["a"]
    assert select_features(df).kept == sel.kept
    assert "dropped" in sel.summary()
    assert select_features(df, protected=["a"]).kept == ["a", "b", "c"]


def test_standardizer_roundtrip():
    df = _frame({"a": [1.0, 2, 3], "k": [5.0, 5, 5]})
    s = Standardizer.fit(df, ["a", "k"])
    z = s.transform(df)
    assert np.allclose(z[:, 0].mean(), 0) and np.all(z[:, 1] == 0)
    s2 = Standardizer.from_dict(s.to_dict())
    assert np.array_equal(s2.transform(df), z)


def _days(n, zone=61, start="2021-06-01"):
    return pd.DataFrame({"zone": zone, "date": pd.date_range(start, periods=n),
                         "f": np.arange(n, dtype=float)})


def test_window_counts():
    w = make_windows(_days(13), np.zeros(13, int), ["f"], 11, 1)
    assert len(w) == 2 and w.x.shape == (2, 1, 11)
    w0 = make_windows(_days(11), np.zeros(11, int), ["f"], 11, 1)
    assert len(w0) == 0 and w0.summary


def test_windows_do_not_cross_gaps():
    df = pd.concat([_days(12), _days(12, start="2021-07-01")], ignore_index=True)
    w = make_windows(df, np.arange(24) % 5, ["f"], 11, 1)
    assert len(w) == 2
    assert w.x[1, 0, 0] == 0.0  # second run restarts at its own first day


def test_window_labels_brute_force():
    rng = np.random.default_rng(8)
    frames = []
    for z in (61, 62, 63):
        n = int(rng.integers(10, 40))
        dates = pd.date_range("2022-06-01", periods=n + 5)
        keep = np.sort(rng.choice(n + 5, n, replace=False))
        frames.append(pd.DataFrame({"zone": z, "date": dates[keep], "f": rng.normal(size=n)}))
    df = pd.concat(frames, ignore_index=True)
    labels = rng.integers(0, 5, len(df))
    for T, h in ((3, 1), (5, 2), (11, 1)):
        w = make_windows(df, labels, ["f"], T, h)
        ref = []
        for z in (61, 62, 63):
            sub = df[df["zone"] == z].reset_index()
            for i in range(len(sub)):
                end = i + T - 1
                if end + h >= len(sub):
                    break
                days = [sub["date"][j] for j in range(i, end + h + 1)]
                if all((days[j + 1] - days[j]).days == 1 for j in range(len(days) - 1)):
                    ref.append((z, sub["date"][end + h], labels[sub["index"][end + h]],
                                [sub["f"][j] for j in range(i, end + 1)]))
        assert len(w) == len(ref)
        for k, (z, d, lab, xs) in enumerate(ref):
            assert w.zones[k] == z and pd.Timestamp(w.dates[k]) == d and w.y[k] == lab
            assert w.x[k, 0].tolist() == xs


def test_undersample_examples():
    y = np.array([0] * 100 + [1, 2, 3])
    assert len(undersample_indices(y, 0.05, 0)) == 5 + 3
    w = make_windows(_days(114), np.concatenate([np.zeros(100, int), np.arange(14) % 4 + 1]),
                     ["f"], 11, 1)
    assert undersample(w, 1.0, 3) is w
    with pytest.raises(ValueError):
        undersample_indices(y, 0.01, 0)
    with pytest.raises(ValueError):
        SamplingPlan(1.5, 0)


def test_undersample_matches_independent_draw():
    rng = np.random.default_rng(9)
    y = rng.choice(5, 500, p=[0.8, 0.05, 0.05, 0.05, 0.05])
    rate, seed = 0.35, 17
    kept = undersample_indices(y, rate, seed)
    zeros = [i for i, v in enumerate(y) if v == 0]
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(len(zeros))
    n_keep = math.ceil(rate * len(zeros) - 1e-9)
    expected = sorted([zeros[i] for i in perm[:n_keep]] + [i for i, v in enumerate(y) if v != 0])
    assert kept.tolist() == expected
    hist = np.bincount(y[kept], minlength=5)
    assert hist[0] == n_keep and hist[1:].tolist() == np.bincount(y, minlength=5)[1:].tolist()


@given(st.lists(st.integers(0, 4), min_size=1, max_size=200),
       st.sampled_from(DEFAULT_RATE_GRID), st.integers(0, 2**32 - 1))
def test_undersample_never_drops_positives(y, rate, seed):
    y = np.asarray(y)
    kept = undersample_indices(y, rate, seed)
    assert set(np.nonzero(y > 0)[0]) <= set(kept.tolist())
    assert np.array_equal(kept, undersample_indices(y, rate, seed))


def test_scan_and_plan_consistency():
    w = make_windows(_days(300), np.r_[np.zeros(250, int), np.ones(50, int)], ["f"], 11, 1)
    # best validation score at the smallest rate: rewards a high positive share
    plan = scan_undersampling(w, lambda t: float(np.mean(t.y > 0)), seed=5)
    assert plan.rate == 0.05 and plan.seed == 5
    # flat score: ties go to the highest rate
    assert scan_undersampling(w, lambda t: 0.5).rate == 1.0
    by_h = {1: w, 2: make_windows(_days(300), np.r_[np.zeros(250, int), np.ones(50, int)],
                                  ["f"], 11, 2)}
    out = apply_plan(by_h, SamplingPlan(0.3, 4))
    for h, sub in out.items():
        n0 = int((by_h[h].y == 0).sum())
        assert sub.class_counts()[0] == math.ceil(0.3 * n0 - 1e-9)


def test_feature_matrix_contents(small_dataset):
    from firerisk.targets import build_labels, fit_target_binnings

    labels = build_labels(small_dataset, fit_target_binnings(small_dataset, (2020, 2020)))
    fm = build_feature_matrix(small_dataset, labels)
    assert len(fm) == len(small_dataset)
    assert fm.columns.is_unique and not fm.isna().any().any()
    for col in ("temperature_mean", "fwi", "dsr", "kbdi", "nesterov", "munger", "angstroem",
                "precip_index_9", "days_since_rain", "iso_week", "is_holiday",
                "past_risk_dfe", "past_risk_num_fires"):
        assert col in fm
    row = small_dataset.iloc[0]
    assert fm["temperature_max"].iloc[0] == max(row["temp12"], row["temp16"])


def test_preprocessing_ignores_non_training_rows(small_dataset):
    cfg = ExperimentConfig(data=DataSection(years=(2020, 2022), train_years=(2020, 2020),
                                            val_years=(2021, 2021), test_years=(2022, 2022),
                                            zones=(61, 62, 63)))
    a = prepare(small_dataset, cfg)
    tampered = small_dataset.copy()
    late = pd.to_datetime(tampered["date"]).dt.year > 2020
    tampered.loc[late, "temp16"] += 7.5
    tampered.loc[late, "wind_speed"] *= 3
    b = prepare(tampered, cfg)
    assert a.kept == b.kept
    assert a.dropped == b.dropped
    assert np.array_equal(a.standardizer.mean, b.standardizer.mean)
    assert np.array_equal(a.standardizer.std, b.standardizer.std)
    for t in a.binnings:
        assert a.binnings[t] == b.binnings[t]

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from firerisk.core import TargetKind
from firerisk.metrics import (confusion_matrix, evaluate, ordinal_iou, per_class_jaccard,
                              permutation_importance, target_correlation_matrix)
from oracles import confusion_loop, ordinal_iou_loop

classes = st.integers(0, 4)
pairs = st.lists(st.tuples(classes, classes), min_size=1, max_size=60)


def test_identity_and_near_miss():
    assert ordinal_iou([0, 3, 4], [0, 3, 4]) == 1.0
    assert ordinal_iou([2], [4]) == 0.5
    assert ordinal_iou([2], [3]) == pytest.approx(2 / 3)
    assert ordinal_iou([0, 0], [0, 0]) == 1.0


def test_input_errors():
    with pytest.raises(ValueError):
        ordinal_iou([1, 2], [1])
    with pytest.raises(ValueError):
        ordinal_iou([], [])
    with pytest.raises(ValueError):
        ordinal_iou([5], [1])


def test_brute_force_iou_and_confusion():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 5, 1000)
    p = rng.integers(0, 5, 1000)
    assert ordinal_iou(y, p) == ordinal_iou_loop(y.tolist(), p.tolist())
    assert np.array_equal(confusion_matrix(y, p), confusion_loop(y.tolist(), p.tolist()))


@given(pairs)
def test_iou_properties(data):
    y, p = map(list, zip(*data))
    v = ordinal_iou(y, p)
    assert 0 <= v <= 1
    assert v == ordinal_iou(p, y)
    assert (v == 1.0) == (y == p)
    assert v == ordinal_iou_loop(y, p)
    cm = confusion_matrix(y, p)
    assert cm.sum() == len(y)
    assert cm.sum(axis=1).tolist() == np.bincount(y, minlength=5).tolist()


@given(y=classes, a=classes, b=classes)
def test_per_sample_penalty_monotone(y, a, b):
    if abs(a - y) <= abs(b - y) and (a - y) * (b - y) >= 0:
        assert ordinal_iou([y], [a]) >= ordinal_iou([y], [b])


def test_per_class_jaccard():
    per, macro = per_class_jaccard([0, 1, 1, 3], [0, 1, 1, 3])
    assert per == [1.0, 1.0, None, 1.0, None]
    assert macro == 1.0


@given(pairs)
def test_per_class_jaccard_brute_force(data):
    y, p = map(list, zip(*data))
    per, _ = per_class_jaccard(y, p)
    for c in range(5):
        ys = {i for i, v in enumerate(y) if v == c}
        ps = {i for i, v in enumerate(p) if v == c}
        union = ys | ps
        assert per[c] == (None if not union else len(ys & ps) / len(union))


def test_evaluate_report():
    r = evaluate([0, 1, 2], [0, 2, 2], TargetKind.DFE, "test", "gru")
    assert r.target == "dfe" and r.n == 3
    assert r.iou == pytest.approx(3 / 4)
    assert r.to_dict()["confusion"][1][2] == 1


def test_correlation_matrix():
    rng = np.random.default_rng(2)
    n = 5000
    df = pd.DataFrame({t.value: rng.integers(0, 5, n) for t in TargetKind})
    m = target_correlation_matrix(df)
    assert np.allclose(np.diag(m), 1.0)
    assert np.allclose(m, m.T)
    off = m.to_numpy()[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 0.05)
    # brute-force covariance over explicit sums
    x = df.to_numpy(float)
    for i in range(4):
        for j in range(4):
            mi, mj = x[:, i].mean(), x[:, j].mean()
            cov = sum((a - mi) * (b - mj) for a, b in zip(x[:, i], x[:, j]))
            vi = sum((a - mi) ** 2 for a in x[:, i])
            vj = sum((b - mj) ** 2 for b in x[:, j])
            assert m.iloc[i, j] == pytest.approx(cov / (vi * vj) ** 0.5, abs=1e-12)


def test_correlation_constant_column_is_nan():
    df = pd.DataFrame({"dfe": [0, 1, 2, 3], "num_fires": [0, 0, 0, 0],
                       "intervention_time": [1, 0, 1, 0], "resources": [2, 2, 1, 0]})
    m = target_correlation_matrix(df)
    assert np.isnan(m.loc["num_fires", "num_fires"])
    assert np.isnan(m.loc["dfe", "num_fires"])


def _single_channel_rule(x):
    return np.clip(np.round(x[:, 1, -1]), 0, 4).astype(int)


def _importance_data():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(200, 3, 4))
    x[:, 1, :] = rng.integers(0, 5, (200, 4))
    x[:, 2, :] = 1.5
    y = _single_channel_rule(x)
    return x, y


def test_importance_single_channel_rule():
    x, y = _importance_data()
    imp = permutation_importance(_single_channel_rule, x, y, ["a", "b", "const"], seed=4,
                                 repeats=3)
    assert imp["b"] > 0
    assert imp["a"] == 0 and imp["const"] == 0


def test_importance_repeats_average():
    x, y = _importance_data()
    names = ["a", "b", "const"]
    two = permutation_importance(_single_channel_rule, x, y, names, seed=9, repeats=2)
    r0 = permutation_importance(_single_channel_rule, x, y, names, seed=9, repeats=1)
    r1 = permutation_importance(_single_channel_rule, x, y, names, seed=10, repeats=1)
    assert two["b"] == pytest.approx((r0["b"] + r1["b"]) / 2, abs=1e-15)


def test_importance_errors():
    x, y = _importance_data()
    with pytest.raises(KeyError):
        permutation_importance(_single_channel_rule, x, y, ["a", "b", "c"], features=["z"])
    with pytest.raises(ValueError):
        permutation_importance(_single_channel_rule, x, y, ["a", "b", "c"], repeats=0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proofsts.metrics import baseline_predictions, baseline_score, metrics


def pearson_by_definition(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def average_ranks(values):
    ranks = [0.0] * len(values)
    for i, v in enumerate(values):
        less = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        ranks[i] = less + (equal + 1) / 2
    return ranks


def oracle(pred, gold):
    return (
        pearson_by_definition(pred, gold),
        pearson_by_definition(average_ranks(pred), average_ranks(gold)),
        sum((p - g) ** 2 for p, g in zip(pred, gold)) / len(pred),
    )


def test_perfect_predictions():
    gold = [1.0, 2.5, 3.0, 4.2, 5.0]
    r = metrics(gold, gold)
    assert (r.pearson, r.spearman, r.mse) == (pytest.approx(1.0), pytest.approx(1.0), 0.0)


def test_cube_is_rank_preserving():
    gold = np.linspace(-2, 3, 40)
    r = metrics(gold**3, gold)
    assert r.spearman == pytest.approx(1.0, abs=1e-12)
    assert r.pearson < 1.0


@pytest.mark.parametrize("seed", range(20))
def test_against_definitions(seed):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(1, 5, 100).round(1).tolist()
    gold = rng.uniform(1, 5, 100).round(1).tolist()
    r = metrics(pred, gold)
    want = oracle(pred, gold)
    assert abs(r.pearson - want[0]) <= 1e-9
    assert abs(r.spearman - want[1]) <= 1e-9
    assert abs(r.mse - want[2]) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), min_size=2, max_size=30))
def test_tied_ranks(pairs):
    pred = [float(p) for p, _ in pairs]
    gold = [float(g) for _, g in pairs]
    r = metrics(pred, gold)
    if r.spearman_defined:
        assert abs(r.spearman - oracle(pred, gold)[1]) <= 1e-9


def test_constant_prediction_flags_correlation():
    r = metrics([3.0, 3.0, 3.0], [1.0, 2.0, 4.0])
    assert (r.pearson, r.spearman) == (0.0, 0.0)
    assert not r.pearson_defined and not r.spearman_defined
    assert r.mse == pytest.approx((4 + 1 + 1) / 3)


def test_predictions_keyed_by_id():
    r = metrics([1.0, 2.0], [1.0, 3.0], ids=["a", "b"])
    assert r.to_dict()["predictions"] == {"a": 1.0, "b": 2.0}


def test_shape_mismatch():
    with pytest.raises(ValueError):
        metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        metrics([], [])


@pytest.mark.parametrize("label,score", [("yes", 5.0), ("no", 3.0), ("unknown", 3.0)])
def test_baseline(label, score):
    assert baseline_score(label) == score


def test_baseline_unknown_label():
    with pytest.raises(ValueError):
        baseline_score("maybe")


def test_baseline_all_yes():
    assert baseline_predictions(["yes"] * 4) == [5.0] * 4

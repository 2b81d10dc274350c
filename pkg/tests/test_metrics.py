import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fupareto import metrics
from fupareto.model import Batch, ModelSpec


def brute_auc(a, b):
    score = 0.0
    for x, y in itertools.product(a, b):
        score += 1.0 if x > y else 0.5 if x == y else 0.0
    return score / (len(a) * len(b))


def test_auc_examples():
    assert metrics.auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert metrics.auc([0.1, 0.2], [0.9, 0.8]) == 0.0
    assert metrics.auc([0.5, 0.5], [0.5, 0.5]) == 0.5


def test_auc_four_by_four_with_ties():
    a = [0.9, 0.6, 0.6, 0.2]
    b = [0.6, 0.4, 0.2, 0.1]
    # by hand: 4 + 2 * (0.5 + 3) + (0.5 + 1) = 12.5 pairs out of 16
    assert metrics.auc(a, b) == pytest.approx(12.5 / 16)
    assert metrics.auc(a, b) == pytest.approx(brute_auc(a, b))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]), min_size=1, max_size=12),
       st.lists(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]), min_size=1, max_size=12))
def test_auc_matches_pairwise_count_and_complement(a, b):
    assert metrics.auc(a, b) == pytest.approx(brute_auc(a, b))
    assert metrics.auc(a, b) + metrics.auc(b, a) == pytest.approx(1.0)


def test_auc_rejects_empty():
    with pytest.raises(ValueError):
        metrics.auc([], [0.1])


def linear_spec():
    return ModelSpec((2, 3), "relu", 0)


def fixed_label_params(c):
    # zero weights, bias favouring class c
    w = np.zeros(linear_spec().n_params)
    w[-3 + c] = 1.0
    return w


def test_asr_and_racc_examples():
    spec = linear_spec()
    w = fixed_label_params(1)
    X = np.zeros((10, 2))
    forget = [Batch(X[:4], np.array([1, 1, 1, 0])), Batch(X[:2], np.array([2, 2]))]
    assert metrics.asr(w, spec, forget) == pytest.approx(3 / 6)
    shards = [Batch(X, np.array([1] * 8 + [0] * 2)), Batch(X, np.array([1] * 6 + [0] * 4))]
    mean, std = metrics.r_acc(w, spec, shards)
    assert (mean, std) == (pytest.approx(0.7), pytest.approx(0.1))


def test_constant_prediction_gives_label_share():
    spec = linear_spec()
    y = np.array([0] * 9 + [1] * 90 + [2])
    b = Batch(np.zeros((100, 2)), y)
    assert metrics.asr(fixed_label_params(2), spec, [b]) == pytest.approx(0.01)
    assert metrics.r_acc(fixed_label_params(0), spec, [b]) == (pytest.approx(0.09), 0.0)


def test_nonmember_pool_restricts_classes_and_size():
    members = Batch(np.zeros((3, 2)), np.array([0, 0, 1]))
    pool = Batch(np.arange(20.0).reshape(10, 2), np.array([0, 1, 2] * 3 + [2]))
    sub = metrics.nonmember_pool(members, pool, seed=4)
    assert len(sub) == 3
    assert set(sub.labels.tolist()) <= {0, 1}
    again = metrics.nonmember_pool(members, pool, seed=4)
    np.testing.assert_array_equal(sub.features, again.features)


def test_confidence_scores_in_range(rng):
    spec = ModelSpec((2, 5, 3), "tanh", 1)
    from fupareto.model import init_params
    s = metrics.confidence_scores(init_params(spec), spec, rng.standard_normal((20, 2)))
    assert np.all((s >= 1 / 3 - 1e-12) & (s <= 1))

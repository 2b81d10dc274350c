import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from fupareto import FUParetoClassifier
from fupareto.data import dirichlet_partition, synth_gaussians


@pytest.fixture(scope="module")
def blobs():
    X, y = synth_gaussians(3, 2, 60, 0.15, seed=0)
    clients = np.empty(len(y), dtype=int)
    for c, idx in enumerate(dirichlet_partition(y, 0.5, 4, seed=0, min_size=2)):
        clients[idx] = c
    return X, np.array(["a", "b", "c"])[y], clients


def small(**kw):
    return FUParetoClassifier(**{"pretrain_rounds": 30, "unlearn_rounds": 6,
                                 "post_rounds": 3, **kw})


def test_params_and_clone():
    est = small(s=2)
    params = est.get_params()
    assert params["s"] == 2 and params["hidden_layer_sizes"] == (16,)
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(eta=0.1)
    assert est.eta == 0.1


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        small().predict(np.zeros((2, 2)))


def test_fit_predict(blobs):
    X, y, clients = blobs
    est = small(pretrain_rounds=150).fit(X, y, clients=clients)
    assert list(est.classes_) == ["a", "b", "c"]
    assert est.predict(X).shape == y.shape
    assert set(est.predict(X)) <= set(est.classes_)
    assert est.score(X, y) > 0.9
    P = est.predict_proba(X)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)


def test_fit_is_deterministic(blobs):
    X, y, clients = blobs
    a = small().fit(X, y, clients=clients)
    b = small().fit(X, y, clients=clients)
    np.testing.assert_array_equal(a.coef_, b.coef_)


def test_input_validation(blobs):
    X, y, clients = blobs
    with pytest.raises(ValueError):
        small().fit(X[:5], y)
    with pytest.raises(ValueError):
        small().fit(X, y, clients=clients[:-1])
    est = small().fit(X, y, clients=clients)
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        est.unlearn([7])


def test_unlearn_updates_model(blobs):
    X, y, clients = blobs
    est = small().fit(X, y, clients=clients)
    before = est.coef_.copy()
    est.unlearn([0])
    assert est.forgotten_clients_ == [0]
    assert est.history_
    assert not np.array_equal(est.coef_, before)
    np.testing.assert_array_equal(est.coef_pre_, before)
    assert {"asr", "racc_mean", "mia_auc"} <= set(est.unlearn_summary_["final"])

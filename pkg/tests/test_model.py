import math

import numpy as np
import pytest

from fupareto import losses as L
from fupareto import model as M
from fupareto.exceptions import ConfigurationError

from .gradcheck import check_gradient


@pytest.fixture
def mlp(rng):
    spec = M.ModelSpec((2, 16, 3), "relu", init_seed=3)
    w = M.init_params(spec) + 0.3 * rng.standard_normal(spec.n_params)
    batch = M.Batch(rng.standard_normal((12, 2)), rng.integers(0, 3, 12))
    return spec, w, batch


def test_param_count_and_layout():
    spec = M.ModelSpec((784, 64, 10))
    assert spec.n_params == 784 * 64 + 64 + 64 * 10 + 10
    with pytest.raises(ConfigurationError):
        M.ModelSpec((5,))
    with pytest.raises(ConfigurationError):
        M.ModelSpec((2, 3), activation="gelu")


def test_init_params():
    spec = M.ModelSpec((4, 8, 3), init_seed=7)
    a, b = M.init_params(spec), M.init_params(spec)
    assert a.tobytes() == b.tobytes()
    for ws, bs, fan_in, fan_out in spec.slices():
        assert np.all(a[bs] == 0)
        assert np.all(np.abs(a[ws]) <= math.sqrt(6 / (fan_in + fan_out)))


def test_logits_examples(rng):
    spec = M.ModelSpec((3, 5, 4))
    X = rng.standard_normal((6, 3))
    np.testing.assert_array_equal(M.logits(np.zeros(spec.n_params), spec, X), 0)
    lin = M.ModelSpec((3, 3))
    w = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
    np.testing.assert_array_equal(M.logits(w, lin, np.eye(3)[[1]]), [[0, 1, 0]])


def test_logits_match_naive_matmul(rng):
    spec = M.ModelSpec((3, 4, 2), "tanh")
    w = rng.standard_normal(spec.n_params)
    X = rng.standard_normal((5, 3))
    W1 = w[:12].reshape(3, 4); b1 = w[12:16]
    W2 = w[16:24].reshape(4, 2); b2 = w[24:26]
    expected = np.zeros((5, 2))
    for i in range(5):
        h = [math.tanh(sum(X[i, a] * W1[a, k] for a in range(3)) + b1[k]) for k in range(4)]
        for c in range(2):
            expected[i, c] = sum(h[k] * W2[k, c] for k in range(4)) + b2[c]
    np.testing.assert_allclose(M.logits(w, spec, X), expected, rtol=1e-12)


def test_ce_uniform_logits():
    spec = M.ModelSpec((2, 10))
    batch = M.Batch(np.ones((3, 2)), [0, 4, 9])
    value, _ = M.loss_and_grad(np.zeros(spec.n_params), spec, batch, L.CE)
    assert value == pytest.approx(2.302585, abs=1e-6)


def test_mbs_dead_zone(rng):
    spec = M.ModelSpec((2, 3))
    w = np.zeros(spec.n_params)
    w[6:9] = [0.0, 5.0, 0.0]  # class 1 always wins by 5
    batch = M.Batch(rng.standard_normal((4, 2)), [0, 2, 0, 2])
    value, g = M.loss_and_grad(w, spec, batch, L.MBS)
    assert value == 0
    assert not np.any(g)


@pytest.mark.parametrize("kind", ["CE", "MBS", "UCE", "KLUniform"])
def test_gradients_match_finite_differences(mlp, rng, kind):
    spec, w, batch = mlp
    coords = rng.choice(spec.n_params, 20, replace=False)
    worst, checked = check_gradient(w, spec, batch, L.LossSpec(kind), coords)
    assert checked >= 10
    assert worst <= 1e-4


def test_linear_in_final_layer(rng):
    spec = M.ModelSpec((3, 4))
    w = rng.standard_normal(spec.n_params)
    X = rng.standard_normal((5, 3))
    np.testing.assert_allclose(M.logits(2 * w, spec, X), 2 * M.logits(w, spec, X))


def test_loss_and_grad_deterministic_and_validates(mlp):
    spec, w, batch = mlp
    a, b = M.loss_and_grad(w, spec, batch, L.MBS), M.loss_and_grad(w, spec, batch, L.MBS)
    assert a[0] == b[0] and a[1].tobytes() == b[1].tobytes()
    with pytest.raises(ConfigurationError):
        M.loss_and_grad(w, spec, M.Batch(np.zeros((0, 2)), []), L.CE)
    with pytest.raises(ConfigurationError):
        M.logits(w, spec, np.zeros((1, 5)))

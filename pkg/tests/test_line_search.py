import numpy as np
import pytest

from fupareto.exceptions import ConfigurationError
from fupareto.line_search import (EXPANSION, IMPROVEMENT, LineSearchConfig,
                                  armijo_search)


def quad(w):
    return np.array([0.5 * float(w @ w)])


def test_hand_evaluated_quadratic():
    cfg = LineSearchConfig(eta_base=1.0, breadth=1, beta=0.1)
    out = armijo_search([1.0], [1.0], cfg, [0], quad, quad(np.array([1.0])), [[1.0]])
    # step 2 -> F = 0.5 > 0.5 - 0.2 (reject); step 1 -> F = 0 <= 0.4 (accept)
    assert out.accepted and out.step == 1.0 and out.trials_used == 2
    assert out.trial_losses[0] == 0.0


def test_ascent_direction_never_accepted():
    cfg = LineSearchConfig(eta_base=0.5, breadth=3, beta=0.1)
    out = armijo_search([1.0], [-1.0], cfg, [0], quad, quad(np.array([1.0])), [[1.0]])
    assert not out.accepted
    assert out.trials_used == 7


def test_small_beta_accepts_descent(rng):
    cfg = LineSearchConfig(eta_base=0.1, breadth=2, beta=1e-6)
    w = rng.standard_normal(4)
    out = armijo_search(w, w, cfg, [0], quad, quad(w), [w])
    assert out.accepted


def test_grids():
    imp = LineSearchConfig(1.0, 2, 0.1, IMPROVEMENT).grid()
    assert imp == [4.0, 2.0, 1.0, 0.5, 0.25]
    exp = LineSearchConfig(1.0, 2, 0.1, EXPANSION).grid()
    assert exp == [1.0, 0.5, 0.25]
    wide = LineSearchConfig(1.0, 2, 0.1, EXPANSION, widen_expansion=True).grid()
    assert wide == imp


def test_trials_follow_grid_and_stop_at_first_acceptance():
    seen = []

    def loss_eval(w):
        seen.append(float(1.0 - w[0]))
        return quad(w)

    cfg = LineSearchConfig(0.25, 3, 0.5)
    out = armijo_search([1.0], [1.0], cfg, [0], loss_eval, [0.5], [[1.0]])
    assert seen == cfg.grid()[:out.trials_used]
    assert out.step == seen[-1]


def test_eval_set_restricts_check():
    # objective 1 increases along d but is outside the eval set
    def loss_eval(w):
        return np.array([0.5 * w[0] ** 2, -w[0]])

    cfg = LineSearchConfig(0.5, 1, 0.1, EXPANSION)
    G = np.array([[1.0, -1.0]])
    out = armijo_search([1.0], [1.0], cfg, [0], loss_eval, [0.5, -1.0], G)
    assert out.accepted
    out = armijo_search([1.0], [1.0], cfg, [0, 1], loss_eval, [0.5, -1.0], G)
    assert not out.accepted


@pytest.mark.parametrize("kw", [dict(breadth=0), dict(beta=1.0), dict(eta_base=0),
                                dict(mode="other")])
def test_config_validation(kw):
    with pytest.raises(ConfigurationError):
        LineSearchConfig(**kw)

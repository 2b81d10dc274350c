"""Dyadic Armijo backtracking shared by the improvement, expansion and
post-training rounds."""

from dataclasses import dataclass, field

import numpy as np

from . import numkit
from .exceptions import ConfigurationError

IMPROVEMENT = "Improvement"
EXPANSION = "Expansion"


@dataclass(frozen=True)
class LineSearchConfig:
    eta_base: float = 0.05
    breadth: int = 3
    beta: float = 0.05
    mode: str = IMPROVEMENT
    widen_expansion: bool = False

    def __post_init__(self):
        if not self.eta_base > 0:
            raise ConfigurationError("eta must be positive")
        if int(self.breadth) != self.breadth or self.breadth < 1:
            raise ConfigurationError("s is a positive integer")
        if not 0 < self.beta < 1:
            raise ConfigurationError("beta must lie in (0, 1)")
        if self.mode not in (IMPROVEMENT, EXPANSION):
            raise ConfigurationError(f"unknown line-search mode {self.mode!r}")

    def grid(self):
        """Trial steps in decreasing order.

        Improvement searches ``2^s eta ... 2^-s eta``; expansion the reduced
        interval ``eta ... 2^-s eta`` unless ``widen_expansion`` is set.
        """
        s = int(self.breadth)
        top = s if (self.mode == IMPROVEMENT or self.widen_expansion) else 0
        return [self.eta_base * 2.0**e for e in range(top, -s - 1, -1)]


@dataclass
class LineSearchOutcome:
    accepted: bool
    step: float
    trial_losses: np.ndarray
    trials_used: int
    params: np.ndarray = None
    decrease_terms: np.ndarray = field(default=None, repr=False)


def armijo_holds(new_losses, base_losses, slopes, step, beta, eval_set):
    """Sufficient decrease ``F_i(w - step d) <= F_i(w) - beta step g_i.d``."""
    return all(new_losses[i] <= base_losses[i] - beta * step * slopes[i]
               for i in eval_set)


def armijo_search(w, d, cfg, eval_set, loss_eval, base_losses, grads):
    """Largest grid step satisfying the Armijo rule for every objective in
    ``eval_set``.

    Parameters
    ----------
    w, d : parameter vector and search direction (the update is ``w - step d``)
    cfg : LineSearchConfig
    eval_set : sequence of int
        Column indices of ``grads`` (and entries of the loss vectors) that
        must all satisfy the rule.
    loss_eval : callable
        ``loss_eval(w_trial) -> array`` of objective values, indexed like
        ``base_losses``.
    base_losses : array
    grads : gradient matrix, one column per objective

    Returns
    -------
    LineSearchOutcome
        When nothing is accepted, ``step`` is the last (smallest) trial.
    """
    w = numkit.as_vector(w)
    d = numkit.as_vector(d)
    G = numkit.as_columns(grads)
    base = np.asarray(base_losses, dtype=np.float64)
    eval_set = list(eval_set)
    slopes = np.array([numkit.dot(G[:, i], d) for i in range(G.shape[1])])
    trials = 0
    new_losses = base
    step = 0.0
    for step in cfg.grid():
        trials += 1
        trial_w = numkit.axpy(-step, d, w)
        new_losses = np.asarray(loss_eval(trial_w), dtype=np.float64)
        if armijo_holds(new_losses, base, slopes, step, cfg.beta, eval_set):
            return LineSearchOutcome(True, step, new_losses, trials, trial_w,
                                     slopes)
    return LineSearchOutcome(False, step, new_losses, trials, None, slopes)

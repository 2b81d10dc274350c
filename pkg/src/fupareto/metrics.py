"""Attack success rate, retained accuracy and a confidence-threshold MIA."""

import numpy as np
from sklearn.metrics import roc_auc_score

from . import losses as L
from . import model as M
from .exceptions import ConfigurationError


def accuracy(w, spec, batch):
    return float(np.mean(M.predict(w, spec, batch.features) == batch.labels))


def asr(w, spec, forget_shards):
    """Fraction of forget samples still classified correctly."""
    batches = [b for b in forget_shards if len(b)]
    if not batches:
        raise ConfigurationError("empty forget set")
    return accuracy(w, spec, M.Batch.concat(batches))


def r_acc(w, spec, remaining_test_shards):
    """Unweighted mean and population std of per-client test accuracy."""
    shards = list(remaining_test_shards)
    if not shards:
        raise ConfigurationError("need at least one remaining client")
    if any(len(b) == 0 for b in shards):
        raise ConfigurationError("empty test shard")
    accs = np.array([accuracy(w, spec, b) for b in shards])
    return float(accs.mean()), float(accs.std())


def confidence_scores(w, spec, batch):
    """Max softmax probability of each sample."""
    return L.softmax(M.logits(w, spec, batch)).max(axis=1)


def auc(member_scores, nonmember_scores):
    """Mann-Whitney estimate of P(member score > nonmember score); ties count 1/2."""
    a = np.asarray(member_scores, dtype=np.float64)
    b = np.asarray(nonmember_scores, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("both score sets must be non-empty")
    y = np.concatenate([np.ones(a.size), np.zeros(b.size)])
    return float(roc_auc_score(y, np.concatenate([a, b])))


def nonmember_pool(members, pool, seed=0):
    """Subsample ``pool`` to the member count, keeping only member classes."""
    keep = np.flatnonzero(np.isin(pool.labels, np.unique(members.labels)))
    rng = np.random.default_rng(seed)
    if len(keep) > len(members):
        keep = np.sort(rng.choice(keep, size=len(members), replace=False))
    return pool.subset(keep)


def mia_auc(w, spec, members, nonmembers):
    return auc(confidence_scores(w, spec, members),
               confidence_scores(w, spec, nonmembers))

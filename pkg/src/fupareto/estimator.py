"""scikit-learn style front end.

``FUParetoClassifier.fit`` runs FedAvg over a client assignment supplied by
the caller; ``unlearn`` then removes a set of clients with the Pareto
improvement/expansion procedure followed by anchor-constrained
post-training. ``predict``/``predict_proba``/``score`` use the current model.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import losses as L
from . import model as M
from .config import RunConfig
from .data import FederatedDataset
from .federation import Federation


def _shards(X, y, clients, n_clients, test_frac, seed):
    rng = np.random.default_rng([seed, 1])
    train, test = [], []
    for c in range(n_clients):
        idx = np.flatnonzero(clients == c)
        if len(idx) < 2:
            raise ValueError(f"client {c} needs at least two samples")
        idx = rng.permutation(idx)
        n_test = min(max(1, int(round(test_frac * len(idx)))), len(idx) - 1)
        test.append(M.Batch(X[np.sort(idx[:n_test])], y[np.sort(idx[:n_test])]))
        train.append(M.Batch(X[np.sort(idx[n_test:])], y[np.sort(idx[n_test:])]))
    return train, test


class FUParetoClassifier(ClassifierMixin, BaseEstimator):
    """Federated MLP classifier that supports client-level unlearning.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
    activation : {"relu", "tanh"}
    pretrain_rounds, local_epochs, batch_size, pretrain_lr, lr_decay
        FedAvg settings used by :meth:`fit`.
    eta, beta, s, delta
        Base step, Armijo factor, search breadth and MBS margin.
    unlearn_rounds, post_rounds
        Round budgets of the unlearning and post-training stages.
    ablation : str or None
        One of ``M1`` .. ``M8``.
    test_frac : float
        Fraction of every client's samples held out for R-Acc.
    random_state : int
    """

    def __init__(self, hidden_layer_sizes=(16,), activation="relu",
                 pretrain_rounds=200, local_epochs=1, batch_size=200,
                 pretrain_lr=0.1, lr_decay=0.999, eta=0.05, beta=0.05, s=3,
                 delta=1e-3, unlearn_rounds=100, post_rounds=None,
                 ablation=None, test_frac=0.2, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.pretrain_rounds = pretrain_rounds
        self.local_epochs = local_epochs
        self.batch_size = batch_size
        self.pretrain_lr = pretrain_lr
        self.lr_decay = lr_decay
        self.eta = eta
        self.beta = beta
        self.s = s
        self.delta = delta
        self.unlearn_rounds = unlearn_rounds
        self.post_rounds = post_rounds
        self.ablation = ablation
        self.test_frac = test_frac
        self.random_state = random_state

    def _config(self, n_clients, n_unlearn):
        return RunConfig(
            clients=n_clients, unlearn_count=n_unlearn,
            hidden=list(self.hidden_layer_sizes), activation=self.activation,
            seed=self.random_state, pretrain_rounds=self.pretrain_rounds,
            local_epochs=self.local_epochs, batch_size=self.batch_size,
            pretrain_lr=self.pretrain_lr, lr_decay=self.lr_decay, eta=self.eta,
            beta=self.beta, s=self.s, delta=self.delta,
            unlearn_rounds=self.unlearn_rounds, post_rounds=self.post_rounds,
            ablation=self.ablation, test_frac=self.test_frac)

    def fit(self, X, y, clients=None):
        """FedAvg pretraining.

        ``clients`` gives each sample's client id (``0 .. m-1``); when
        omitted, samples are dealt round-robin to two clients.
        """
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        y_idx = np.searchsorted(self.classes_, y)
        clients = (np.arange(len(y)) % 2 if clients is None
                   else np.asarray(clients, dtype=np.intp))
        if clients.shape != y.shape:
            raise ValueError("clients must have one entry per sample")
        n_clients = int(clients.max()) + 1
        train, test = _shards(X, y_idx, clients, n_clients, self.test_frac,
                              self.random_state)
        self.dataset_ = FederatedDataset(train, test, M.Batch.concat(test),
                                         len(self.classes_), {"scheme": "given"})
        self.spec_ = M.ModelSpec((X.shape[1], *self.hidden_layer_sizes,
                                  len(self.classes_)), self.activation,
                                 self.random_state)
        fed = Federation(self.dataset_, self.spec_,
                         self._config(max(n_clients, 2), 0), unlearn_ids=[])
        self.coef_pre_ = fed.pretrain()
        self.coef_ = self.coef_pre_.copy()
        self.n_features_in_ = X.shape[1]
        self.history_ = []
        return self

    def unlearn(self, forget_clients):
        """Remove the listed clients and post-train on the rest."""
        check_is_fitted(self, "coef_")
        forget = sorted(int(c) for c in forget_clients)
        n_clients = self.dataset_.n_clients
        if not forget or forget[0] < 0 or forget[-1] >= n_clients:
            raise ValueError("forget_clients must be valid client ids")
        fed = Federation(self.dataset_, self.spec_,
                         self._config(n_clients, len(forget)), unlearn_ids=forget)
        result = fed.run_pipeline(w_pre=self.coef_, stages=("unlearn", "posttrain"))
        self.coef_unlearned_ = result.w_unlearned
        self.coef_ = result.w_final
        self.history_ = result.records
        self.unlearn_summary_ = result.summary
        self.forgotten_clients_ = forget
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return M.logits(self.coef_, self.spec_, X)

    def predict_proba(self, X):
        return L.softmax(self.decision_function(X))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

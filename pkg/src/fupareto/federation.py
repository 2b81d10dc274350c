"""Federated simulation: FedAvg pretraining, the unlearning stage that
alternates Pareto improvement and expansion, and anchor-constrained
post-training.

Client gradients outside pretraining are exact full-shard gradients at the
current global model. Objective columns are always ordered unlearning
clients (ascending id), remaining clients (ascending id), auxiliaries.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry, mgda, numkit
from . import losses as L
from . import metrics as MT
from . import model as M
from .exceptions import (DegenerateAnchorError, DegenerateLossError,
                         EmptyBasisError, NumericError, StageAbort)
from .line_search import (EXPANSION, IMPROVEMENT, LineSearchConfig,
                          armijo_search)

log = logging.getLogger(__name__)

UNLEARNING = "Unlearning"
REMAINING = "Remaining"
POSTTRAIN = "PostTrain"
NAIVE = "Naive"
PRETRAIN = "Pretrain"

UNLEARN_LOSS = {"M7": "UCE", "M8": "KLUniform"}


@dataclass(frozen=True)
class ClientState:
    id: int
    role: str
    train: M.Batch
    test: M.Batch

    @property
    def preference(self):
        return 0.0 if self.role == UNLEARNING else 1.0


@dataclass
class RoundRecord:
    round: int
    stage: str
    mode: str
    losses: list
    weights: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    step: Optional[float] = None
    accepted: bool = False
    gd_norm: float = float("nan")
    trigger: str = ""
    eval_set: list = field(default_factory=list)
    eval_before: list = field(default_factory=list)
    eval_after: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    beta: float = float("nan")
    trials: int = 0
    remaining_before: list = field(default_factory=list)
    remaining_after: list = field(default_factory=list)
    max_remaining_alignment: float = float("nan")
    asr: float = float("nan")
    racc_mean: float = float("nan")
    racc_std: float = float("nan")
    distance: float = float("nan")
    flags: list = field(default_factory=list)

    @property
    def failed(self):
        return self.trigger in ("line_search", "stationary")


@dataclass
class PipelineResult:
    w_pre: np.ndarray
    w_unlearned: np.ndarray
    w_final: np.ndarray
    records: list
    summary: dict


def build_clients(dataset, unlearn_ids):
    unlearn_ids = set(unlearn_ids)
    return [ClientState(i, UNLEARNING if i in unlearn_ids else REMAINING,
                        dataset.train[i], dataset.test[i])
            for i in range(dataset.n_clients)]


def _check(v, stage, t):
    if not np.all(np.isfinite(v)):
        raise StageAbort(stage, t, "non-finite values")
    return v


class Federation:
    """Server-side orchestration over simulated clients.

    Parameters
    ----------
    dataset : FederatedDataset
    spec : ModelSpec
    cfg : RunConfig
    unlearn_ids : sequence of int, optional
        Defaults to the first ``cfg.unlearn_count`` client ids.
    """

    def __init__(self, dataset, spec, cfg, unlearn_ids=None):
        self.dataset = dataset
        self.spec = spec
        self.cfg = cfg
        if unlearn_ids is None:
            unlearn_ids = range(cfg.unlearn_count)
        self.clients = build_clients(dataset, unlearn_ids)
        self.unlearning = sorted((c for c in self.clients if c.role == UNLEARNING),
                                 key=lambda c: c.id)
        self.remaining = sorted((c for c in self.clients if c.role == REMAINING),
                                key=lambda c: c.id)
        self.ordered = self.unlearning + self.remaining
        self.ablation = cfg.ablation
        self.unlearn_loss = L.LossSpec(UNLEARN_LOSS.get(cfg.ablation, "MBS"),
                                       cfg.delta)
        self.mbs_loss = L.LossSpec("MBS", cfg.delta)

    # -- client-side computations ----------------------------------------

    def loss_spec(self, client):
        return self.unlearn_loss if client.role == UNLEARNING else L.CE

    def client_losses(self, w, clients):
        return np.array([M.loss_value(w, self.spec, c.train, self.loss_spec(c))
                         for c in clients])

    def client_grads(self, w, clients):
        vals, grads = [], []
        for c in clients:
            v, g = M.loss_and_grad(w, self.spec, c.train, self.loss_spec(c))
            vals.append(v)
            grads.append(g)
        return np.array(vals), grads

    def mbs_losses(self, w):
        return np.array([M.loss_value(w, self.spec, c.train, self.mbs_loss)
                         for c in self.unlearning])

    def _eta(self, t):
        return self.cfg.eta * self.cfg.lr_decay**t

    def _line_cfg(self, t, mode):
        return LineSearchConfig(self._eta(t), self.cfg.s, self.cfg.beta, mode,
                                widen_expansion=self.ablation == "M6")

    def _mgda(self, G):
        """Min-norm direction of the columns ``G``.

        With ``normalize_gradients`` each column is scaled to unit length
        before the solve and the returned direction has unit length, so the
        line-search grid is a distance in parameter space. Positive column
        scaling leaves the set of common descent directions unchanged.
        """
        if not self.cfg.normalize_gradients:
            return mgda.min_norm(G, self.cfg.mgda_tol, self.cfg.mgda_max_iter)
        unit = [g / numkit.norm(g) for g in G]
        res = mgda.min_norm(unit, self.cfg.mgda_tol, self.cfg.mgda_max_iter)
        if res.stationary:
            return res
        return mgda.MgdaResult(res.weights, res.direction / res.direction_norm,
                               res.direction_norm, False, res.iterations, res.gap)

    def snapshot(self, record, w, w0):
        if self.unlearning:
            record.asr = MT.asr(w, self.spec, [c.train for c in self.unlearning])
        if self.remaining:
            record.racc_mean, record.racc_std = MT.r_acc(
                w, self.spec, [c.test for c in self.remaining])
        if w0 is not None:
            record.distance = numkit.norm(w - w0)
        return record

    # -- pretraining ------------------------------------------------------

    def pretrain(self, w_init=None, rounds=None, on_round=None):
        """FedAvg with local minibatch SGD and per-round learning-rate decay."""
        cfg = self.cfg
        rounds = cfg.pretrain_rounds if rounds is None else rounds
        w = M.init_params(self.spec) if w_init is None else np.array(w_init)
        sizes = np.array([len(c.train) for c in self.clients], dtype=np.float64)
        mix = sizes / sizes.sum()
        for t in range(rounds):
            lr = cfg.pretrain_lr * cfg.lr_decay**t
            local = []
            for c in self.clients:
                rng = np.random.default_rng([cfg.seed, t, c.id])
                wc = w.copy()
                for _ in range(cfg.local_epochs):
                    order = rng.permutation(len(c.train))
                    for start in range(0, len(order), cfg.batch_size):
                        mb = c.train.subset(order[start:start + cfg.batch_size])
                        value, g = M.loss_and_grad(wc, self.spec, mb, L.CE)
                        if not math.isfinite(value):
                            raise StageAbort(PRETRAIN, t, "non-finite loss")
                        wc -= lr * g
                local.append(wc)
            w = _check(numkit.combine(np.stack(local, axis=1), mix), PRETRAIN, t)
            if on_round is not None:
                on_round(t, w)
        return w

    # -- unlearning stage -------------------------------------------------

    def _fairness(self, F, p, grads, record):
        # a single loss makes the angle constant; its zero column would
        # pin the min-norm direction at zero
        if len(F) < 2:
            record.flags.append("fairness_constant")
            return None
        try:
            grad = L.fairness_grad(F, p, grads)
        except DegenerateLossError:
            record.flags.append("fairness_degenerate")
            return None
        if not np.any(grad):
            record.flags.append("fairness_constant")
            return None
        return L.fairness_value(F, p), grad

    @staticmethod
    def _fairness_at(F, p):
        if numkit.norm(F) < 1e-12:
            return math.pi / 2
        return L.fairness_value(F, p)

    def _alignment(self, d, r_grads):
        """Largest ``|d.g_r| / (|d| |g_r|)`` over remaining gradients."""
        d_norm = numkit.norm(d)
        worst = 0.0
        for g in r_grads:
            denom = d_norm * numkit.norm(g)
            if denom > 0:
                worst = max(worst, abs(numkit.dot(d, g)) / denom)
        return worst

    def improvement_round(self, w, t, w0=None):
        """One Pareto-improvement round.

        Returns ``(w_next, record)``; ``record.failed`` signals that the
        next round should expand.
        """
        F, grads = self.client_grads(w, self.ordered)
        _check(F, UNLEARNING, t)
        rec = RoundRecord(t, UNLEARNING, IMPROVEMENT, F.tolist())
        n_u = len(self.unlearning)
        cols, names, values, client_idx = [], [], [], []
        for i, c in enumerate(self.ordered):
            if c.role == UNLEARNING and not np.any(grads[i]):
                rec.flags.append(f"u{c.id}_terminated")
                continue
            client_idx.append(i)
            cols.append(grads[i])
            names.append(f"{'u' if c.role == UNLEARNING else 'r'}{c.id}")
            values.append(F[i])
        p = np.ones(len(F)) if self.ablation == "M3" else np.array(
            [c.preference for c in self.ordered])
        if self.ablation != "M2":
            fair = self._fairness(F, p, grads, rec)
            if fair is not None:
                cols.append(fair[1])
                names.append("fair")
                values.append(fair[0])
        res = self._mgda(cols)
        rec.columns, rec.weights = names, res.weights.tolist()
        rec.gd_norm = res.direction_norm
        if res.stationary:
            rec.trigger = "stationary"
            return w, rec

        has_fair = names[-1] == "fair"

        def loss_eval(w_trial):
            Ft = self.client_losses(w_trial, self.ordered)
            out = [Ft[i] for i in client_idx]
            if has_fair:
                out.append(self._fairness_at(Ft, p))
            return np.array(out)

        eval_set = list(range(len(names)))
        out = armijo_search(w, res.direction, self._line_cfg(t, IMPROVEMENT),
                            eval_set, loss_eval, np.array(values), cols)
        self._log_search(rec, out, names, values, eval_set)
        if not out.accepted:
            rec.trigger = "line_search"
            return w, rec
        rec.remaining_before = F[n_u:].tolist()
        rec.remaining_after = [out.trial_losses[k] for k, n in enumerate(names)
                               if n.startswith("r")]
        return _check(out.params, UNLEARNING, t), rec

    def _log_search(self, rec, out, names, values, eval_set):
        rec.accepted = out.accepted
        rec.step = out.step if out.accepted else None
        rec.trials = out.trials_used
        rec.beta = self.cfg.beta
        rec.eval_set = [names[i] for i in eval_set]
        rec.eval_before = [float(values[i]) for i in eval_set]
        rec.eval_after = [float(out.trial_losses[i]) for i in eval_set]
        rec.slopes = [float(out.decrease_terms[i]) for i in eval_set]

    def expansion_round(self, w, t, w0=None):
        """One Pareto-expansion round: null-space projected MGDA over the
        unlearning clients, searched on the reduced interval."""
        F_all, grads = self.client_grads(w, self.ordered)
        _check(F_all, UNLEARNING, t)
        rec = RoundRecord(t, UNLEARNING, EXPANSION, F_all.tolist())
        n_u = len(self.unlearning)
        F_u, g_u = F_all[:n_u], grads[:n_u]
        r_grads = grads[n_u:]
        project = self.ablation != "M5" and bool(r_grads)
        basis = None
        if project:
            try:
                basis = geometry.orthonormal_basis(r_grads, self.cfg.drop_tol)
            except EmptyBasisError:
                rec.flags.append("empty_remaining_basis")
        g_proj = [geometry.project_null(g, basis) if basis is not None else g.copy()
                  for g in g_u]
        cols, names, raw, values = [], [], [], []
        for c, g, gp, f in zip(self.unlearning, g_u, g_proj, F_u):
            gn = numkit.norm(g)
            if gn == 0.0 or numkit.norm(gp) <= 1e-12 * gn:
                rec.flags.append(f"u{c.id}_{'terminated' if gn == 0 else 'in_span'}")
                continue
            cols.append(gp)
            raw.append(g)
            names.append(f"u{c.id}")
            values.append(f)
        if not cols:
            rec.trigger = "dead_end"
            rec.flags.append("no_projected_gradient")
            return w, rec
        n_obj = len(cols)
        if self.ablation != "M4":
            fair = self._fairness(F_u, np.ones(n_u), g_proj, rec)
            if fair is not None:
                cols.append(fair[1])
                names.append("fair")
        res = self._mgda(cols)
        rec.columns, rec.weights = names, res.weights.tolist()
        rec.gd_norm = res.direction_norm
        rec.max_remaining_alignment = self._alignment(res.direction, r_grads)
        if res.stationary:
            rec.trigger = "dead_end"
            rec.flags.append("stationary")
            return w, rec
        idx = [self.ordered.index(c) for c in self.unlearning
               if f"u{c.id}" in names]

        def loss_eval(w_trial):
            Ft = self.client_losses(w_trial, self.unlearning)
            return np.array([Ft[i] for i in idx])

        eval_set = list(range(n_obj))
        line_cfg = self._line_cfg(t, EXPANSION)
        out = armijo_search(w, res.direction, line_cfg, eval_set, loss_eval,
                            np.array(values), raw)
        self._log_search(rec, out, names, values, eval_set)
        rec.remaining_before = F_all[n_u:].tolist()
        if out.accepted:
            w_next = out.params
        else:
            # dead end: take the floor step once
            rec.trigger = "dead_end"
            rec.step = line_cfg.grid()[-1]
            w_next = numkit.axpy(-rec.step, res.direction, w)
        rec.remaining_after = self.client_losses(w_next, self.remaining).tolist()
        return _check(w_next, UNLEARNING, t), rec

    def naive_round(self, w, t, w0=None):
        """Ablation M1: step along the data-size weighted sum of unlearning
        gradients, no MGDA, no line search."""
        F_all, grads = self.client_grads(w, self.ordered)
        rec = RoundRecord(t, UNLEARNING, NAIVE, F_all.tolist())
        n_u = len(self.unlearning)
        sizes = np.array([len(c.train) for c in self.unlearning], dtype=np.float64)
        weights = sizes / sizes.sum()
        d = numkit.combine(grads[:n_u], weights)
        rec.columns = [f"u{c.id}" for c in self.unlearning]
        rec.weights = weights.tolist()
        rec.gd_norm = numkit.norm(d)
        rec.step = self._eta(t)
        rec.accepted = True
        return _check(numkit.axpy(-rec.step, d, w), UNLEARNING, t), rec

    # -- post-training ----------------------------------------------------

    def posttrain_round(self, w, t, w0, use_anchor=True):
        """Remaining-client CE gradients plus the anchor column.

        The anchor column is the gradient of the surrogate ``-|w - w0|``,
        so a common descent step never moves the model back toward ``w0``.
        """
        F, grads = self.client_grads(w, self.remaining)
        _check(F, POSTTRAIN, t)
        rec = RoundRecord(t, POSTTRAIN, POSTTRAIN, F.tolist())
        cols = list(grads)
        names = [f"r{c.id}" for c in self.remaining]
        values = list(F)
        if use_anchor:
            try:
                cols.append(-geometry.anchor_direction(w, w0))
                names.append("anchor")
                values.append(-numkit.norm(w - w0))
            except DegenerateAnchorError:
                rec.flags.append("anchor_degenerate")
        res = self._mgda(cols)
        rec.columns, rec.weights = names, res.weights.tolist()
        rec.gd_norm = res.direction_norm
        if res.stationary:
            rec.trigger = "stationary"
            return w, rec
        has_anchor = names[-1] == "anchor"

        def loss_eval(w_trial):
            out = list(self.client_losses(w_trial, self.remaining))
            if has_anchor:
                out.append(-numkit.norm(w_trial - w0))
            return np.array(out)

        eval_set = list(range(len(names)))
        out = armijo_search(w, res.direction, self._line_cfg(t, IMPROVEMENT),
                            eval_set, loss_eval, np.array(values), cols)
        self._log_search(rec, out, names, values, eval_set)
        if not out.accepted:
            rec.trigger = "line_search"
            return w, rec
        return _check(out.params, POSTTRAIN, t), rec

    # -- stages -----------------------------------------------------------

    def unlearn(self, w0, rounds=None, records=None, on_round=None):
        """Unlearning stage. Returns ``(w, records)``."""
        rounds = self.cfg.unlearn_rounds if rounds is None else rounds
        records = [] if records is None else records
        w = np.array(w0)
        if not self.unlearning:
            return w, records
        mode = NAIVE if self.ablation == "M1" else IMPROVEMENT
        zero_streak = dead_ends = 0
        for t in range(rounds):
            if mode == IMPROVEMENT:
                w, rec = self.improvement_round(w, t, w0)
                next_mode = EXPANSION if rec.failed else IMPROVEMENT
            elif mode == EXPANSION:
                w, rec = self.expansion_round(w, t, w0)
                dead_ends = dead_ends + 1 if rec.trigger == "dead_end" else 0
                next_mode = IMPROVEMENT
            else:
                w, rec = self.naive_round(w, t, w0)
                next_mode = NAIVE
            records.append(self.snapshot(rec, w, w0))
            if on_round is not None:
                on_round(rec, w)
            if self.unlearn_loss.kind == "MBS":
                zero_streak = zero_streak + 1 if np.all(self.mbs_losses(w) == 0.0) else 0
                if zero_streak >= self.cfg.early_stop_rounds:
                    rec.flags.append("early_stop")
                    break
            if dead_ends >= self.cfg.max_dead_ends:
                rec.flags.append("expansion_converged")
                break
            mode = next_mode
        return w, records

    def posttrain(self, w, w0, rounds=None, records=None, start_round=0,
                  use_anchor=True, on_round=None):
        rounds = self.cfg.resolved_post_rounds if rounds is None else rounds
        records = [] if records is None else records
        w = np.array(w)
        if not self.remaining:
            return w, records
        for k in range(rounds):
            # the step decay restarts with the stage; only the log index continues
            w, rec = self.posttrain_round(w, k, w0, use_anchor)
            rec.round = start_round + k
            records.append(self.snapshot(rec, w, w0))
            if on_round is not None:
                on_round(rec, w)
        return w, records

    def summary(self, w, w0=None):
        out = {}
        if self.unlearning:
            forget = M.Batch.concat([c.train for c in self.unlearning])
            out["asr"] = MT.asr(w, self.spec, [forget])
            pool = MT.nonmember_pool(forget, self.dataset.global_test, self.cfg.seed)
            out["mia_auc"] = MT.mia_auc(w, self.spec, forget, pool)
        if self.remaining:
            out["racc_mean"], out["racc_std"] = MT.r_acc(
                w, self.spec, [c.test for c in self.remaining])
        if w0 is not None:
            out["distance"] = numkit.norm(w - w0)
        return out

    def run_pipeline(self, w_pre=None, stages=("pretrain", "unlearn", "posttrain"),
                     w_anchor=None):
        """Pretrain (unless ``w_pre`` is given), unlearn, post-train.

        ``w_anchor`` is the pre-unlearning model used by post-training when
        the pipeline starts directly at that stage.
        """
        records = []
        if w_pre is None:
            w_pre = self.pretrain() if "pretrain" in stages else M.init_params(self.spec)
        w = w_pre
        if "unlearn" in stages:
            w, records = self.unlearn(w_pre, records=records)
        w_unlearned = w
        anchor = w_pre if w_anchor is None else w_anchor
        if "posttrain" in stages:
            start = records[-1].round + 1 if records else 0
            w, records = self.posttrain(w, anchor, records=records, start_round=start)
        summary = {"pre": self.summary(w_pre), "unlearned": self.summary(w_unlearned, anchor),
                   "final": self.summary(w, anchor)}
        return PipelineResult(w_pre, w_unlearned, w, records, summary)


# -- audits -------------------------------------------------------------------

def audit_armijo(records):
    """Re-check every accepted line-search step from the logged values.

    Returns a list of ``(round, objective)`` pairs that violate the rule.
    """
    bad = []
    for r in records:
        if not (r.accepted and r.step is not None and r.eval_set):
            continue
        for name, f0, f1, slope in zip(r.eval_set, r.eval_before, r.eval_after,
                                       r.slopes):
            if not f1 <= f0 - r.beta * r.step * slope:
                bad.append((r.round, name))
    return bad


def audit_modes(records):
    """Round indices whose Expansion is not preceded by a failed Improvement."""
    bad = []
    unlearn = [r for r in records if r.stage == UNLEARNING]
    for prev, cur in zip([None] + unlearn[:-1], unlearn):
        if cur.mode == EXPANSION:
            if prev is None or prev.mode != IMPROVEMENT or not prev.failed:
                bad.append(cur.round)
    return bad

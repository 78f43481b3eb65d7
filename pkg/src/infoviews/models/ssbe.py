"""Stochastic supervised binary encoder (SSBE).

The encoder ``P(B | x) = sigmoid(W x + c)`` is trained to minimize the
average ``H(Y | I)`` over random size-n subsets ``I`` of its components.
Each minibatch step:

1. samples ``b ~ P(B | x)`` for every example,
2. estimates ``P(y | b_I)`` from add-one smoothed counts within the batch,
3. follows the score-function gradient of ``-log P_hat(y | b_I)`` with the
   count table held fixed,
4. optionally adds ``lambda * sum_i KL(Bernoulli(p) || Bernoulli(q_i))`` where
   ``q_i`` is the batch-mean activation of component ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import DomainError, TrainingDivergedError
from .encoder import FactorizedEncoder


@dataclass
class SsbeConfig:
    view_size: int = 4
    sparsity_weight: float = 0.0
    sparsity_target: float = 0.05
    learning_rate: float = 0.05
    batch_size: int = 100
    n_epochs: int = 15
    subsets_per_batch: int = 20
    n_components: int = 784

    def __post_init__(self):
        if self.view_size < 1:
            raise DomainError("view_size must be >= 1")
        if self.view_size > self.n_components:
            raise DomainError(f"view_size {self.view_size} exceeds m={self.n_components}")
        if self.sparsity_weight < 0:
            raise DomainError("sparsity_weight must be >= 0")
        if not 0 < self.sparsity_target < 1:
            raise DomainError("sparsity_target must lie in (0, 1)")


def pattern_codes(bits, subset) -> np.ndarray:
    """Integer key of each row's bit pattern on ``subset``."""
    sub = np.asarray(bits)[:, subset].astype(np.uint8)
    if sub.shape[1] <= 62:
        return sub.astype(np.int64) @ (np.int64(1) << np.arange(sub.shape[1], dtype=np.int64))
    return np.unique(sub, axis=0, return_inverse=True)[1].reshape(-1)


def smoothed_label_probability(codes, y, n_labels, smoothing=1.0) -> np.ndarray:
    """Add-``smoothing`` estimate of P(y_b | code_b) from counts over the batch."""
    uniq, inverse = np.unique(codes, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.zeros((uniq.size, n_labels))
    np.add.at(counts, (inverse, y), 1.0)
    num = counts[inverse, y] + smoothing
    den = counts[inverse].sum(axis=1) + smoothing * n_labels
    return num / den


def score_function_logit_grad(probs, bits, subsets, losses, baseline=True):
    """Score-function gradient of the mean loss w.r.t. the encoder logits.

    ``losses[k, b]`` is the loss of example ``b`` under subset ``subsets[k]``.
    d log P(b_I | x) / d a_j = (b_j - p_j) for j in I. With ``baseline`` the
    leave-one-out mean loss of the other examples is subtracted.
    """
    B = probs.shape[0]
    K = len(subsets)
    grad = np.zeros_like(probs)
    resid = bits - probs
    for k, subset in enumerate(subsets):
        L = losses[k]
        if baseline and B > 1:
            L = L - (L.sum() - L) / (B - 1)
        grad[:, subset] += L[:, None] * resid[:, subset]
    return grad / (K * B)


def sparsity_logit_grad(probs, target, weight):
    """Gradient of ``weight * sum_i KL(B(target) || B(q_i))`` w.r.t. the logits."""
    B = probs.shape[0]
    q = np.clip(probs.mean(axis=0), 1e-7, 1 - 1e-7)
    dkl_dq = -target / q + (1 - target) / (1 - q)
    return weight * dkl_dq[None, :] * probs * (1 - probs) / B


def sparsity_penalty(probs, target, weight) -> float:
    q = np.clip(probs.mean(axis=0), 1e-7, 1 - 1e-7)
    kl = target * np.log(target / q) + (1 - target) * np.log((1 - target) / (1 - q))
    return float(weight * kl.sum())


class SSBE(TransformerMixin, BaseEstimator):
    """Supervised stochastic binary encoder; ``transform`` gives P(B_i = 1 | x)."""

    def __init__(self, n_components=784, view_size=4, sparsity_weight=0.0,
                 sparsity_target=0.05, learning_rate=0.05, batch_size=100, n_epochs=15,
                 subsets_per_batch=20, init_std=0.01, random_state=None):
        self.n_components = n_components
        self.view_size = view_size
        self.sparsity_weight = sparsity_weight
        self.sparsity_target = sparsity_target
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.subsets_per_batch = subsets_per_batch
        self.init_std = init_std
        self.random_state = random_state

    def config(self) -> SsbeConfig:
        return SsbeConfig(view_size=self.view_size, sparsity_weight=self.sparsity_weight,
                          sparsity_target=self.sparsity_target,
                          learning_rate=self.learning_rate, batch_size=self.batch_size,
                          n_epochs=self.n_epochs, subsets_per_batch=self.subsets_per_batch,
                          n_components=self.n_components)

    def fit(self, X, y):
        cfg = self.config()
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, yi = np.unique(y, return_inverse=True)
        K = max(2, self.classes_.size)
        rng = np.random.default_rng(self.random_state)
        n, dim = X.shape
        m = cfg.n_components
        W = self.init_std * rng.standard_normal((m, dim))
        c = np.zeros(m)
        trace = []
        for _ in range(cfg.n_epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, cfg.batch_size):
                rows = order[start:start + cfg.batch_size]
                xb, yb = X[rows], yi[rows]
                probs = expit(xb @ W.T + c)
                bits = (rng.random(probs.shape) < probs).astype(np.float64)
                subsets = [np.sort(rng.choice(m, cfg.view_size, replace=False))
                           for _ in range(cfg.subsets_per_batch)]
                losses = np.stack([
                    -np.log(smoothed_label_probability(pattern_codes(bits, s), yb, K))
                    for s in subsets])
                g = score_function_logit_grad(probs, bits, subsets, losses)
                if cfg.sparsity_weight > 0:
                    g = g + sparsity_logit_grad(probs, cfg.sparsity_target, cfg.sparsity_weight)
                gW, gc = g.T @ xb, g.sum(axis=0)
                if not (np.isfinite(gW).all() and np.isfinite(gc).all()):
                    raise TrainingDivergedError("non-finite SSBE gradient")
                W -= cfg.learning_rate * gW
                c -= cfg.learning_rate * gc
                total += float(losses.mean()) * rows.size
                if cfg.sparsity_weight > 0:
                    total += sparsity_penalty(probs, cfg.sparsity_target,
                                              cfg.sparsity_weight) * rows.size
            trace.append(total / n)
        self.W_, self.c_ = W, c
        self.objective_ = np.array(trace)
        self.n_features_in_ = dim
        return self

    @property
    def encoder_(self) -> FactorizedEncoder:
        check_is_fitted(self, "W_")
        role = "sparse-ssbe" if self.sparsity_weight > 0 else "ssbe"
        return FactorizedEncoder(self.W_, self.c_, role=role)

    def transform(self, X):
        check_is_fitted(self, "W_")
        return self.encoder_.transform(check_array(X, dtype=np.float64))

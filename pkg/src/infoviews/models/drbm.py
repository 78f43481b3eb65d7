"""Discriminative RBM trained on the conditional log-likelihood log P(y | x)."""

from __future__ import annotations

import numpy as np
from scipy.special import expit, log_softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import TrainingDivergedError


def _softplus(x):
    return np.logaddexp(0.0, x)


def drbm_log_proba(W, U, c, d, X):
    """log P(y | x) with hidden units summed out; U is ``(K, H)``."""
    act = (X @ W.T + c)[:, None, :] + U[None]       # (B, K, H)
    scores = d + _softplus(act).sum(axis=2)
    return log_softmax(scores, axis=1), act


def drbm_gradients(W, U, c, d, X, y):
    """Gradient of the mean log P(y | x) over the batch."""
    B, K = X.shape[0], U.shape[0]
    logp, act = drbm_log_proba(W, U, c, d, X)
    p = np.exp(logp)
    coef = np.eye(K)[y] - p                          # (B, K)
    sig = expit(act)                                 # (B, K, H)
    weighted = coef[:, :, None] * sig                # (B, K, H)
    dc = weighted.sum(axis=1)                        # (B, H)
    gW = dc.T @ X / B
    gU = weighted.sum(axis=0) / B
    gc = dc.mean(axis=0)
    gd = coef.mean(axis=0)
    loglik = float(logp[np.arange(B), y].mean())
    return gW, gU, gc, gd, loglik


class DRBM(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Discriminative RBM classifier and hidden-layer encoder.

    ``transform`` returns the per-unit hidden marginals under the model,
    ``P(h_j = 1 | x) = sum_y P(y | x) sigmoid(c_j + W_j x + U_yj)``.
    """

    def __init__(self, n_components=784, learning_rate=0.05, batch_size=100,
                 n_epochs=15, init_std=0.01, random_state=None):
        self.n_components = n_components
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.init_std = init_std
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, yi = np.unique(y, return_inverse=True)
        K = self.classes_.size
        if K < 2:
            raise ValueError("DRBM needs at least two classes")
        rng = np.random.default_rng(self.random_state)
        n, dim = X.shape
        H = self.n_components
        W = self.init_std * rng.standard_normal((H, dim))
        U = self.init_std * rng.standard_normal((K, H))
        c = np.zeros(H)
        d = np.zeros(K)
        trace = []
        for _ in range(self.n_epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                rows = order[start:start + self.batch_size]
                gW, gU, gc, gd, ll = drbm_gradients(W, U, c, d, X[rows], yi[rows])
                W += self.learning_rate * gW
                U += self.learning_rate * gU
                c += self.learning_rate * gc
                d += self.learning_rate * gd
                total += ll * rows.size
            if not all(np.isfinite(a).all() for a in (W, U, c, d)):
                raise TrainingDivergedError("DRBM parameters became non-finite")
            trace.append(total / n)
        self.W_, self.U_, self.c_, self.d_ = W, U, c, d
        self.log_likelihood_ = np.array(trace)
        self.n_features_in_ = dim
        return self

    def predict_log_proba(self, X):
        check_is_fitted(self, "W_")
        X = check_array(X, dtype=np.float64)
        return drbm_log_proba(self.W_, self.U_, self.c_, self.d_, X)[0]

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def predict(self, X):
        return self.classes_[self.predict_log_proba(X).argmax(axis=1)]

    def transform(self, X):
        check_is_fitted(self, "W_")
        X = check_array(X, dtype=np.float64)
        logp, act = drbm_log_proba(self.W_, self.U_, self.c_, self.d_, X)
        # posterior weights sum to 1 only up to rounding
        return np.clip(np.einsum("bk,bkh->bh", np.exp(logp), expit(act)), 0.0, 1.0)

    @property
    def m(self) -> int:
        return self.n_components


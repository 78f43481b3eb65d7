"""Bernoulli RBM trained with CD-1, and greedy stacking."""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import TrainingDivergedError
from .encoder import FactorizedEncoder, StackedEncoder


def cd1_update(W, vb, hb, v0, h0, learning_rate):
    """One CD-1 step given the positive-phase hidden sample ``h0``.

    ``W`` is ``(n_hidden, n_visible)``. The negative phase uses the mean-field
    reconstruction ``v1 = sigmoid(h0 W + vb)`` and ``ph1 = sigmoid(v1 W^T + hb)``.
    Returns ``(W, vb, hb, v1)`` with updated parameters.
    """
    batch = v0.shape[0]
    ph0 = expit(v0 @ W.T + hb)
    v1 = expit(h0 @ W + vb)
    ph1 = expit(v1 @ W.T + hb)
    dW = (ph0.T @ v0 - ph1.T @ v1) / batch
    dvb = (v0 - v1).mean(axis=0)
    dhb = (ph0 - ph1).mean(axis=0)
    if not (np.isfinite(dW).all() and np.isfinite(dvb).all() and np.isfinite(dhb).all()):
        raise TrainingDivergedError("non-finite CD-1 gradient")
    W, vb, hb = W + learning_rate * dW, vb + learning_rate * dvb, hb + learning_rate * dhb
    if not (np.isfinite(W).all() and np.isfinite(vb).all() and np.isfinite(hb).all()):
        raise TrainingDivergedError("CD-1 update produced non-finite parameters")
    return W, vb, hb, v1


class RBM(TransformerMixin, BaseEstimator):
    """Bernoulli-Bernoulli RBM.

    ``transform`` returns hidden probabilities P(h_j = 1 | v); after fitting,
    ``encoder_`` holds the same map as a :class:`FactorizedEncoder`.
    """

    def __init__(self, n_components=784, learning_rate=0.05, batch_size=100,
                 n_epochs=15, init_std=0.01, dtype="float32", random_state=None):
        self.n_components = n_components
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.init_std = init_std
        self.dtype = dtype
        self.random_state = random_state

    def fit(self, X, y=None):
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        dt = np.dtype(self.dtype)
        X = check_array(X, dtype=dt)
        rng = np.random.default_rng(self.random_state)
        n, d = X.shape
        W = (self.init_std * rng.standard_normal((self.n_components, d))).astype(dt)
        vb = np.zeros(d, dtype=dt)
        hb = np.zeros(self.n_components, dtype=dt)
        lr = dt.type(self.learning_rate)
        trace = []
        for _ in range(self.n_epochs):
            order = rng.permutation(n)
            err = 0.0
            for start in range(0, n, self.batch_size):
                v0 = X[order[start:start + self.batch_size]]
                ph0 = expit(v0 @ W.T + hb)
                h0 = (rng.random(ph0.shape, dtype=dt) < ph0).astype(dt)
                W, vb, hb, v1 = cd1_update(W, vb, hb, v0, h0, lr)
                err += float(((v0.astype(np.float64) - v1) ** 2).sum())
            trace.append(err / (n * d))
        self.components_ = W
        self.intercept_visible_ = vb
        self.intercept_hidden_ = hb
        self.reconstruction_error_ = np.array(trace)
        self.n_features_in_ = d
        return self

    @property
    def encoder_(self) -> FactorizedEncoder:
        check_is_fitted(self, "components_")
        return FactorizedEncoder(self.components_, self.intercept_hidden_, role="rbm")

    def transform(self, X):
        check_is_fitted(self, "components_")
        return self.encoder_.transform(X)

    def reconstruct(self, X):
        check_is_fitted(self, "components_")
        h = self.transform(X)
        return expit(h @ self.components_ + self.intercept_visible_)


def stack(X, layer_sizes, hyperparameters=None, seed=0) -> StackedEncoder:
    """Greedily train one RBM per entry of ``layer_sizes``.

    Layer ``l`` is trained on a binary sample of layer ``l-1``'s factorized
    output; the first layer sees ``X`` as given.
    """
    sizes = list(layer_sizes)
    if not sizes:
        raise ValueError("layer_sizes must not be empty")
    hyper = dict(hyperparameters or {})
    seeds = np.random.SeedSequence(seed).spawn(2 * len(sizes))
    layers, data = [], np.asarray(X)
    for k, size in enumerate(sizes):
        rbm = RBM(n_components=size, random_state=int(seeds[2 * k].generate_state(1)[0]),
                  **hyper).fit(data)
        enc = rbm.encoder_
        enc.role = f"rbm-layer{k + 1}"
        layers.append(enc)
        if k + 1 < len(sizes):
            data = enc.sample(data, np.random.default_rng(seeds[2 * k + 1]))
    sample_seed = int(np.random.SeedSequence(seed).generate_state(1)[0])
    return StackedEncoder(layers, sample_seed=sample_seed)

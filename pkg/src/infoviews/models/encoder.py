"""Factorized binary encoders: P(B | x) = prod_i sigmoid(W x + c)_i."""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..exceptions import DomainError


class FactorizedEncoder:
    """Affine-sigmoid encoder with independent Bernoulli outputs.

    ``weights`` has shape ``(m, m_X)``; ``biases`` shape ``(m,)``.
    """

    def __init__(self, weights, biases, role: str = "encoder"):
        W = np.asarray(weights)
        c = np.asarray(biases)
        if W.ndim != 2 or c.shape != (W.shape[0],):
            raise DomainError(f"incompatible shapes {W.shape} and {c.shape}")
        if not (np.isfinite(W).all() and np.isfinite(c).all()):
            raise DomainError("encoder parameters must be finite")
        self.weights = W
        self.biases = c
        self.role = role

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1]

    def logits(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=self.weights.dtype)
        return X @ self.weights.T + self.biases

    def transform(self, X) -> np.ndarray:
        """Component probabilities P(B_i = 1 | x), shape ``(N, m)``."""
        return expit(self.logits(X))

    def sample(self, X, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        p = self.transform(X)
        return (rng.random(p.shape) < p).astype(self.weights.dtype)

    def __repr__(self):
        return f"FactorizedEncoder(m={self.m}, m_X={self.n_inputs}, role={self.role!r})"


class StackedEncoder:
    """Greedy stack of factorized layers, sampled layer by layer.

    ``transform`` returns the top layer's factorized probabilities given a
    binary sample of the layer below. The intermediate samples are drawn from
    a stream seeded by ``sample_seed`` so repeated calls agree.
    """

    def __init__(self, layers, sample_seed: int = 0):
        layers = list(layers)
        if not layers:
            raise DomainError("a stack needs at least one layer")
        for lower, upper in zip(layers, layers[1:]):
            if upper.n_inputs != lower.m:
                raise DomainError(
                    f"layer with {upper.n_inputs} inputs cannot sit on {lower.m} outputs")
        self.layers = layers
        self.sample_seed = sample_seed

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def m(self) -> int:
        return self.layers[-1].m

    def propagate(self, X, rng) -> list:
        """Binary samples of every layer, bottom to top."""
        rng = np.random.default_rng(rng)
        out, h = [], X
        for layer in self.layers:
            h = layer.sample(h, rng)
            out.append(h)
        return out

    def transform(self, X) -> np.ndarray:
        rng = np.random.default_rng(self.sample_seed)
        h = X
        for layer in self.layers[:-1]:
            h = layer.sample(h, rng)
        return self.layers[-1].transform(h)

    def __repr__(self):
        sizes = [self.layers[0].n_inputs] + [layer.m for layer in self.layers]
        return f"StackedEncoder({'-'.join(map(str, sizes))})"


def duplicate_features(encoder: FactorizedEncoder, keep: int, copies: int,
                       indices=None, seed=None) -> FactorizedEncoder:
    """Keep ``keep`` components of ``encoder`` and repeat them ``copies`` times.

    Without ``indices`` the kept components are a seeded uniform choice (or
    the first ``keep`` when ``seed`` is None). Output rows are laid out as
    ``copies`` consecutive blocks.
    """
    if keep < 1 or copies < 1:
        raise ValueError("keep and copies must be positive")
    if keep > encoder.m:
        raise ValueError(f"cannot keep {keep} of {encoder.m} components")
    if indices is None:
        if seed is None:
            indices = np.arange(keep)
        else:
            indices = np.sort(np.random.default_rng(seed).choice(encoder.m, keep, replace=False))
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size != keep:
        raise ValueError("len(indices) must equal keep")
    W = np.tile(encoder.weights[indices], (copies, 1))
    c = np.tile(encoder.biases[indices], copies)
    return FactorizedEncoder(W, c, role=f"{encoder.role}-dup{keep}x{copies}")

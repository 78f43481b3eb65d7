from .drbm import DRBM
from .encoder import FactorizedEncoder, StackedEncoder, duplicate_features
from .io import load_model, save_model
from .rbm import RBM, cd1_update, stack
from .ssbe import SSBE, SsbeConfig


def train_rbm(X, hidden_count, hyperparameters=None, seed=0) -> RBM:
    return RBM(n_components=hidden_count, random_state=seed, **(hyperparameters or {})).fit(X)


def train_drbm(X, y, hidden_count, hyperparameters=None, seed=0) -> DRBM:
    return DRBM(n_components=hidden_count, random_state=seed,
                **(hyperparameters or {})).fit(X, y)


def train_ssbe(X, y, config: SsbeConfig, seed=0) -> SSBE:
    return SSBE(n_components=config.n_components, view_size=config.view_size,
                sparsity_weight=config.sparsity_weight,
                sparsity_target=config.sparsity_target,
                learning_rate=config.learning_rate, batch_size=config.batch_size,
                n_epochs=config.n_epochs, subsets_per_batch=config.subsets_per_batch,
                random_state=seed).fit(X, y)


__all__ = [
    "DRBM", "FactorizedEncoder", "RBM", "SSBE", "SsbeConfig", "StackedEncoder",
    "cd1_update", "duplicate_features", "load_model", "save_model", "stack",
    "train_drbm", "train_rbm", "train_ssbe",
]

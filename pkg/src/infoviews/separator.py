"""Constructive linear separation of classes for conditionally independent bits.

When ``H(Y | B) = 0`` and the components of ``B`` are independent given
``Y``, each class ``y_n`` confines ``B`` to a sub-hypercube fixed by its
deterministic components. With the sign pattern

    phi_i = +1 if P(B_i=1|y_n) = 1, -1 if it is 0, else 0

the affine weights ``mu_i = 2 phi_i`` (i < m) and
``mu_m = 1 - sum_i (phi_i^2 + phi_i)`` give ``(b, 1) . mu = 1`` on the
class support and ``<= -1`` on every other supported point.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DomainError
from .oracle import ExactJoint, conditional_total_correlation


def fit_phi(class_conditionals, eps_det=0.0) -> np.ndarray:
    """Sign patterns, one row per class, from P(B_i = 1 | y) rows."""
    p = np.asarray(class_conditionals, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if not np.all(np.isfinite(p)) or p.min() < 0 or p.max() > 1:
        raise DomainError("class conditionals must lie in [0, 1]")
    eps = np.asarray(eps_det, dtype=np.float64)
    if eps.ndim == 1:
        eps = eps[:, None]
    phi = np.zeros(p.shape, dtype=np.int8)
    phi[p <= eps] = -1
    phi[p >= 1.0 - eps] = 1
    return phi


def build_mu(phi) -> np.ndarray:
    """Affine weights ``(m + 1,)`` (or one row per class) from sign patterns."""
    phi = np.asarray(phi, dtype=np.float64)
    bias = 1.0 - (phi ** 2 + phi).sum(axis=-1, keepdims=True)
    return np.concatenate([2.0 * phi, bias], axis=-1)


def affine_scores(bits, mu) -> np.ndarray:
    """``(b, 1) . mu`` for every row of ``bits`` and every class row of ``mu``."""
    bits = np.asarray(bits, dtype=np.float64)
    mu = np.atleast_2d(mu)
    return bits @ mu[:, :-1].T + mu[:, -1]


@dataclass
class SeparatorModel:
    classes: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    eps_det: np.ndarray

    def decision_function(self, bits) -> np.ndarray:
        return affine_scores(bits, self.mu)

    def predict(self, bits) -> np.ndarray:
        return self.classes[self.decision_function(bits).argmax(axis=1)]


def separator_from_conditionals(class_conditionals, classes, eps_det=0.0) -> SeparatorModel:
    phi = fit_phi(class_conditionals, eps_det)
    return SeparatorModel(np.asarray(classes), phi, build_mu(phi),
                          np.broadcast_to(np.asarray(eps_det, dtype=float),
                                          (phi.shape[0],)).copy())


@dataclass
class CertificationReport:
    classes: list
    mu: list
    h_y_given_b: float
    max_conditional_dependence: float
    hypotheses_hold: bool
    failed_hypotheses: list
    n_points: int
    n_checks: int
    violations: list = field(default_factory=list)
    in_class_dot_min: float = float("nan")
    in_class_dot_max: float = float("nan")
    out_class_dot_max: float = float("nan")
    eps_det: float = 0.0

    @property
    def certified(self) -> bool:
        return self.hypotheses_hold and not self.violations

    @property
    def violation_rate(self) -> float:
        return len(self.violations) / self.n_checks if self.n_checks else 0.0

    def to_json(self, path=None) -> str:
        payload = asdict(self)
        payload["certified"] = self.certified
        payload["violation_rate"] = self.violation_rate
        text = json.dumps(payload, indent=2, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def verify_theorem1(joint: ExactJoint, eps_det: float = 0.0, eps_h: float = 1e-9,
                    eps_ci: float = 1e-9, prob_tol: float = 1e-12) -> CertificationReport:
    """Check the separation property on every supported point of ``joint``.

    Both premises are measured first; a failing premise is reported in
    ``failed_hypotheses`` and the separation result is not asserted.
    """
    py = joint.label_marginal()
    classes = np.flatnonzero(py > prob_tol)
    h_cond = joint.entropy(range(joint.m), True) - joint.entropy(range(joint.m))
    dep = max(conditional_total_correlation(joint, int(y)) for y in classes)
    failed = []
    if h_cond > eps_h:
        failed.append("H(Y|B) > eps_h")
    if dep > eps_ci:
        failed.append("conditional dependence > eps_ci")

    model = separator_from_conditionals(joint.class_conditionals()[classes], classes, eps_det)
    flat = joint.flat()
    pb = flat.sum(axis=1)
    rows = np.flatnonzero(pb > prob_tol)
    bits = ((rows[:, None] >> np.arange(joint.m)) & 1).astype(np.float64)
    scores = model.decision_function(bits)                    # (points, classes)
    post = flat[rows][:, classes] / pb[rows, None]            # P(y_n | b)
    in_class = flat[rows][:, classes] > prob_tol              # b in support of y_n
    certain = post >= 1.0 - 1e-9

    violations = []
    for r, k in zip(*np.nonzero((scores > 0) != certain)):
        violations.append({"b": bits[r].astype(int).tolist(), "class": int(classes[k]),
                           "score": float(scores[r, k]), "posterior": float(post[r, k])})
    return CertificationReport(
        classes=classes.tolist(), mu=model.mu.tolist(), h_y_given_b=float(h_cond),
        max_conditional_dependence=float(dep), hypotheses_hold=not failed,
        failed_hypotheses=failed, n_points=int(rows.size), n_checks=int(scores.size),
        violations=violations,
        in_class_dot_min=float(scores[in_class].min()) if in_class.any() else float("nan"),
        in_class_dot_max=float(scores[in_class].max()) if in_class.any() else float("nan"),
        out_class_dot_max=float(scores[~in_class].max()) if (~in_class).any() else float("nan"),
        eps_det=float(eps_det))


class LinearSeparator(ClassifierMixin, BaseEstimator):
    """Separator built from empirical class-conditional bit frequencies.

    ``eps_det=None`` uses ``1 / (2 n_y)`` per class, the counting resolution.
    """

    def __init__(self, eps_det=None):
        self.eps_det = eps_det

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if not np.all((X == 0) | (X == 1)):
            raise DomainError("LinearSeparator expects exact 0/1 features")
        self.classes_, yi = np.unique(y, return_inverse=True)
        counts = np.bincount(yi)
        cc = np.stack([X[yi == k].mean(axis=0) for k in range(self.classes_.size)])
        eps = 1.0 / (2.0 * counts) if self.eps_det is None else self.eps_det
        self.model_ = separator_from_conditionals(cc, self.classes_, eps)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(check_array(X, dtype=np.float64))

    def predict(self, X):
        return self.classes_[self.decision_function(X).argmax(axis=1)]

    def violation_rate(self, X, y) -> float:
        """Share of samples not scored positive by exactly their own class."""
        scores = self.decision_function(X)
        positive = scores > 0
        own = positive[np.arange(len(y)), np.searchsorted(self.classes_, y)]
        ok = own & (positive.sum(axis=1) == 1)
        return float(1.0 - ok.mean())


def _pairwise_conditional_mi(bits, y, pairs) -> np.ndarray:
    """Plug-in I(B_a; B_b | Y) in bits for each (a, b) pair of binary columns."""
    out = np.zeros(len(pairs))
    for k, (a, b) in enumerate(pairs):
        code = (bits[:, a] * 2 + bits[:, b]).astype(np.int64)
        counts = np.zeros((y.max() + 1, 4))
        np.add.at(counts, (y, code), 1.0)
        total = 0.0
        for row in counts:
            n = row.sum()
            if n == 0:
                continue
            p = row.reshape(2, 2) / n
            pa, pb = p.sum(axis=1), p.sum(axis=0)
            nz = p > 0
            total += n / len(y) * float((p[nz] * np.log2(p[nz] / np.outer(pa, pb)[nz])).sum())
        out[k] = total
    return out


def certify_empirical(bits, y, eps_det=None, eps_ci: float = 0.01, n_pairs: int = 200,
                      seed=0) -> dict:
    """Separator diagnostics on sampled binary data.

    Premises are only approximately testable here, so the report gives the
    violation rate, the share of deterministic components per class and a
    plug-in estimate of the mean pairwise conditional dependence on random
    component pairs.
    """
    bits = np.asarray(bits)
    y = np.asarray(y)
    clf = LinearSeparator(eps_det=eps_det).fit(bits, y)
    rng = np.random.default_rng(seed)
    m = bits.shape[1]
    pairs = [tuple(rng.choice(m, 2, replace=False)) for _ in range(n_pairs)] if m > 1 else []
    yi = np.searchsorted(clf.classes_, y)
    cmi = _pairwise_conditional_mi(bits, yi, pairs) if pairs else np.zeros(0)
    phi = clf.model_.phi
    dep = float(cmi.mean()) if cmi.size else 0.0
    return {
        "classes": clf.classes_.tolist(),
        "n_samples": int(bits.shape[0]),
        "m": int(m),
        "eps_det": clf.model_.eps_det.tolist(),
        "deterministic_share": (phi != 0).mean(axis=1).tolist(),
        "violation_rate": clf.violation_rate(bits, y),
        "training_accuracy": float((clf.predict(bits) == y).mean()),
        "mean_pairwise_conditional_mi": dep,
        "failed_hypotheses": [] if dep <= eps_ci else ["conditional dependence > eps_ci"],
        "mu": clf.model_.mu.tolist(),
    }

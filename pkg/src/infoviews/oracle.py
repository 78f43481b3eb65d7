"""Exact information measures on small explicit joints P(B, Y).

Everything here enumerates the full probability table, so it is limited to
``m <= 16`` binary components. Entropies are in bits with ``0 log 0 = 0``.

Text format for joints (one support point per line, ``#`` comments)::

    # m=3 labels=2
    010 1 0.125

The bit string lists components 0..m-1 left to right, followed by the label
index and the probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from pathlib import Path

import numpy as np
from scipy.special import gammaln, logsumexp

from .bitdata import LabeledBitDataset, LabelSpace, component_subset
from .exceptions import DomainError, FormatError, SizeError

MAX_COMPONENTS = 16
MAX_EXACT_SUBSETS = 100_000


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def binary_entropy(p):
    """Binary entropy in bits, elementwise, with H_b(0) = H_b(1) = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h if h.ndim else float(h)


class ExactJoint:
    """Probability table over ``{0,1}^m x {0..K-1}``.

    ``table`` has shape ``(2,) * m + (K,)``; axis ``i`` is component ``B_i``
    and the last axis is the label.
    """

    def __init__(self, table, tol: float = 1e-12):
        table = np.asarray(table, dtype=np.float64)
        m = table.ndim - 1
        if m < 1 or any(s != 2 for s in table.shape[:-1]):
            raise DomainError("table must have shape (2,)*m + (K,)")
        if m > MAX_COMPONENTS:
            raise SizeError(f"m={m} exceeds the enumeration cap of {MAX_COMPONENTS}")
        if table.shape[-1] < 2:
            raise DomainError("need at least two labels")
        if np.any(table < 0):
            raise DomainError("negative probability in table")
        if abs(table.sum() - 1.0) > tol:
            raise DomainError(f"table sums to {table.sum()!r}, not 1")
        self.table = table
        self.table.setflags(write=False)
        self._cache = {}

    @property
    def m(self) -> int:
        return self.table.ndim - 1

    @property
    def n_labels(self) -> int:
        return self.table.shape[-1]

    @classmethod
    def from_flat(cls, flat, m: int) -> "ExactJoint":
        """Build from a ``(2**m, K)`` array whose row index encodes b with B_i as bit i."""
        flat = np.asarray(flat, dtype=np.float64)
        k = flat.shape[1]
        # row r -> bits (r >> i) & 1; C-order reshape puts bit m-1 on axis 0
        t = flat.reshape((2,) * m + (k,))
        return cls(np.transpose(t, tuple(range(m - 1, -1, -1)) + (m,)))

    def flat(self) -> np.ndarray:
        m = self.m
        t = np.transpose(self.table, tuple(range(m - 1, -1, -1)) + (m,))
        return t.reshape(2 ** m, self.n_labels)

    def label_marginal(self) -> np.ndarray:
        return self.table.reshape(-1, self.n_labels).sum(axis=0)

    def marginal(self, subset, with_label: bool) -> np.ndarray:
        keep = tuple(int(i) for i in subset)
        if with_label:
            keep = keep + (self.m,)
        drop = tuple(a for a in range(self.m + 1) if a not in keep)
        return self.table.sum(axis=drop) if drop else self.table

    def entropy(self, subset=(), with_label: bool = False) -> float:
        """H(B_subset) or H(B_subset, Y) in bits."""
        key = (frozenset(int(i) for i in subset), with_label)
        if key not in self._cache:
            self._cache[key] = _entropy_bits(self.marginal(sorted(key[0]), with_label).ravel())
        return self._cache[key]

    def conditional_entropy(self, target, given=(), given_label: bool = False) -> float:
        target = set(int(i) for i in target)
        given = set(int(i) for i in given)
        return (self.entropy(target | given, given_label)
                - self.entropy(given, given_label))

    def mutual_information(self, a, b, given=()) -> float:
        """I(B_a; B_b | B_given) among components only."""
        a, b, g = set(a), set(b), set(given)
        return (self.entropy(a | g) + self.entropy(b | g)
                - self.entropy(a | b | g) - self.entropy(g))

    def support(self) -> list:
        """Points (b tuple, label) with positive probability."""
        flat = self.flat()
        rows, labels = np.nonzero(flat > 0)
        return [(tuple((r >> i) & 1 for i in range(self.m)), int(y))
                for r, y in zip(rows, labels)]

    def class_conditionals(self) -> np.ndarray:
        """P(B_i = 1 | y) as a ``(K, m)`` array (NaN rows for P(y) = 0)."""
        out = np.full((self.n_labels, self.m), np.nan)
        for i in range(self.m):
            p0, p1 = self.marginal((i,), True)
            tot = p0 + p1   # not label_marginal(): keeps p1 / tot exactly 1 when p0 == 0
            with np.errstate(invalid="ignore", divide="ignore"):
                out[:, i] = np.where(tot > 0, p1 / tot, np.nan)
        return out

    def to_dataset(self) -> LabeledBitDataset:
        """Weighted exact-bit dataset holding every support point."""
        pts = self.support()
        flat = self.flat()
        feats = np.array([b for b, _ in pts], dtype=np.float32).reshape(len(pts), self.m)
        labels = np.array([y for _, y in pts])
        weights = np.array([flat[sum(bit << i for i, bit in enumerate(b)), y]
                            for b, y in pts])
        return LabeledBitDataset(feats, labels, LabelSpace(self.n_labels), weights)


def random_joint(m: int, n_labels: int, rng, concentration: float = 1.0) -> ExactJoint:
    """Dirichlet-distributed joint table, mostly for tests."""
    rng = np.random.default_rng(rng)
    flat = rng.dirichlet(np.full(2 ** m * n_labels, concentration)).reshape(2 ** m, n_labels)
    return ExactJoint.from_flat(flat, m)


def conditionally_independent_joint(class_conditionals, label_prior) -> ExactJoint:
    """Joint with P(B | y) = prod_i P(B_i | y) from a ``(K, m)`` table."""
    cc = np.asarray(class_conditionals, dtype=np.float64)
    prior = np.asarray(label_prior, dtype=np.float64)
    k, m = cc.shape
    if m > MAX_COMPONENTS:
        raise SizeError(f"m={m} exceeds the enumeration cap of {MAX_COMPONENTS}")
    table = np.ones((2,) * m + (k,))
    for i in range(m):
        shape = [1] * (m + 1)
        shape[i] = 2
        shape[m] = k
        factor = np.stack([1.0 - cc[:, i], cc[:, i]])  # (2, K)
        table = table * factor.reshape(shape)
    table = table * prior.reshape((1,) * m + (k,))
    return ExactJoint(table / table.sum())


# --------------------------------------------------------------------------
# information measures


def exact_cmi(joint: ExactJoint, i: int, subset=()) -> float:
    """I(B_i; Y | B_subset) = H(B_i | I) - H(B_i | I, Y)."""
    idx = component_subset(subset, joint.m)
    if not 0 <= i < joint.m:
        raise IndexError(f"component {i} out of range")
    if i in set(idx.tolist()):
        raise ValueError(f"component {i} is part of the conditioning subset")
    return (joint.conditional_entropy({i}, idx)
            - joint.conditional_entropy({i}, idx, given_label=True))


def exact_interaction(joint: ExactJoint, i: int, subset) -> float:
    """Interaction I(B_i, I, Y) via I(B_i; I | Y) - I(B_i; I)."""
    s = set(int(j) for j in subset)
    cond = (joint.entropy({i}, True) + joint.entropy(s, True)
            - joint.entropy(s | {i}, True) - joint.entropy((), True))
    return cond - joint.mutual_information({i}, s)


def _subsets_excluding(m: int, i: int, n: int):
    return combinations([j for j in range(m) if j != i], n)


@dataclass
class ExactProfile:
    f: np.ndarray        # f_B(n), n = 0..n_max
    F: np.ndarray        # F_B(n), n = 0..n_max+1
    F_direct: np.ndarray  # F_B(n) as the subset-average of I(I; Y)
    C: np.ndarray        # C_B(n) from the interaction definition, n = 0..n_max
    D_hat: np.ndarray    # printed D-hat formula evaluated exactly, n = 0..n_max
    m: int


def exact_profile(joint: ExactJoint, n_max: int | None = None) -> ExactProfile:
    """Information profile of ``joint`` by full enumeration.

    Also returns ``F_direct`` (average I(I;Y) over all size-n subsets),
    ``C`` built from interaction informations and ``D_hat``, the
    cumulative average of H(B_i|Y) - H(B_i|I,Y), each computed on its own
    route so the telescoping identities can be cross-checked.
    """
    m = joint.m
    if n_max is None:
        n_max = m - 1
    if not 0 <= n_max < m:
        raise ValueError(f"n_max must lie in [0, {m - 1}]")
    f = np.zeros(n_max + 1)
    inter = np.zeros(n_max + 1)
    cdep = np.zeros(n_max + 1)
    for n in range(n_max + 1):
        count = comb(m - 1, n)
        for i in range(m):
            si = sc = sd = 0.0
            for s in _subsets_excluding(m, i, n):
                si += exact_cmi(joint, i, s)
                if n:
                    sc += exact_interaction(joint, i, s)
                    sd += (joint.conditional_entropy({i}, (), True)
                           - joint.conditional_entropy({i}, s, True))
            f[n] += si / count
            inter[n] += sc / count
            cdep[n] += sd / count
    f /= m
    inter /= m
    cdep /= m
    F = np.concatenate([[0.0], np.cumsum(f)])
    hy = joint.entropy((), True)
    F_direct = np.zeros(n_max + 2)
    for n in range(1, n_max + 2):
        tot = 0.0
        for s in combinations(range(m), n):
            tot += joint.entropy(s) + hy - joint.entropy(s, True)
        F_direct[n] = tot / comb(m, n)
    return ExactProfile(f=f, F=F, F_direct=F_direct, C=np.cumsum(inter),
                        D_hat=np.cumsum(cdep), m=m)


def exact_total_correlation(joint: ExactJoint, subset) -> float:
    """Normalized conditional total correlation d_B(I), bits per component."""
    idx = component_subset(subset, joint.m)
    if idx.size == 0:
        raise ValueError("d_B needs a non-empty subset")
    singles = sum(joint.conditional_entropy({int(i)}, (), True) for i in idx)
    return (singles - joint.conditional_entropy(idx, (), True)) / idx.size


def exact_D(joint: ExactJoint, n: int, rng=0) -> tuple:
    """D_B(n), the average of d_B over size-n subsets.

    Returns ``(value, approximate)``; when there are more than
    ``MAX_EXACT_SUBSETS`` subsets a seeded uniform sample of that size is
    averaged and ``approximate`` is True.
    """
    m = joint.m
    if not 1 <= n <= m:
        raise ValueError(f"n must lie in [1, {m}]")
    if comb(m, n) <= MAX_EXACT_SUBSETS:
        vals = [exact_total_correlation(joint, s) for s in combinations(range(m), n)]
        return float(np.mean(vals)), False
    rng = np.random.default_rng(rng)
    vals = [exact_total_correlation(joint, np.sort(rng.choice(m, n, replace=False)))
            for _ in range(MAX_EXACT_SUBSETS)]
    return float(np.mean(vals)), True


def conditional_total_correlation(joint: ExactJoint, y: int) -> float:
    """sum_i H(B_i | Y=y) - H(B | Y=y), zero iff components independent given y."""
    slab = joint.table[..., y]
    py = slab.sum()
    if py <= 0:
        return 0.0
    cond = slab / py
    singles = 0.0
    for i in range(joint.m):
        axes = tuple(a for a in range(joint.m) if a != i)
        singles += _entropy_bits(cond.sum(axis=axes))
    return singles - _entropy_bits(cond.ravel())


# --------------------------------------------------------------------------
# the B^alpha family


@dataclass(frozen=True)
class AlphaModel:
    """Uniform binary Y; each B_j copies Y through a symmetric channel of fidelity alpha."""

    alpha: float
    m: int

    def __post_init__(self):
        if not 0.5 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0.5, 1], got {self.alpha}")
        if self.m < 1:
            raise DomainError("m must be positive")

    def class_conditionals(self) -> np.ndarray:
        return np.array([[1.0 - self.alpha] * self.m, [self.alpha] * self.m])

    def dataset(self, num_samples: int = 2) -> LabeledBitDataset:
        """Rows carry the exact class-conditional probabilities, labels alternate."""
        labels = np.arange(num_samples) % 2
        return LabeledBitDataset(self.class_conditionals()[labels], labels, LabelSpace(2))

    def sample(self, num_samples: int, rng) -> LabeledBitDataset:
        """Exact-bit draws of (B^alpha, Y)."""
        rng = np.random.default_rng(rng)
        labels = rng.integers(0, 2, num_samples)
        probs = self.class_conditionals()[labels]
        return LabeledBitDataset((rng.random(probs.shape) < probs).astype(np.float32),
                                 labels, LabelSpace(2))


def alpha_profile(model: AlphaModel, n: int) -> float:
    """Closed-form f(n) for B^alpha, summing over the count of ones in I."""
    a, m = float(model.alpha), model.m
    if not 0 <= n < m:
        raise ValueError(f"n must lie in [0, {m - 1}]")
    if a == 1.0:
        return 1.0 if n == 0 else 0.0
    if a == 0.5:
        return 0.0
    k = np.arange(n + 1)
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    la, lb = np.log(a), np.log1p(-a)
    l1 = k * la + (n - k) * lb   # log P(k | Y=1)
    l0 = k * lb + (n - k) * la   # log P(k | Y=0)
    post1 = np.exp(l1 - np.logaddexp(l1, l0))
    log_pk = logc + np.logaddexp(l1, l0) + np.log(0.5)
    pk = np.exp(log_pk - logsumexp(log_pk))
    mix = post1 * a + (1.0 - post1) * (1.0 - a)
    return float(np.dot(pk, binary_entropy(mix)) - binary_entropy(a))


def materialize_alpha(model: AlphaModel) -> ExactJoint:
    if model.m > MAX_COMPONENTS:
        raise SizeError(f"m={model.m} exceeds the enumeration cap of {MAX_COMPONENTS}")
    return conditionally_independent_joint(model.class_conditionals(), [0.5, 0.5])


# --------------------------------------------------------------------------
# text format


def write_joint(joint: ExactJoint, path) -> None:
    lines = [f"# m={joint.m} labels={joint.n_labels}"]
    flat = joint.flat()
    for r in range(flat.shape[0]):
        bits = "".join(str((r >> i) & 1) for i in range(joint.m))
        for y in range(joint.n_labels):
            if flat[r, y] > 0:
                lines.append(f"{bits} {y} {float(flat[r, y])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_joint(path, n_labels: int | None = None) -> ExactJoint:
    entries, m, k_header = [], None, None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("labels="):
                    k_header = int(tok.split("=", 1)[1])
            continue
        parts = line.split()
        if len(parts) != 3 or set(parts[0]) - {"0", "1"}:
            raise FormatError(f"{path}:{lineno}: expected '<bits> <label> <prob>'")
        if m is None:
            m = len(parts[0])
        elif len(parts[0]) != m:
            raise FormatError(f"{path}:{lineno}: bit string length differs")
        try:
            entries.append((parts[0], int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    if m is None:
        raise FormatError(f"{path}: no entries")
    k = n_labels or k_header or max(e[1] for e in entries) + 1
    table = np.zeros((2,) * m + (max(k, 2),))
    for bits, y, p in entries:
        table[tuple(int(c) for c in bits) + (y,)] += p
    return ExactJoint(table, tol=1e-9)

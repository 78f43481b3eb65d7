"""Monte Carlo estimation of information profiles on sampled representations.

The profile value ``f(n)`` is the average, over components ``i`` and
size-``n`` conditioning subsets ``I`` not containing ``i``, of
``I(B_i; Y | I) = H(B_i | I) - H(B_i | I, Y)``. Each conditional entropy is
averaged over a set Gamma of draws ``(b_I, y)``; the Bernoulli parameter
``P(B_i = 1 | b_I [, y])`` needed for every draw is obtained by importance
weighting the dataset rows with ``P(I = b_I | x)`` (the representation is
factorized given ``x``).

Random streams are keyed by ``(seed, n, i)`` so results do not depend on the
order in which (component, n) blocks are evaluated.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations, product
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .bitdata import LabeledBitDataset, LabelSpace, component_subset
from .exceptions import DegenerateConditioningError, DomainError
from .oracle import binary_entropy

# log(0) stand-in: any row collecting one of these is treated as impossible
_IMPOSSIBLE = -1.0e6
_MAX_ENUM_BITS = 16

CSV_COLUMNS = ("n", "f_hat", "stderr", "F_hat", "C_hat", "views", "D_hat",
               "D_norm", "d_term", "samples", "degenerate")


@dataclass
class EstimatorConfig:
    gamma_size: int = 32
    subset_samples: int = 100
    stop_threshold: Optional[float] = 0.001
    n_max: int = 100
    conditional_subsample: Optional[int] = 1000
    rng_seed: int = 0
    mode: str = "sample"
    max_batch_elements: int = 8_000_000

    def __post_init__(self):
        if self.gamma_size < 1:
            raise ValueError("gamma_size must be >= 1")
        if self.subset_samples < 1:
            raise ValueError("subset_samples must be >= 1")
        if self.stop_threshold is not None and self.stop_threshold < 0:
            raise ValueError("stop_threshold must be >= 0")
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.conditional_subsample is not None and self.conditional_subsample < 1:
            raise ValueError("conditional_subsample must be >= 1 or None")
        if self.mode not in ("sample", "enumerate"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class InformationProfile:
    """Per-n profile estimates plus the derived cumulative curves.

    ``d_term[n]`` is the average of ``H(B_i|Y) - H(B_i|I,Y)`` over the same
    draws that produced ``f_hat[n]``; ``D_hat`` accumulates it from n = 1.
    """

    m: int
    f_hat: np.ndarray
    stderr: np.ndarray
    d_term: np.ndarray
    samples: np.ndarray
    degenerate: np.ndarray
    termination: str
    config: dict = field(default_factory=dict)
    F_hat: np.ndarray = field(init=False)
    C_hat: np.ndarray = field(init=False)
    D_hat: np.ndarray = field(init=False)

    def __post_init__(self):
        self.f_hat = np.asarray(self.f_hat, dtype=np.float64)
        self.stderr = np.asarray(self.stderr, dtype=np.float64)
        self.d_term = np.asarray(self.d_term, dtype=np.float64)
        self.samples = np.asarray(self.samples, dtype=np.int64)
        self.degenerate = np.asarray(self.degenerate, dtype=np.float64)
        f = self.f_hat
        F = np.zeros(f.size + 1)
        C = np.zeros(f.size)
        D = np.zeros(f.size)
        for n in range(1, f.size + 1):
            F[n] = F[n - 1] + f[n - 1]
        for n in range(1, f.size):
            C[n] = C[n - 1] + (f[n] - f[0])
            D[n] = D[n - 1] + self.d_term[n]
        self.F_hat, self.C_hat, self.D_hat = F, C, D

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.f_hat.size)

    @property
    def views(self) -> np.ndarray:
        """m / n, the count of disjoint size-n views (NaN at n = 0)."""
        with np.errstate(divide="ignore"):
            v = self.m / self.n.astype(float)
        v[0] = np.nan
        return v

    @property
    def D_norm(self) -> np.ndarray:
        """Estimate of the subset-average normalized total correlation D_B(n).

        Averaging over a random ordering of a size-n subset gives
        D_B(n) = D_hat(n-1) / n.
        """
        out = np.full(self.f_hat.size, np.nan)
        for n in range(1, self.f_hat.size):
            out[n] = self.D_hat[n - 1] / n
        return out

    def to_rows(self) -> list:
        rows = []
        views, dn = self.views, self.D_norm
        for n in range(self.f_hat.size):
            rows.append({
                "n": n, "f_hat": self.f_hat[n], "stderr": self.stderr[n],
                "F_hat": self.F_hat[n], "C_hat": self.C_hat[n], "views": views[n],
                "D_hat": self.D_hat[n], "D_norm": dn[n], "d_term": self.d_term[n],
                "samples": int(self.samples[n]), "degenerate": self.degenerate[n],
            })
        return rows

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.to_rows():
            writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                             for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, m: Optional[int] = None, termination: str = "unknown",
                 config: Optional[dict] = None) -> "InformationProfile":
        """Parse a profile CSV; ``m`` is recovered from the views column if omitted."""
        if isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if m is None:
            m = int(round(float(rows[1]["views"]))) if len(rows) > 1 else 0
        return cls(m=m,
                   f_hat=[float(r["f_hat"]) for r in rows],
                   stderr=[float(r["stderr"]) for r in rows],
                   d_term=[float(r["d_term"]) for r in rows],
                   samples=[int(r["samples"]) for r in rows],
                   degenerate=[float(r["degenerate"]) for r in rows],
                   termination=termination, config=config or {})

    def to_json(self, path=None) -> str:
        payload = {"m": self.m, "termination": self.termination, "config": self.config,
                   "rows": [{k: (None if isinstance(v, float) and math.isnan(v) else v)
                             for k, v in row.items()} for row in self.to_rows()]}
        text = json.dumps(payload, indent=2, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, source) -> "InformationProfile":
        if isinstance(source, str) and source.lstrip().startswith("{"):
            payload = json.loads(source)
        else:
            with open(source) as fh:
                payload = json.load(fh)
        rows = payload["rows"]
        return cls(m=payload["m"], f_hat=[r["f_hat"] for r in rows],
                   stderr=[r["stderr"] for r in rows], d_term=[r["d_term"] for r in rows],
                   samples=[r["samples"] for r in rows],
                   degenerate=[r["degenerate"] for r in rows],
                   termination=payload["termination"], config=payload["config"])

    def at_F(self, target: float, column: str) -> float:
        """Linear interpolation of ``column`` (e.g. 'D_hat') at F_hat = target.

        Uses rows n >= 1 up to the first crossing; NaN if F_hat never
        reaches ``target``.
        """
        F = self.F_hat[: self.f_hat.size]
        ys = getattr(self, column)
        for n in range(1, F.size):
            if F[n] >= target:
                lo = n - 1 if n > 1 else n
                if F[n] == F[lo]:
                    return float(ys[n])
                t = (target - F[lo]) / (F[n] - F[lo])
                return float(ys[lo] + t * (ys[n] - ys[lo]))
        return float("nan")

    def first_n_reaching(self, target: float) -> Optional[int]:
        hits = np.flatnonzero(self.F_hat >= target)
        return int(hits[0]) if hits.size else None


# --------------------------------------------------------------------------
# sampling primitives


def _stream(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _draw_subsets(m: int, i: int, n: int, count: int, rng) -> np.ndarray:
    if n > m - 1:
        raise ValueError(f"cannot draw {n} components from the {m - 1} others")
    if n == 0:
        return np.zeros((count, 0), dtype=np.int64)
    keys = rng.random((count, m - 1))
    picks = np.sort(np.argpartition(keys, n - 1, axis=1)[:, :n], axis=1)
    return picks + (picks >= i)


def sample_subset(i: int, n: int, rng, m: int) -> np.ndarray:
    """Uniform size-``n`` subset of ``{0..m-1} \\ {i}``, sorted."""
    if not 0 <= i < m:
        raise IndexError(f"component {i} out of range for m={m}")
    rng = np.random.default_rng(rng)
    return _draw_subsets(m, i, n, 1, rng)[0]


def _probabilities(dataset: LabeledBitDataset, representation) -> np.ndarray:
    if representation is None:
        return np.asarray(dataset.features, dtype=np.float64)
    probs = np.asarray(representation.transform(dataset.features), dtype=np.float64)
    if probs.shape[0] != dataset.num_samples:
        raise DomainError("representation changed the number of samples")
    return probs


def represent(dataset: LabeledBitDataset, representation) -> LabeledBitDataset:
    """Dataset whose features are the representation's component probabilities."""
    if representation is None:
        return dataset
    return dataset.with_features(np.clip(_probabilities(dataset, representation), 0.0, 1.0))


def _draw_gamma(probs, weights, cols, count, rng, uniform_rows: bool):
    n_rows = probs.shape[0]
    rows = rng.integers(0, n_rows, count) if uniform_rows else rng.choice(n_rows, count, p=weights)
    u = rng.random((count, len(cols)))
    bits = (u < probs[rows][:, cols]).astype(np.float64)
    return rows, bits


def sample_gamma(dataset: LabeledBitDataset, representation, subset, count: int, rng):
    """Draw ``count`` i.i.d. pairs ``(b_I, y)`` from P(I, Y).

    Returns ``(bits, labels)`` with ``bits`` of shape ``(count, |I|)``.
    """
    rng = np.random.default_rng(rng)
    probs = _probabilities(dataset, representation)
    cols = component_subset(subset, probs.shape[1])
    rows, bits = _draw_gamma(probs, dataset.weights(), cols, count, rng,
                             dataset.sample_weight is None)
    return bits.astype(np.uint8), dataset.labels[rows]


# --------------------------------------------------------------------------
# conditioning pool and the batched kernel


class _Pool:
    """Rows used for importance-weighted conditionals, grouped by label."""

    def __init__(self, probs, labels, weights, n_labels):
        order = np.argsort(labels, kind="stable")
        probs, labels, weights = probs[order], labels[order], weights[order]
        self.n_labels = n_labels
        self.bounds = np.searchsorted(labels, np.arange(n_labels + 1))
        self.labels = labels
        self.weights = weights
        self.probs_T = np.ascontiguousarray(probs.T)
        with np.errstate(divide="ignore"):
            l1 = np.log(self.probs_T)
            l0 = np.log1p(-self.probs_T)
        self.log1_T = np.where(self.probs_T > 0, l1, _IMPOSSIBLE)
        self.log0_T = np.where(self.probs_T < 1, l0, _IMPOSSIBLE)
        self.logw = np.log(weights)
        # P(B_i = 1 | y) with no conditioning, shape (K, m)
        self.class_mean = np.zeros((n_labels, probs.shape[1]))
        for y in range(n_labels):
            lo, hi = self.bounds[y], self.bounds[y + 1]
            if hi > lo:
                w = weights[lo:hi]
                self.class_mean[y] = w @ probs[lo:hi] / w.sum()

    @property
    def size(self) -> int:
        return self.weights.size

    @classmethod
    def build(cls, probs, labels, weights, n_labels, per_label: Optional[int], rng,
              dedupe: bool = True):
        weights = np.asarray(weights, dtype=np.float64)
        if per_label is not None:
            keep, new_w = [], []
            for y in range(n_labels):
                rows = np.flatnonzero(labels == y)
                if rows.size == 0:
                    continue
                mass = weights[rows].sum()
                if rows.size > per_label:
                    rows = np.sort(rng.choice(rows, per_label, replace=False))
                w = weights[rows]
                keep.append(rows)
                new_w.append(w * (mass / w.sum()))
            rows = np.concatenate(keep)
            probs, labels, weights = probs[rows], labels[rows], np.concatenate(new_w)
        if dedupe:
            key = np.concatenate([probs, labels[:, None].astype(np.float64)], axis=1)
            uniq, inverse = np.unique(key, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            weights = np.bincount(inverse, weights=weights, minlength=uniq.shape[0])
            probs, labels = uniq[:, :-1], uniq[:, -1].astype(np.int64)
            nz = weights > 0
            probs, labels, weights = probs[nz], labels[nz], weights[nz]
        return cls(probs, labels, weights, n_labels)


def _conditionals(pool: _Pool, targets, subsets, bits, gamma_labels):
    """Posterior P(B_i=1 | b) and P(B_i=1 | b, y) for a batch of pairs.

    ``targets`` (P,), ``subsets`` (P, n), ``bits`` (P, G, n),
    ``gamma_labels`` (P, G). Returns ``(p_marg, p_cond, degenerate)`` with
    shape (P, G); degenerate entries have NaN probabilities.
    """
    P, G = gamma_labels.shape
    n = subsets.shape[1]
    if n:
        A1 = pool.log1_T[subsets]          # (P, n, R)
        A0 = pool.log0_T[subsets]
        logw = np.matmul(bits, A1 - A0) + A0.sum(axis=1)[:, None, :]
        logw[logw < 0.5 * _IMPOSSIBLE] = -np.inf
        logw += pool.logw
    else:
        logw = np.broadcast_to(pool.logw, (P, G, pool.size)).copy()
    q = pool.probs_T[targets]              # (P, R)

    K = pool.n_labels
    seg_max = np.full((K, P, G), -np.inf)
    seg_w = np.zeros((K, P, G))
    seg_num = np.zeros((K, P, G))
    for y in range(K):
        lo, hi = pool.bounds[y], pool.bounds[y + 1]
        if hi == lo:
            continue
        block = logw[:, :, lo:hi]
        mx = block.max(axis=2)
        finite = np.isfinite(mx)
        safe = np.where(finite, mx, 0.0)
        w = np.exp(block - safe[:, :, None])
        seg_max[y] = mx
        seg_w[y] = np.where(finite, w.sum(axis=2), 0.0)
        seg_num[y] = np.where(finite, np.einsum("pgr,pr->pg", w, q[:, lo:hi]), 0.0)

    top = seg_max.max(axis=0)
    ok_all = np.isfinite(top)
    scale = np.exp(seg_max - np.where(ok_all, top, 0.0)[None])
    scale[~np.isfinite(seg_max)] = 0.0
    den = (seg_w * scale).sum(axis=0)
    num = (seg_num * scale).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p_marg = np.where(ok_all & (den > 0), num / den, np.nan)
        wy = np.take_along_axis(seg_w, gamma_labels[None], axis=0)[0]
        ny = np.take_along_axis(seg_num, gamma_labels[None], axis=0)[0]
        p_cond = np.where(wy > 0, ny / wy, np.nan)
    degenerate = np.isnan(p_marg) | np.isnan(p_cond)
    return np.clip(p_marg, 0.0, 1.0), np.clip(p_cond, 0.0, 1.0), degenerate


def _pair_terms(pool, targets, subsets, bits, gamma_labels, gamma_w):
    """Per-pair (I_hat, d_term, degenerate count) from weighted Gamma draws."""
    p_marg, p_cond, deg = _conditionals(pool, targets, subsets, bits, gamma_labels)
    h_marg = np.where(deg, 0.0, binary_entropy(np.nan_to_num(p_marg)))
    h_cond = np.where(deg, 0.0, binary_entropy(np.nan_to_num(p_cond)))
    h_y = binary_entropy(pool.class_mean[gamma_labels, targets[:, None]])
    i_hat = ((h_marg - h_cond) * gamma_w).sum(axis=1)
    d_term = ((h_y - h_cond) * gamma_w).sum(axis=1)
    return i_hat, d_term, (deg * (gamma_w > 0)).sum(axis=1)


def estimate_conditional(dataset: LabeledBitDataset, representation, i: int, subset, b,
                         y: Optional[int] = None, conditional_subsample: Optional[int] = None,
                         rng=0) -> float:
    """Importance-weighted P(B_i = 1 | I = b [, Y = y]).

    Raises :class:`DegenerateConditioningError` when no row of the pool has
    positive weight for ``b``.
    """
    probs = _probabilities(dataset, representation)
    cols = component_subset(subset, probs.shape[1])
    if i in set(cols.tolist()):
        raise ValueError(f"component {i} is part of the conditioning subset")
    b = np.asarray(b, dtype=np.float64).reshape(1, 1, -1)
    if b.shape[2] != cols.size:
        raise ValueError("bit vector length differs from subset size")
    pool = _Pool.build(probs, dataset.labels, dataset.weights(), dataset.n_labels,
                       conditional_subsample, np.random.default_rng(rng))
    lab = np.array([[0 if y is None else int(y)]])
    p_marg, p_cond, _ = _conditionals(pool, np.array([i]), cols[None, :], b, lab)
    value = p_marg[0, 0] if y is None else p_cond[0, 0]
    if np.isnan(value):
        raise DegenerateConditioningError(
            f"all importance weights vanish for component {i} given {b.ravel().tolist()}")
    return float(value)


# --------------------------------------------------------------------------
# profile estimation


def _enumerated_gamma(probs, labels, weights, cols):
    """Every (b_I, y) with its exact probability under the weighted dataset."""
    n = cols.size
    if n > _MAX_ENUM_BITS:
        raise ValueError(f"cannot enumerate 2^{n} patterns")
    patterns = np.array(list(product((0.0, 1.0), repeat=n))).reshape(2 ** n, n)
    sub = probs[:, cols]                                        # (N, n)
    pat_p = np.where(patterns[None] > 0, sub[:, None, :], 1.0 - sub[:, None, :]).prod(axis=2)
    mass = weights[:, None] * pat_p                             # (N, 2^n)
    rows, pats = np.nonzero(mass > 0)
    key = pats * (labels.max() + 1) + labels[rows]
    uniq, inverse = np.unique(key, return_inverse=True)
    w = np.bincount(inverse.reshape(-1), weights=mass[rows, pats])
    k = labels.max() + 1
    return patterns[uniq // k], (uniq % k).astype(np.int64), w


def _profile_row_enumerate(probs, labels, weights, pool, n, max_elements):
    """Exact f(n): every (i, I) pair, every (b_I, y) cell weighted by its mass."""
    m = probs.shape[1]
    if n > _MAX_ENUM_BITS:
        raise ValueError(f"cannot enumerate 2^{n} patterns")
    K = pool.n_labels
    pairs = [(i, s) for i in range(m) for s in combinations([j for j in range(m) if j != i], n)]
    targets = np.array([i for i, _ in pairs], dtype=np.int64)
    subsets = np.array([s for _, s in pairs], dtype=np.int64).reshape(len(pairs), n)
    patterns = np.array(list(product((0.0, 1.0), repeat=n))).reshape(2 ** n, n)
    G = K * 2 ** n
    # cell g = y * 2^n + pattern
    g_bits = np.tile(patterns, (K, 1))
    g_lab = np.repeat(np.arange(K), 2 ** n)
    onehot = np.zeros((labels.size, K))
    onehot[np.arange(labels.size), labels] = weights
    i_sum = d_sum = deg = 0.0
    count = 0
    chunk = max(1, max_elements // max(1, G * pool.size * max(n, 1)))
    for start in range(0, len(pairs), chunk):
        t, sub = targets[start:start + chunk], subsets[start:start + chunk]
        P = t.size
        x = probs[:, sub].transpose(1, 0, 2)                     # (P, N, n)
        pat_p = np.where(patterns[None, None] > 0, x[:, :, None, :],
                         1.0 - x[:, :, None, :]).prod(axis=3)    # (P, N, 2^n)
        mass = np.einsum("pnq,nk->pkq", pat_p, onehot).reshape(P, G)
        i_hat, d_term, d = _pair_terms(pool, t, sub, np.broadcast_to(g_bits, (P, G, n)),
                                       np.broadcast_to(g_lab, (P, G)), mass)
        i_sum += i_hat.sum()
        d_sum += d_term.sum()
        deg += d.sum()
        count += int((mass > 0).sum())
    total = len(pairs)
    return i_sum / total, 0.0, d_sum / total, count, deg / max(count, 1)


def _profile_row_sample(probs, labels, weights, uniform_rows, pool, n, cfg):
    m = probs.shape[1]
    S, G = cfg.subset_samples, cfg.gamma_size
    vals = np.zeros((m, S))
    dvals = np.zeros((m, S))
    deg = 0
    per_pair = max(1, G * pool.size * max(n, 1))
    chunk = max(1, min(m, cfg.max_batch_elements // (per_pair * S) or 1))
    for start in range(0, m, chunk):
        ids = range(start, min(m, start + chunk))
        subs, bits, labs = [], [], []
        for i in ids:
            rng = _stream(cfg.rng_seed, n, i)
            s = _draw_subsets(m, i, n, S, rng)
            if uniform_rows:
                rows = rng.integers(0, probs.shape[0], (S, G))
            else:
                rows = rng.choice(probs.shape[0], (S, G), p=weights)
            u = rng.random((S, G, n))
            picked = probs[rows[:, :, None], s[:, None, :]]      # (S, G, n)
            subs.append(s)
            bits.append((u < picked).astype(np.float64))
            labs.append(labels[rows])
        targets = np.repeat(np.fromiter(ids, dtype=np.int64), S)
        subs = np.concatenate(subs)
        bits = np.concatenate(bits)
        labs = np.concatenate(labs)
        gw = np.full(labs.shape, 1.0 / G)
        i_hat, d_term, d = _pair_terms(pool, targets, subs, bits, labs, gw)
        vals[start:start + len(ids)] = i_hat.reshape(-1, S)
        dvals[start:start + len(ids)] = d_term.reshape(-1, S)
        deg += int(d.sum())
    if S > 1:
        se = math.sqrt((vals.std(axis=1, ddof=1) ** 2 / S).sum()) / m
    else:
        se = float("nan")
    total = m * S * G
    return vals.mean(), se, dvals.mean(), total, deg / total


def estimate_profile(dataset: LabeledBitDataset, representation=None,
                     config: Optional[EstimatorConfig] = None) -> InformationProfile:
    """Estimate f(n) for n = 0, 1, ... until the stop rule or ``n_max``."""
    cfg = config or EstimatorConfig()
    probs = _probabilities(dataset, representation)
    if probs.ndim != 2 or not np.all((probs >= 0) & (probs <= 1)):
        raise DomainError("representation must output probabilities in [0, 1]")
    m = probs.shape[1]
    labels = dataset.labels
    weights = dataset.weights()
    n_last = min(cfg.n_max, m - 1)

    if cfg.mode == "sample":
        pool = _Pool.build(probs, labels, weights, dataset.n_labels,
                           cfg.conditional_subsample, _stream(cfg.rng_seed, 1 << 30))
    else:
        pool = _Pool.build(probs, labels, weights, dataset.n_labels, None, None)

    f, se, dt, ns, dg = [], [], [], [], []
    termination = "exhausted" if n_last == m - 1 else "n_max"
    for n in range(n_last + 1):
        if cfg.mode == "enumerate":
            row = _profile_row_enumerate(probs, labels, weights, pool, n,
                                         cfg.max_batch_elements)
        else:
            row = _profile_row_sample(probs, labels, weights, dataset.sample_weight is None,
                                      pool, n, cfg)
        for lst, v in zip((f, se, dt, ns, dg), row):
            lst.append(v)
        if cfg.stop_threshold is not None and row[0] < cfg.stop_threshold:
            termination = "threshold"
            break
    return InformationProfile(m=m, f_hat=f, stderr=se, d_term=dt, samples=ns,
                              degenerate=dg, termination=termination,
                              config=cfg.to_dict())


def estimate_D(dataset: LabeledBitDataset, representation, n: int,
               config: Optional[EstimatorConfig] = None) -> float:
    """D-hat(n): cumulative average of H(B_i|Y) - H(B_i|I,Y) over sizes 1..n."""
    if n < 1:
        raise ValueError("D-hat needs n >= 1")
    cfg = config or EstimatorConfig()
    run = EstimatorConfig(**{**cfg.to_dict(), "n_max": n, "stop_threshold": None})
    prof = estimate_profile(dataset, representation, run)
    if prof.f_hat.size <= n:
        raise ValueError(f"representation has too few components for n={n}")
    return float(prof.D_hat[n])


def estimate_total_correlation(dataset: LabeledBitDataset, representation, subset,
                               config: Optional[EstimatorConfig] = None) -> float:
    """d-hat(I): per-component conditional total correlation of one subset.

    Uses the chain rule in index order, so the estimate is the mean over
    ``k`` of ``H(B_k|Y) - H(B_k|B_<k, Y)``; exact in ``mode="enumerate"``.
    """
    cfg = config or EstimatorConfig()
    probs = _probabilities(dataset, representation)
    cols = component_subset(subset, probs.shape[1])
    if cols.size == 0:
        raise ValueError("d-hat needs a non-empty subset")
    labels, weights = dataset.labels, dataset.weights()
    if cfg.mode == "sample":
        pool = _Pool.build(probs, labels, weights, dataset.n_labels,
                           cfg.conditional_subsample, _stream(cfg.rng_seed, 1 << 30))
    total = 0.0
    for k in range(1, cols.size):
        target, given = cols[k], cols[:k]
        if cfg.mode == "enumerate":
            keep = cols[: k + 1]
            sub = np.zeros_like(probs)
            sub[:, keep] = probs[:, keep]
            pool = _Pool.build(sub, labels, weights, dataset.n_labels, None, None)
            g_bits, g_lab, g_w = _enumerated_gamma(probs, labels, weights, given)
        else:
            rng = _stream(cfg.rng_seed, 1 << 31, k)
            rows, g_bits = _draw_gamma(probs, weights, given, cfg.gamma_size, rng,
                                       dataset.sample_weight is None)
            g_lab = labels[rows]
            g_w = np.full(cfg.gamma_size, 1.0 / cfg.gamma_size)
        _, d_term, _ = _pair_terms(pool, np.array([target]), given[None, :],
                                   g_bits[None], g_lab[None], g_w[None])
        total += float(d_term[0])
    return total / cols.size


class ProfileEstimator(BaseEstimator):
    """Estimator-style wrapper: ``fit(X, y)`` stores ``profile_``.

    ``X`` holds component probabilities (or raw inputs when a
    ``representation`` with ``transform`` is given).
    """

    def __init__(self, representation=None, gamma_size=32, subset_samples=100,
                 stop_threshold=0.001, n_max=100, conditional_subsample=1000,
                 mode="sample", random_state=0):
        self.representation = representation
        self.gamma_size = gamma_size
        self.subset_samples = subset_samples
        self.stop_threshold = stop_threshold
        self.n_max = n_max
        self.conditional_subsample = conditional_subsample
        self.mode = mode
        self.random_state = random_state

    def _config(self) -> EstimatorConfig:
        return EstimatorConfig(gamma_size=self.gamma_size, subset_samples=self.subset_samples,
                               stop_threshold=self.stop_threshold, n_max=self.n_max,
                               conditional_subsample=self.conditional_subsample,
                               rng_seed=int(self.random_state), mode=self.mode)

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        ds = LabeledBitDataset(X, y_idx, LabelSpace(max(2, self.classes_.size)), sample_weight)
        self.profile_ = estimate_profile(ds, self.representation, self._config())
        self.n_features_in_ = X.shape[1]
        return self

    def score(self, X=None, y=None) -> float:
        """Highest cumulative information reached, in bits."""
        check_is_fitted(self, "profile_")
        return float(self.profile_.F_hat.max())


def config_from_dict(d: dict) -> EstimatorConfig:
    names = {f.name for f in fields(EstimatorConfig)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown estimator settings: {sorted(unknown)}")
    return EstimatorConfig(**d)

"""Binary representation datasets and MNIST ingestion.

A :class:`LabeledBitDataset` stores, for every sample, the Bernoulli
parameters of ``m`` binary components together with a discrete label.
Exact bit vectors are the special case where every entry is 0 or 1.

Native cache layout (little-endian, version 1)::

    offset  size      field
    0       4         magic b"IVDS"
    4       2         version (uint16) = 1
    6       2         flags (uint16): bit 0 = sample weights present
    8       4         m, number of components (uint32)
    12      4         N, number of samples (uint32)
    16      4         K, label cardinality (uint32)
    20      4*N*m     probabilities, float32, row-major
    ...     4*N       labels, int32
    ...     8*N       sample weights, float64 (only if flag bit 0)
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import ConsistencyError, DomainError, FormatError

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049

_CACHE_MAGIC = b"IVDS"
_CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sHHIII")
_FLAG_WEIGHTS = 1


@dataclass(frozen=True)
class LabelSpace:
    cardinality: int
    names: Optional[tuple] = None

    def __post_init__(self):
        if self.cardinality < 2:
            raise DomainError(f"label cardinality must be >= 2, got {self.cardinality}")
        if self.names is not None and len(self.names) != self.cardinality:
            raise DomainError("number of label names differs from cardinality")


def component_subset(indices, m: Optional[int] = None) -> np.ndarray:
    """Validate component indices and return them as a sorted int array.

    Duplicates and (when ``m`` is given) out-of-range indices raise
    ``IndexError``/``ValueError``. An empty subset is valid.
    """
    arr = np.asarray(indices, dtype=np.int64).reshape(-1)
    arr = np.sort(arr)
    if arr.size and np.any(np.diff(arr) == 0):
        raise ValueError(f"duplicate component indices in {list(indices)}")
    if arr.size and arr[0] < 0:
        raise IndexError(f"negative component index {arr[0]}")
    if m is not None and arr.size and arr[-1] >= m:
        raise IndexError(f"component index {arr[-1]} out of range for m={m}")
    return arr


@dataclass(frozen=True, eq=False)
class LabeledBitDataset:
    """Immutable collection of (component probabilities, label) samples.

    ``sample_weight`` is optional; when present the rows describe a weighted
    empirical distribution (used to back a dataset with an exact joint).
    """

    features: np.ndarray
    labels: np.ndarray
    label_space: LabelSpace
    sample_weight: Optional[np.ndarray] = None
    _packed: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float32, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if feats.ndim != 2:
            raise DomainError("features must be a 2-d array (samples x components)")
        if feats.shape[0] == 0:
            raise DomainError("dataset has no samples")
        if feats.shape[1] == 0:
            raise DomainError("dataset has no components")
        if labels.shape[0] != feats.shape[0]:
            raise ConsistencyError(
                f"{feats.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if not np.all(np.isfinite(feats)) or feats.min() < 0.0 or feats.max() > 1.0:
            raise DomainError("feature probabilities must lie in [0, 1]")
        if labels.min() < 0 or labels.max() >= self.label_space.cardinality:
            raise DomainError(
                f"labels must lie in [0, {self.label_space.cardinality})"
            )
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        if self.sample_weight is not None:
            w = np.array(self.sample_weight, dtype=np.float64, copy=True).reshape(-1)
            if w.shape[0] != feats.shape[0]:
                raise ConsistencyError("sample_weight length differs from sample count")
            if np.any(w < 0) or not np.isfinite(w).all() or w.sum() <= 0:
                raise DomainError("sample weights must be finite, >= 0 and not all zero")
            w.setflags(write=False)
            object.__setattr__(self, "sample_weight", w)

    @classmethod
    def from_arrays(cls, features, labels, n_labels: Optional[int] = None,
                    sample_weight=None, label_names=None) -> "LabeledBitDataset":
        labels = np.asarray(labels)
        if n_labels is None:
            n_labels = max(int(labels.max()) + 1, 2) if labels.size else 2
        names = tuple(label_names) if label_names is not None else None
        return cls(features, labels, LabelSpace(n_labels, names), sample_weight)

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def n_labels(self) -> int:
        return self.label_space.cardinality

    @property
    def is_binary(self) -> bool:
        if "binary" not in self._packed:
            f = self.features
            self._packed["binary"] = bool(np.all((f == 0.0) | (f == 1.0)))
        return self._packed["binary"]

    def weights(self) -> np.ndarray:
        """Normalized per-sample weights (uniform when none were given)."""
        if self.sample_weight is None:
            return np.full(self.num_samples, 1.0 / self.num_samples)
        return self.sample_weight / self.sample_weight.sum()

    def packed_bits(self) -> np.ndarray:
        """Bit-packed copy of exact-bit features (rows padded to bytes)."""
        if not self.is_binary:
            raise DomainError("packed representation needs exact 0/1 features")
        if "bits" not in self._packed:
            self._packed["bits"] = np.packbits(self.features.astype(np.uint8), axis=1)
        return self._packed["bits"]

    def subset_popcount(self, subset) -> np.ndarray:
        """Number of ones each sample has on ``subset`` (exact-bit datasets)."""
        idx = component_subset(subset, self.m)
        bits = np.unpackbits(self.packed_bits(), axis=1, count=self.m)
        return bits[:, idx].sum(axis=1)

    def label_entropy(self) -> float:
        """Empirical entropy of the labels in bits."""
        counts = np.bincount(self.labels, weights=self.weights(),
                             minlength=self.n_labels)
        p = counts[counts > 0]
        p = p / p.sum()
        return float(-(p * np.log2(p)).sum())

    def with_features(self, features) -> "LabeledBitDataset":
        return LabeledBitDataset(features, self.labels, self.label_space,
                                 self.sample_weight)

    def take(self, rows) -> "LabeledBitDataset":
        rows = np.asarray(rows)
        w = None if self.sample_weight is None else self.sample_weight[rows]
        return LabeledBitDataset(self.features[rows], self.labels[rows],
                                 self.label_space, w)


# --------------------------------------------------------------------------
# IDX ingestion


def _open_maybe_gzip(path):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Read an unsigned-byte IDX file (optionally gzipped) into an array."""
    with _open_maybe_gzip(path) as fh:
        header = fh.read(4)
        if len(header) < 4:
            raise FormatError(f"{path}: truncated IDX header")
        magic = struct.unpack(">I", header)[0]
        zero, dtype_code, ndim = magic >> 16, (magic >> 8) & 0xFF, magic & 0xFF
        if zero != 0 or dtype_code != 0x08 or ndim == 0:
            raise FormatError(f"{path}: bad IDX magic number {magic}")
        dims_raw = fh.read(4 * ndim)
        if len(dims_raw) < 4 * ndim:
            raise FormatError(f"{path}: truncated IDX dimensions")
        dims = struct.unpack(f">{ndim}I", dims_raw)
        payload = fh.read()
    expected = int(np.prod(dims))
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} data bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def write_idx(path, array, compress: Optional[bool] = None) -> None:
    """Write a uint8 array as IDX; gzip when the path ends with ``.gz``."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    magic = (0x08 << 8) | arr.ndim
    blob = struct.pack(">I", magic) + struct.pack(f">{arr.ndim}I", *arr.shape) + arr.tobytes()
    path = Path(path)
    if compress is None:
        compress = path.suffix == ".gz"
    # mtime=0 keeps gzip output byte-reproducible
    with open(path, "wb") as raw:
        if compress:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
                fh.write(blob)
        else:
            raw.write(blob)


def load_idx(image_path, label_path) -> LabeledBitDataset:
    """Load MNIST-style IDX image/label files.

    Pixel bytes become probabilities ``v / 255``; digit labels are kept.
    """
    images = read_idx(image_path)
    labels = read_idx(label_path)
    with _open_maybe_gzip(image_path) as fh:
        img_magic = struct.unpack(">I", fh.read(4))[0]
    with _open_maybe_gzip(label_path) as fh:
        lab_magic = struct.unpack(">I", fh.read(4))[0]
    if img_magic != IDX_IMAGES_MAGIC:
        raise FormatError(f"{image_path}: image magic {img_magic}, expected {IDX_IMAGES_MAGIC}")
    if lab_magic != IDX_LABELS_MAGIC:
        raise FormatError(f"{label_path}: label magic {lab_magic}, expected {IDX_LABELS_MAGIC}")
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    feats = images.reshape(images.shape[0], -1).astype(np.float32) / np.float32(255.0)
    return LabeledBitDataset(feats, labels.astype(np.int64),
                             LabelSpace(10, tuple(str(d) for d in range(10))))


def to_parity_labels(dataset: LabeledBitDataset) -> LabeledBitDataset:
    """Relabel digits by parity: even -> 0, odd -> 1."""
    if dataset.n_labels != 10:
        raise DomainError(
            f"parity grouping needs digit labels (cardinality 10), got {dataset.n_labels}"
        )
    if dataset.labels.max() >= 10:
        raise DomainError("digit labels must be < 10")
    return LabeledBitDataset(dataset.features, dataset.labels % 2,
                             LabelSpace(2, ("even", "odd")), dataset.sample_weight)


def sample_bits(dataset: LabeledBitDataset, subset, sample_index: int,
                rng_seed) -> np.ndarray:
    """Draw the bits of ``subset`` for one sample, independently per component."""
    idx = component_subset(subset, dataset.m)
    if not 0 <= sample_index < dataset.num_samples:
        raise IndexError(f"sample index {sample_index} out of range")
    rng = np.random.default_rng(rng_seed)
    p = dataset.features[sample_index, idx]
    return (rng.random(idx.size) < p).astype(np.uint8)


# --------------------------------------------------------------------------
# native cache


def save_cache(dataset: LabeledBitDataset, path) -> None:
    flags = _FLAG_WEIGHTS if dataset.sample_weight is not None else 0
    header = _CACHE_HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION, flags, dataset.m,
                                dataset.num_samples, dataset.n_labels)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dataset.features.astype("<f4").tobytes())
        fh.write(dataset.labels.astype("<i4").tobytes())
        if dataset.sample_weight is not None:
            fh.write(dataset.sample_weight.astype("<f8").tobytes())


def load_cache(path) -> LabeledBitDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CACHE_HEADER.size:
        raise FormatError(f"{path}: truncated cache header")
    magic, version, flags, m, n, k = _CACHE_HEADER.unpack_from(raw)
    if magic != _CACHE_MAGIC:
        raise FormatError(f"{path}: not a dataset cache file")
    if version != _CACHE_VERSION:
        raise FormatError(f"{path}: unsupported cache version {version}")
    off = _CACHE_HEADER.size
    need = 4 * n * m + 4 * n + (8 * n if flags & _FLAG_WEIGHTS else 0)
    if len(raw) - off != need:
        raise FormatError(f"{path}: payload size mismatch")
    feats = np.frombuffer(raw, dtype="<f4", count=n * m, offset=off).reshape(n, m)
    off += 4 * n * m
    labels = np.frombuffer(raw, dtype="<i4", count=n, offset=off)
    off += 4 * n
    weights = None
    if flags & _FLAG_WEIGHTS:
        weights = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
    return LabeledBitDataset(feats, labels, LabelSpace(int(k)), weights)


def stratified_split(dataset: LabeledBitDataset, test_fraction: float,
                     seed) -> tuple:
    """Seeded per-label split into (train, test) datasets."""
    rng = np.random.default_rng(seed)
    test_rows = []
    for y in range(dataset.n_labels):
        rows = np.flatnonzero(dataset.labels == y)
        rng.shuffle(rows)
        test_rows.extend(rows[: int(round(test_fraction * rows.size))])
    test_mask = np.zeros(dataset.num_samples, dtype=bool)
    test_mask[test_rows] = True
    return dataset.take(np.flatnonzero(~test_mask)), dataset.take(np.flatnonzero(test_mask))


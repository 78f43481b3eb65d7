"""Config-driven experiments: ingest, train, profile, certify and export.

A run directory holds the trained model files, one profile per data split
(``profile_<split>.csv`` / ``.json``), the derived curve tables, an echo of the
effective config and ``manifest.json`` with the sha256 of every emitted file.
"""

from __future__ import annotations

import hashlib
import json
import os
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .bitdata import LabeledBitDataset, load_cache, load_idx, save_cache, to_parity_labels
from .estim import EstimatorConfig, InformationProfile, config_from_dict, estimate_profile
from .exceptions import ConfigError
from .models import SsbeConfig, duplicate_features, stack, train_drbm, train_rbm, train_ssbe
from .models.encoder import FactorizedEncoder, StackedEncoder
from .models.io import dumps_model, loads_model
from .oracle import AlphaModel, alpha_profile
from .separator import certify_empirical

MODEL_KINDS = ("raw", "rbm", "stack", "drbm", "ssbe", "sparse-ssbe", "duplicate")
SPLITS = ("train", "test")
CACHE_ENV = "INFOVIEWS_CACHE"
# sparse-SSBE sweep used when a config gives no grid of its own
DEFAULT_SPARSE_GRID = (
    {"sparsity_weight": 1e-4, "sparsity_target": 0.05},
    {"sparsity_weight": 1e-3, "sparsity_target": 0.05},
    {"sparsity_weight": 1e-2, "sparsity_target": 0.05},
)
FIGURES = {
    "profile": ("n", "f_hat"),
    "views": ("F_hat", "views"),
    "interactions": ("F_hat", "C_hat"),
    "correlations": ("F_hat", "D_hat"),
}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha_json(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


# -- config -----------------------------------------------------------------


@dataclass
class DatasetSpec:
    train_images: str
    train_labels: str
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    parity: bool = True
    limit: Optional[int] = None

    def paths(self, split: str):
        if split == "train":
            return self.train_images, self.train_labels
        return self.test_images, self.test_labels


@dataclass
class ModelSpec:
    kind: str = "raw"
    hidden: int = 784
    layers: Optional[list] = None
    hyperparameters: dict = field(default_factory=dict)
    keep: Optional[int] = None
    copies: Optional[int] = None
    grid: Optional[list] = None


@dataclass
class ExperimentConfig:
    name: str
    dataset: DatasetSpec
    output_dir: str
    model: ModelSpec = field(default_factory=ModelSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    seed: int = 0
    profile_sets: tuple = SPLITS
    certify: bool = True
    cache_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        raw = dict(raw)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("name", "dataset", "output_dir"):
            if key not in raw:
                raise ConfigError(f"config is missing {key!r}")
        base = Path(base_dir).resolve() if base_dir else Path.cwd()
        try:
            ds = dict(raw["dataset"])
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if ds.get(key) is not None:
                    ds[key] = str(base / ds[key])
            dataset = DatasetSpec(**ds)
            model = ModelSpec(**(raw.get("model") or {}))
            seed = int(raw.get("seed", 0))
            est = dict(raw.get("estimator") or {})
            est.setdefault("rng_seed", seed)
            estimator = config_from_dict(est)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        cache = raw.get("cache_dir")
        cfg = cls(name=str(raw["name"]), dataset=dataset, output_dir=str(base / raw["output_dir"]),
                  model=model, estimator=estimator, seed=seed,
                  profile_sets=tuple(raw.get("profile_sets", SPLITS)),
                  certify=bool(raw.get("certify", True)),
                  cache_dir=str(base / cache) if cache else None)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path, overrides=None) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, value in (overrides or {}).items():
            set_dotted(raw, key, value)
        return cls.from_dict(raw, base_dir=path.parent)

    def validate(self) -> None:
        ds, mod = self.dataset, self.model
        for split in self.profile_sets:
            if split not in SPLITS:
                raise ConfigError(f"unknown profile set {split!r}")
            for p in ds.paths(split):
                if p is None:
                    raise ConfigError(f"profile set {split!r} needs image and label paths")
                if not Path(p).is_file():
                    raise ConfigError(f"dataset file not found: {p}")
        for p in ds.paths("train"):
            if not Path(p).is_file():
                raise ConfigError(f"dataset file not found: {p}")
        if ds.limit is not None and ds.limit < 1:
            raise ConfigError("dataset.limit must be positive")
        if mod.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {mod.kind!r}; expected one of {MODEL_KINDS}")
        if mod.hidden < 1:
            raise ConfigError("model.hidden must be >= 1")
        if mod.kind == "stack":
            if not mod.layers or any(int(s) < 1 for s in mod.layers):
                raise ConfigError("stack needs a non-empty list of positive layer sizes")
        if mod.kind == "duplicate":
            if mod.keep is None or mod.copies is None:
                raise ConfigError("duplicate needs keep and copies")
            if not 1 <= mod.keep <= mod.hidden or mod.copies < 1:
                raise ConfigError("duplicate needs 1 <= keep <= hidden and copies >= 1")
        if mod.kind in ("ssbe", "sparse-ssbe"):
            for point in self.ssbe_points():
                try:
                    self._ssbe_config(point)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad SSBE settings: {exc}") from exc
        elif mod.grid:
            raise ConfigError("a grid is only meaningful for ssbe or sparse-ssbe")

    def ssbe_points(self) -> list:
        if self.model.kind == "sparse-ssbe":
            return [dict(p) for p in (self.model.grid or DEFAULT_SPARSE_GRID)]
        return [dict(p) for p in (self.model.grid or [{}])]

    def _ssbe_config(self, point: dict) -> SsbeConfig:
        hp = {**self.model.hyperparameters, **point}
        cfg = SsbeConfig(n_components=self.model.hidden, **hp)
        if self.model.kind == "sparse-ssbe" and cfg.sparsity_weight <= 0:
            raise ValueError("sparse-ssbe needs sparsity_weight > 0")
        return cfg

    def to_dict(self) -> dict:
        """Effective config with every default spelled out."""
        out = asdict(self)
        out["estimator"] = self.estimator.to_dict()
        out["profile_sets"] = list(self.profile_sets)
        if self.model.kind in ("ssbe", "sparse-ssbe"):
            out["model"]["grid"] = self.ssbe_points()
        return out


def set_dotted(raw: dict, key: str, value) -> None:
    """Apply one ``a.b.c=value`` override; the value is parsed as YAML."""
    if isinstance(value, str):
        value = yaml.safe_load(value)
    parts = key.split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key}: {p} is not a mapping")
    node[parts[-1]] = value


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v
    return out


# -- data and models --------------------------------------------------------


def load_split(spec: DatasetSpec, split: str, cache_dir=None) -> LabeledBitDataset:
    """Load one split, optionally through the binary dataset cache."""
    images, labels = spec.paths(split)
    key = None
    if cache_dir is not None:
        key = _sha_json({"images": sha256_file(images), "labels": sha256_file(labels),
                         "parity": spec.parity, "limit": spec.limit})
        path = Path(cache_dir) / f"{key}.ivds"
        if path.is_file():
            return load_cache(path)
    ds = load_idx(images, labels)
    if spec.parity:
        ds = to_parity_labels(ds)
    if spec.limit is not None and spec.limit < ds.num_samples:
        ds = ds.take(np.arange(spec.limit))
    if key is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        tmp = Path(cache_dir) / f"{key}.ivds.tmp{os.getpid()}"
        save_cache(ds, tmp)
        os.replace(tmp, Path(cache_dir) / f"{key}.ivds")
    return ds


def _cache_dir(cfg: ExperimentConfig) -> Path:
    if cfg.cache_dir:
        return Path(cfg.cache_dir)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "infoviews"


def _train(kind: str, spec: ModelSpec, X, y, seed: int,
           ssbe_cfg: Optional[SsbeConfig] = None):
    hp = dict(spec.hyperparameters)
    if kind == "rbm":
        return train_rbm(X, spec.hidden, hp, seed)
    if kind == "stack":
        return stack(X, [int(s) for s in spec.layers], hp, seed)
    if kind == "drbm":
        return train_drbm(X, y, spec.hidden, hp, seed)
    if kind in ("ssbe", "sparse-ssbe"):
        return train_ssbe(X, y, ssbe_cfg, seed)
    raise ValueError(kind)


class ModelCache:
    """Serialized models keyed by a hash of everything that affects training."""

    def __init__(self, root):
        self.root = Path(root)

    def key(self, data_sha: str, training: dict, seed: int) -> str:
        return _sha_json({"data": data_sha, "training": training, "seed": seed,
                          "format": 1})

    def get(self, key: str) -> Optional[bytes]:
        p = self.root / f"{key}.ivmd"
        return p.read_bytes() if p.is_file() else None

    def put(self, key: str, raw: bytes) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / f"{key}.ivmd.tmp{os.getpid()}"
        tmp.write_bytes(raw)
        os.replace(tmp, self.root / f"{key}.ivmd")


def _train_cached(cache: ModelCache, data_sha, training: dict, seed: int, fn):
    key = cache.key(data_sha, training, seed)
    raw = cache.get(key)
    hit = raw is not None
    if not hit:
        raw = dumps_model(fn())
        cache.put(key, raw)
    return raw, {"key": key, "hit": hit}


# -- runs -------------------------------------------------------------------


@dataclass
class RunManifest:
    name: str
    config: dict
    files: dict
    timings: dict
    version: str
    environment: dict
    cache: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def _environment() -> dict:
    import scipy
    import sklearn
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "sklearn": sklearn.__version__}


def _write_curves(prof: InformationProfile, out: Path, split: str) -> list:
    rows = prof.to_rows()
    tables = {
        "views": ("n", "F_hat", "views"),
        "interactions": ("n", "F_hat", "C_hat"),
        "correlations": ("n", "F_hat", "D_hat", "D_norm"),
    }
    written = []
    prof.to_csv(out / f"profile_{split}.csv")
    prof.to_json(out / f"profile_{split}.json")
    written += [f"profile_{split}.csv", f"profile_{split}.json"]
    for name, cols in tables.items():
        lines = [",".join(cols)]
        for r in rows:
            lines.append(",".join(_fmt(r[c]) for c in cols))
        (out / f"{name}_{split}.csv").write_text("\n".join(lines) + "\n")
        written.append(f"{name}_{split}.csv")
    return written


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _representation(model):
    """Encoder used for profiling; raw pixels when ``model`` is None."""
    if model is None:
        return None
    if isinstance(model, (FactorizedEncoder, StackedEncoder)):
        return model
    if hasattr(model, "encoder_") and not hasattr(model, "predict_proba"):
        return model.encoder_
    return model


def _profile_and_report(rep, data: dict, cfg: ExperimentConfig, out: Path, timings: dict,
                        metrics: dict) -> list:
    written = []
    for split in cfg.profile_sets:
        t0 = time.perf_counter()
        prof = estimate_profile(data[split], rep, cfg.estimator)
        timings[f"profile_{split}"] = time.perf_counter() - t0
        written += _write_curves(prof, out, split)
        metrics[f"{split}_termination"] = prof.termination
        metrics[f"{split}_rows"] = int(prof.f_hat.size)
    if cfg.certify:
        t0 = time.perf_counter()
        train = data["train"]
        probs = train.features if rep is None else np.asarray(rep.transform(train.features))
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(7,)))
        bits = (rng.random(probs.shape) < probs).astype(np.float64)
        report = certify_empirical(bits, train.labels, seed=cfg.seed)
        report.pop("mu")
        (out / "certification.json").write_text(json.dumps(report, indent=2, sort_keys=True)
                                                 + "\n")
        written.append("certification.json")
        timings["certify"] = time.perf_counter() - t0
    return written


def _single_run(cfg: ExperimentConfig, out: Path, data: dict, data_sha: str,
                cache: ModelCache, point: Optional[dict] = None) -> RunManifest:
    out.mkdir(parents=True, exist_ok=True)
    timings, metrics, files, cache_info = {}, {}, [], {}
    mod, train = cfg.model, data["train"]
    X, y = train.features, train.labels
    model = None
    t0 = time.perf_counter()
    if mod.kind != "raw":
        base_kind = "rbm" if mod.kind == "duplicate" else mod.kind
        training = {"kind": base_kind, "hidden": mod.hidden, "hyperparameters":
                    mod.hyperparameters}
        ssbe_cfg = None
        if base_kind == "stack":
            training = {"kind": "stack", "layers": [int(s) for s in mod.layers],
                        "hyperparameters": mod.hyperparameters}
        elif base_kind in ("ssbe", "sparse-ssbe"):
            ssbe_cfg = cfg._ssbe_config(point or {})
            training = {"kind": "ssbe", "ssbe": asdict(ssbe_cfg)}
        raw, cache_info = _train_cached(
            cache, data_sha, training, cfg.seed,
            lambda: _train(base_kind, mod, X, y, cfg.seed, ssbe_cfg))
        timings["train"] = time.perf_counter() - t0
        # always profile what was written, not the in-memory trainer
        model = loads_model(raw)
        fname = "base_rbm.ivmd" if mod.kind == "duplicate" else "model.ivmd"
        (out / fname).write_bytes(raw)
        files.append(fname)
        if mod.kind == "stack":
            for k, layer in enumerate(model.layers):
                (out / f"layer{k + 1}.ivmd").write_bytes(dumps_model(layer))
                files.append(f"layer{k + 1}.ivmd")
        if mod.kind == "duplicate":
            dup = duplicate_features(model.encoder_, mod.keep, mod.copies, seed=cfg.seed)
            dup_raw = dumps_model(dup)
            (out / "model.ivmd").write_bytes(dup_raw)
            files.append("model.ivmd")
            model = loads_model(dup_raw)
        metrics.update(_training_metrics(model, data))
    rep = _representation(model)
    files += _profile_and_report(rep, data, cfg, out, timings, metrics)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    files.append("metrics.json")
    effective = cfg.to_dict()
    name = cfg.name
    if point is not None and mod.kind in ("ssbe", "sparse-ssbe"):
        effective["model"]["grid"] = [point]
        name = f"{cfg.name}/{_point_name(point)}" if len(cfg.ssbe_points()) > 1 else name
    (out / "config.yaml").write_text(yaml.safe_dump(effective, sort_keys=True))
    files.append("config.yaml")
    return RunManifest(name=name, config=effective,
                       files={f: sha256_file(out / f) for f in sorted(files)},
                       timings=timings, version=__version__, environment=_environment(),
                       cache=cache_info)


def _training_metrics(model, data: dict) -> dict:
    out = {}
    trace = (getattr(model, "reconstruction_error_", None)
             if not hasattr(model, "log_likelihood_") else model.log_likelihood_)
    if trace is None:
        trace = getattr(model, "objective_", None)
    if trace is not None:
        out["training_trace"] = [float(v) for v in trace]
    if hasattr(model, "predict_proba"):
        for split, ds in data.items():
            out[f"{split}_accuracy"] = float((model.predict(ds.features) == ds.labels).mean())
    return out


def _point_name(point: dict) -> str:
    if not point:
        return "default"
    short = {"sparsity_weight": "lam", "sparsity_target": "p"}
    keys = sorted(point, key=lambda k: short.get(k, k))
    return "_".join(f"{short.get(k, k)}{point[k]:g}" if isinstance(point[k], (int, float))
                    else f"{k}{point[k]}" for k in keys)


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Train (or load from cache), profile and report one experiment.

    Grids of SSBE settings produce one sub-run directory per point; the
    top-level manifest then lists them under ``runs``.
    """
    t_start = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache_root = _cache_dir(cfg)
    splits = sorted(set(cfg.profile_sets) | {"train"})
    t0 = time.perf_counter()
    data = {s: load_split(cfg.dataset, s, cache_root / "datasets") for s in splits}
    load_time = time.perf_counter() - t0
    data_sha = _sha_json({s: [sha256_file(p) for p in cfg.dataset.paths(s)] for s in splits}
                         | {"parity": cfg.dataset.parity, "limit": cfg.dataset.limit})
    cache = ModelCache(cache_root / "models")
    points = cfg.ssbe_points() if cfg.model.kind in ("ssbe", "sparse-ssbe") else [None]
    if len(points) == 1:
        manifest = _single_run(cfg, out, data, data_sha, cache, points[0])
    else:
        subs = []
        for point in points:
            sub = _single_run(cfg, out / _point_name(point), data, data_sha, cache, point)
            sub.to_json(out / _point_name(point) / "manifest.json")
            subs.append(_point_name(point))
        files = {f"{s}/{f}": h for s in subs
                 for f, h in RunManifest.from_json(out / s / "manifest.json").files.items()}
        (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
        files["config.yaml"] = sha256_file(out / "config.yaml")
        manifest = RunManifest(name=cfg.name, config=cfg.to_dict(), files=files, timings={},
                               version=__version__, environment=_environment(), runs=subs)
    manifest.timings["load"] = load_time
    manifest.timings["total"] = time.perf_counter() - t_start
    manifest.to_json(out / "manifest.json")
    return manifest


# -- estimator validation ---------------------------------------------------


def validate_estimator(alphas, m: int = 64, config: Optional[EstimatorConfig] = None,
                       seeds=range(5), n_max: int = 40):
    """Compare sampled profiles of B^alpha with the closed form.

    Returns ``(rows, summary)``. Each row holds the analytic value, the
    seed-averaged estimate and the seed-averaged absolute error at one
    ``(alpha, n)``; the summary gives the mean and max of that error over n.
    """
    base = config or EstimatorConfig()
    rows, summary = [], {}
    seeds = list(seeds)
    for a in alphas:
        model = AlphaModel(float(a), m)
        exact = np.array([alpha_profile(model, n) for n in range(n_max + 1)])
        est = []
        for s in seeds:
            cfg = EstimatorConfig(**{**base.to_dict(), "n_max": n_max, "stop_threshold": None,
                                     "rng_seed": int(s)})
            est.append(estimate_profile(model.dataset(), None, cfg).f_hat[:n_max + 1])
        est = np.array(est)
        err = np.abs(est - exact).mean(axis=0)
        for n in range(n_max + 1):
            rows.append({"alpha": float(a), "n": n, "f": float(exact[n]),
                         "f_hat": float(est[:, n].mean()), "abs_error": float(err[n])})
        summary[float(a)] = {"mean_abs_error": float(err.mean()),
                             "max_abs_error": float(err.max())}
    return rows, summary


def write_validation(rows, summary, path) -> None:
    cols = ("alpha", "n", "f", "f_hat", "abs_error")
    lines = [",".join(cols)] + [",".join(_fmt(r[c]) for c in cols) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")
    Path(path).with_suffix(".summary.json").write_text(
        json.dumps({str(k): v for k, v in summary.items()}, indent=2, sort_keys=True) + "\n")


# -- figure data ------------------------------------------------------------


def discover_runs(roots, split: str = "train") -> dict:
    """Map series name -> run directory for every run under ``roots``."""
    found = {}
    for root in roots:
        root = Path(root)
        if not root.is_dir():
            continue
        for man in sorted(root.rglob("manifest.json")):
            if (man.parent / f"profile_{split}.json").is_file():
                name = json.loads(man.read_text()).get("name") or man.parent.name
                if name in found:
                    name = f"{name}@{man.parent}"
                found[name] = man.parent
    return found


def emit_figure_data(run_dirs, figure_id: str, out_path=None, split: str = "train",
                     search_root="runs") -> str:
    """Long-format CSV ``series,<x>,<y>`` with one series per run."""
    if figure_id not in FIGURES:
        raise ConfigError(f"unknown figure {figure_id!r}; expected one of {sorted(FIGURES)}")
    runs = discover_runs(run_dirs, split)
    if not runs:
        available = sorted(discover_runs([search_root], split)) if search_root else []
        listing = ", ".join(available) if available else "none found"
        raise ConfigError(f"no runs with {split} profiles given; available runs: {listing}")
    xcol, ycol = FIGURES[figure_id]
    lines = [f"series,{xcol},{ycol}"]
    for name, path in runs.items():
        prof = InformationProfile.from_json(path / f"profile_{split}.json")
        for r in prof.to_rows():
            if figure_id != "profile" and r["n"] == 0:
                continue     # views and normalized curves are undefined at n = 0
            lines.append(f"{name},{_fmt(r[xcol])},{_fmt(r[ycol])}")
    text = "\n".join(lines) + "\n"
    if out_path is not None:
        Path(out_path).write_text(text)
    return text

"""Command line entry point: ``infoviews <command> ...``.

Exit codes: 0 success, 1 domain or data error, 2 usage or config error.
Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .bitdata import load_cache, load_idx, save_cache, to_parity_labels
from .estim import EstimatorConfig, estimate_profile
from .exceptions import ConfigError, InfoviewsError
from .models import load_model, save_model, stack, train_drbm, train_rbm, train_ssbe
from .models.ssbe import SsbeConfig
from .oracle import read_joint
from .pipeline import (
    FIGURES, ExperimentConfig, emit_figure_data, parse_overrides, run_experiment,
    validate_estimator, write_validation,
)
from .separator import certify_empirical, verify_theorem1


def _fail(exc: Exception, code: int):
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
    sys.exit(code)


class _Group(click.Group):
    """Maps library exceptions onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            _fail(exc, 2)
        except (InfoviewsError, ValueError, OSError, ArithmeticError, RuntimeError) as exc:
            _fail(exc, 1)


def _load_dataset(images, labels, cache, parity):
    if cache:
        ds = load_cache(cache)
    elif images and labels:
        ds = load_idx(images, labels)
    else:
        raise ConfigError("give --images and --labels, or --cache")
    if parity and ds.n_labels != 2:
        ds = to_parity_labels(ds)
    return ds


def _dataset_options(f):
    f = click.option("--images", type=click.Path(exists=True, dir_okay=False))(f)
    f = click.option("--labels", type=click.Path(exists=True, dir_okay=False))(f)
    f = click.option("--cache", type=click.Path(exists=True, dir_okay=False),
                     help="dataset cache written by `ingest`")(f)
    f = click.option("--parity/--no-parity", default=True, show_default=True,
                     help="map digit labels to parity")(f)
    return f


def _kv_pairs(items) -> dict:
    import yaml
    return {k: yaml.safe_load(v) for k, v in parse_overrides(items).items()}


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """Label information profiles of binary representations."""


@main.command()
@click.option("--images", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--parity/--no-parity", default=True, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def ingest(images, labels, parity, out):
    """Read IDX image/label files into a binary dataset cache."""
    ds = load_idx(images, labels)
    if parity:
        ds = to_parity_labels(ds)
    save_cache(ds, out)
    click.echo(json.dumps({"samples": ds.num_samples, "m": ds.m, "labels": ds.n_labels,
                           "label_entropy": ds.label_entropy()}))


@main.command()
@click.option("--kind", required=True,
              type=click.Choice(["rbm", "stack", "drbm", "ssbe", "sparse-ssbe"]))
@_dataset_options
@click.option("--hidden", default=784, show_default=True, type=int)
@click.option("--layers", default=None, help="comma separated sizes for --kind stack")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--set", "settings", multiple=True, metavar="KEY=VALUE",
              help="trainer hyperparameter, repeatable")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def train(kind, images, labels, cache, parity, hidden, layers, seed, settings, out):
    """Train one model and write it in the binary model format."""
    ds = _load_dataset(images, labels, cache, parity)
    hp = _kv_pairs(settings)
    X, y = ds.features, ds.labels
    if kind == "rbm":
        model = train_rbm(X, hidden, hp, seed)
    elif kind == "stack":
        if not layers:
            raise ConfigError("--kind stack needs --layers")
        model = stack(X, [int(s) for s in layers.split(",")], hp, seed)
    elif kind == "drbm":
        model = train_drbm(X, y, hidden, hp, seed)
    else:
        try:
            cfg = SsbeConfig(n_components=hidden, **hp)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if kind == "sparse-ssbe" and cfg.sparsity_weight <= 0:
            raise ConfigError("sparse-ssbe needs sparsity_weight > 0")
        model = train_ssbe(X, y, cfg, seed)
    save_model(model, out)
    click.echo(out)


@main.command()
@_dataset_options
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              help="encoder to profile; raw features when omitted")
@click.option("--set", "settings", multiple=True, metavar="KEY=VALUE",
              help="estimator setting, repeatable (e.g. subset_samples=10)")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="profile CSV; a JSON copy is written next to it")
def profile(images, labels, cache, parity, model_path, settings, out):
    """Estimate the information profile of a representation."""
    ds = _load_dataset(images, labels, cache, parity)
    try:
        cfg = EstimatorConfig(**_kv_pairs(settings))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    model = load_model(model_path) if model_path else None
    if model is not None and hasattr(model, "encoder_") and not hasattr(model, "predict_proba"):
        model = model.encoder_
    prof = estimate_profile(ds, model, cfg)
    prof.to_csv(out)
    prof.to_json(Path(out).with_suffix(".json"))
    click.echo(json.dumps({"rows": int(prof.f_hat.size), "termination": prof.termination,
                           "F_hat": float(prof.F_hat[-1])}))


@main.command()
@click.option("--joint", type=click.Path(exists=True, dir_okay=False),
              help="text joint table: exhaustive check of the separator construction")
@_dataset_options
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="report JSON")
def certify(joint, images, labels, cache, parity, model_path, seed, out):
    """Build the linear separator and check it.

    With --joint every supported point of the table is checked; with a
    dataset the representation is sampled once and empirical diagnostics
    are reported. Exits 1 when the check fails.
    """
    if joint:
        rep = verify_theorem1(read_joint(joint))
        text = rep.to_json()
        ok = rep.certified
    else:
        ds = _load_dataset(images, labels, cache, parity)
        probs = ds.features
        if model_path:
            model = load_model(model_path)
            probs = np.asarray(model.transform(probs))
        bits = (np.random.default_rng(seed).random(probs.shape) < probs).astype(np.float64)
        report = certify_empirical(bits, ds.labels, seed=seed)
        report.pop("mu")
        text = json.dumps(report, indent=2, sort_keys=True)
        ok = report["violation_rate"] == 0.0
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)
    if not ok:
        sys.exit(1)


@main.command("validate-alpha")
@click.option("--alpha", "alphas", multiple=True, type=float,
              default=(0.57, 0.58, 0.6), show_default=True)
@click.option("--m", default=64, show_default=True, type=int)
@click.option("--n-max", default=40, show_default=True, type=int)
@click.option("--seeds", default=5, show_default=True, type=int)
@click.option("--set", "settings", multiple=True, metavar="KEY=VALUE")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def validate_alpha(alphas, m, n_max, seeds, settings, out):
    """Compare estimated and closed-form profiles on the B^alpha family."""
    try:
        cfg = EstimatorConfig(**_kv_pairs(settings))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    rows, summary = validate_estimator(alphas, m, cfg, range(seeds), n_max)
    write_validation(rows, summary, out)
    click.echo(json.dumps({str(k): v for k, v in summary.items()}, sort_keys=True))


@main.command()
@click.argument("figure_id", type=click.Choice(sorted(FIGURES)))
@click.argument("runs", nargs=-1, type=click.Path(file_okay=False))
@click.option("--split", default="train", show_default=True, type=click.Choice(["train", "test"]))
@click.option("--search-root", default="runs", show_default=True,
              help="where to look for runs to list when none are given")
@click.option("--out", type=click.Path(dir_okay=False))
def figure(figure_id, runs, split, search_root, out):
    """Write the data behind one figure (long format, one series per run)."""
    text = emit_figure_data(runs, figure_id, out, split=split, search_root=search_root)
    if not out:
        click.echo(text, nl=False)


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="override a config field, dotted keys allowed (model.hidden=100)")
def run(config, overrides):
    """Run an experiment described by a YAML config."""
    cfg = ExperimentConfig.from_yaml(config, parse_overrides(overrides))
    manifest = run_experiment(cfg)
    click.echo(json.dumps({"name": manifest.name, "output_dir": cfg.output_dir,
                           "files": len(manifest.files),
                           "seconds": round(manifest.timings["total"], 2)}))


if __name__ == "__main__":
    main()

"""Command-line surface: synthetic data generation, training, inference,
evaluation, cross-validation, and gradient diagnostics.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure. All randomness is seeded through flags or the config
file, so every command is deterministic given its arguments. The
``DSN_THREADS`` environment variable caps worker threads (0 = auto).
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click

from . import dataset as ds
from .errors import ConfigError, DataError, NumericalError
from .gradcheck import run_gradient_checks
from .learn import (
    TrainConfig,
    evaluate_on_collection,
    examples_from_collections,
    fit,
    model_summary,
    run_loocv,
    score_example,
)
from .mixture import COMPONENT_KINDS, load_model, save_model
from .vrouge import normalized_vrouge

_CONFIG_KEYS = ("mode", "budget", "epochs", "lr_w", "lr_theta", "lr_lambda",
                "decay", "beta", "tol", "seed")


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DataError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)

    return wrapper


def _load_run_config(config_path, overrides) -> tuple[TrainConfig, list | None, int | None]:
    """Merge a JSON config file with CLI overrides into training settings.

    Returns (train config, component specs or None, hidden or None).
    """
    doc = {}
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}")
        if not isinstance(doc, dict):
            raise ConfigError(f"{config_path}: config must be a JSON object")
        unknown = set(doc) - set(_CONFIG_KEYS) - {"components", "hidden"}
        if unknown:
            raise ConfigError(f"{config_path}: unknown config keys {sorted(unknown)}")
    merged = {k: doc[k] for k in _CONFIG_KEYS if k in doc}
    merged.update({k: v for k, v in overrides.items() if k in _CONFIG_KEYS and v is not None})
    try:
        cfg = TrainConfig(**merged).validate()
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}")

    components = doc.get("components")
    if components is not None:
        parsed = []
        for spec in components:
            if isinstance(spec, str):
                parsed.append(spec)
            elif isinstance(spec, dict) and "kind" in spec:
                extra = {k: v for k, v in spec.items() if k != "kind"}
                parsed.append((spec["kind"], extra))
            else:
                raise ConfigError(f"bad component spec {spec!r}")
        components = parsed
    if overrides.get("components_flag"):
        components = [k.strip() for k in overrides["components_flag"].split(",") if k.strip()]
    if components:
        for spec in components:
            kind = spec if isinstance(spec, str) else spec[0]
            if kind not in COMPONENT_KINDS:
                raise ConfigError(f"unknown component kind {kind!r}")

    hidden = doc.get("hidden")
    if overrides.get("hidden_flag") is not None:
        hidden = overrides["hidden_flag"]
    if hidden is not None and int(hidden) < 1:
        raise ConfigError("hidden must be positive")
    return cfg, components, None if hidden is None else int(hidden)


@click.group()
def main():
    """Submodular summarization models with jointly learned embeddings."""


@main.command("gen-synth")
@click.option("--out", required=True, type=click.Path(), help="Output dataset directory.")
@click.option("--collections", default=14, show_default=True, type=int)
@click.option("--items", default=100, show_default=True, type=int)
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--clusters", default=10, show_default=True, type=int)
@click.option("--words", default=20, show_default=True, type=int)
@click.option("--budget", default=10, show_default=True, type=int)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--queries", default=0, show_default=True, type=int,
              help="Query sets per collection (0 = generic dataset).")
@_exit_codes
def cmd_gen_synth(out, collections, items, dim, clusters, words, budget, seed, queries):
    """Generate a planted-cluster synthetic dataset."""
    path = ds.gen_synthetic(
        out, collections=collections, items=items, dim=dim, clusters=clusters,
        words=words, budget=budget, seed=seed, queries=queries,
    )
    click.echo(f"wrote {collections} collections to {path}")


def _train_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                      help="JSON config mirroring the training settings.")(fn)
    fn = click.option("--mode", type=click.Choice(["generic", "query"]), default=None)(fn)
    fn = click.option("--components", "components_flag", default=None,
                      help="Comma-separated component kinds.")(fn)
    fn = click.option("--hidden", "hidden_flag", type=int, default=None)(fn)
    fn = click.option("--budget", type=int, default=None)(fn)
    fn = click.option("--epochs", type=int, default=None)(fn)
    fn = click.option("--lr-w", "lr_w", type=float, default=None)(fn)
    fn = click.option("--lr-theta", "lr_theta", type=float, default=None)(fn)
    fn = click.option("--lr-lambda", "lr_lambda", type=float, default=None)(fn)
    fn = click.option("--decay", type=float, default=None)(fn)
    fn = click.option("--beta", type=float, default=None)(fn)
    fn = click.option("--tol", type=float, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    return fn


def _collect_overrides(kwargs) -> dict:
    keys = ("mode", "budget", "epochs", "lr_w", "lr_theta", "lr_lambda",
            "decay", "beta", "tol", "seed")
    out = {k: kwargs[k] for k in keys}
    out["components_flag"] = kwargs.get("components_flag")
    out["hidden_flag"] = kwargs.get("hidden_flag")
    return out


@main.command("train")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out-model", required=True, type=click.Path())
@click.option("--out-metrics", required=True, type=click.Path())
@click.option("--val", "val_name", default=None,
              help="Collection name held out for validation (default: none).")
@_train_options
@_exit_codes
def cmd_train(data, out_model, out_metrics, val_name, config_path, **kwargs):
    """Train a model on a dataset directory; write model JSON and metrics CSV."""
    cfg, components, hidden = _load_run_config(config_path, _collect_overrides(kwargs))
    collections = ds.load_dataset(data)
    if val_name is not None:
        val_cols = [c for c in collections if c.name == val_name]
        if not val_cols:
            raise ConfigError(f"validation collection {val_name!r} not found")
        train_cols = [c for c in collections if c.name != val_name]
    else:
        val_cols, train_cols = [], collections
    examples = examples_from_collections(train_cols, cfg.budget, cfg.mode)
    val_examples = (examples_from_collections(val_cols, cfg.budget, cfg.mode)
                    if val_cols else None)
    report = fit(examples, cfg, components=components, hidden=hidden, validation=val_examples)
    out = report.best_model if val_examples else report.model
    save_model(out, out_model)
    report.to_csv(out_metrics)
    click.echo(f"trained {len(report.rows)} epochs; model -> {out_model}, metrics -> {out_metrics}")


@main.command("summarize")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--collection", "collection_path", required=True, type=click.Path(exists=True))
@click.option("--budget", required=True, type=int)
@click.option("--query", "query_label", default=None, help="Query label (query-mode models).")
@click.option("--report", "report_path", type=click.Path(), default=None)
@_exit_codes
def cmd_summarize(model_path, collection_path, budget, query_label, report_path):
    """Print the greedy summary of one collection under a trained model."""
    model = load_model(model_path)
    coll = ds.load_collection(collection_path)
    query = None
    if query_label is not None:
        if model.mode != "query":
            raise ConfigError("--query given but the model is generic")
        matches = [q for q in coll.queries if q.label == query_label]
        if not matches:
            raise DataError(f"{coll.name}: no query labelled {query_label!r}")
        query = matches[0]
    elif model.mode == "query":
        if not coll.queries:
            raise DataError(f"{coll.name}: query-mode model needs a query set")
        query = coll.queries[0]
    trace = model_summary(model, coll, budget, query=query)
    click.echo(" ".join(str(v) for v in trace.ids))
    if report_path is not None:
        doc = {"ids": trace.ids, "gains": trace.gains}
        if coll.summaries:
            examples = examples_from_collections([coll], budget, model.mode)
            from .learn import example_norm_constants

            ex = examples[0]
            doc["normalized_vrouge"] = normalized_vrouge(
                trace.ids, example_norm_constants(ex), ex.loss_refs, coll.word_counts
            )
        Path(report_path).write_text(json.dumps(doc, sort_keys=True) + "\n")


@main.command("evaluate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--budget", type=int, default=None, help="Defaults to the manifest budget.")
@click.option("--out", "out_path", required=True, type=click.Path())
@_exit_codes
def cmd_evaluate(model_path, data, budget, out_path):
    """Score a fixed model on every collection of a dataset."""
    model = load_model(model_path)
    collections = ds.load_dataset(data)
    if budget is None:
        budget = ds.load_manifest(data).get("budget")
        if budget is None:
            raise ConfigError("no --budget given and the manifest records none")
    scores = [(c.name, evaluate_on_collection(model, c, budget, model.mode))
              for c in collections]
    with Path(out_path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["collection", "score"])
        for name, score in scores:
            writer.writerow([name, repr(score)])
        writer.writerow(["mean", repr(sum(s for _, s in scores) / len(scores))])
    click.echo(f"evaluated {len(scores)} collections -> {out_path}")


@main.command("loocv")
@click.option("--data", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@_train_options
@_exit_codes
def cmd_loocv(data, out_path, config_path, **kwargs):
    """Leave-one-out cross-validation over a dataset's collections."""
    cfg, components, hidden = _load_run_config(config_path, _collect_overrides(kwargs))
    collections = ds.load_dataset(data)
    try:
        report = run_loocv(collections, cfg, components=components, hidden=hidden)
    except ValueError as exc:
        raise DataError(str(exc))
    report.to_csv(out_path)
    click.echo(f"loocv mean score {report.mean_score:.4f} over {len(report.folds)} folds -> {out_path}")


@main.command("check-gradients")
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--points", default=20, show_default=True, type=int)
@click.option("--step", default=1e-5, show_default=True, type=float)
@click.option("--threshold", default=1e-3, show_default=True, type=float)
@click.option("--out", "out_path", type=click.Path(), default=None)
@_exit_codes
def cmd_check_gradients(seed, points, step, threshold, out_path):
    """Compare analytic gradients with finite differences for every kind."""
    rows = run_gradient_checks(seed=seed, points=points, step=step, threshold=threshold)
    if out_path is not None:
        with Path(out_path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "target", "points", "max_rel_error", "ok"])
            for row in rows:
                writer.writerow([row.kind, row.target, row.points,
                                 repr(row.max_rel_error), row.ok])
    for row in rows:
        status = "ok" if row.ok else "FAIL"
        click.echo(f"{row.kind:14s} {row.target:8s} rel_err={row.max_rel_error:.3e}  {status}")
    if not all(row.ok for row in rows):
        raise NumericalError(f"gradient check exceeded threshold {threshold}")
    click.echo("all gradient checks passed")

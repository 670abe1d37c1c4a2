"""Command line for corpus generation, weak labeling, dataset construction,
training, sweeps, transfer runs, and report emission.

Every command accepts ``--config FILE`` with ``key = value`` lines (# comments
allowed); explicit command-line flags take precedence over config-file values.
Keys mirror the flag names with underscores (e.g. ``clean_ratio = 0.05``).
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from mailintent import experiments
from mailintent.baselines import METHODS, TrainConfig, run_repeated, train_method
from mailintent.corpus import (
    INTENTS,
    SyntheticSpec,
    IntentNoise,
    audit_calibrated_spec,
    build_dataset,
    generate_synthetic,
    load_corpus,
    load_dataset,
    save_corpus,
    save_dataset,
)
from mailintent.experiments import (
    ReportTable,
    SweepCell,
    build_manifest,
    emit_report,
    run_sweep,
    run_transfer,
    write_manifest,
)
from mailintent.nn.params import save_params
from mailintent.weaklabel import (
    LABELING_FUNCTIONS,
    balanced_audit_sample,
    evaluate_labeling,
    label_all_intents,
    load_assignments,
    save_assignments,
)


def read_config_file(path: str | None) -> dict:
    """Parse a key = value config file; values are JSON where possible."""
    if path is None:
        return {}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError:
            values[key] = value
    return values


class ConfigFileGroup(click.Group):
    """Injects config-file values as defaults for any unset option."""


def _merge_config(ctx: click.Context, overrides: dict) -> dict:
    merged = dict(overrides)
    for key, value in list(merged.items()):
        if value is None and key in ctx.obj:
            merged[key] = ctx.obj[key]
    for key, value in ctx.obj.items():
        merged.setdefault(key, value)
    return merged


def _pick(merged: dict, key: str, default):
    value = merged.get(key)
    return default if value is None else value


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="key = value config file; flags override its entries")
@click.pass_context
def main(ctx, config_path):
    """Weakly supervised email intent detection experiments."""
    ctx.obj = read_config_file(config_path)


def _parse_seeds(value) -> list[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(",") if str(v).strip()]


def _train_config(merged: dict) -> TrainConfig:
    schedule = merged.get("lambda_schedule")
    if isinstance(schedule, str):
        schedule = tuple(float(v) for v in schedule.split(",") if v.strip())
    kwargs = dict(
        encoder=_pick(merged, "encoder", "avgemb"),
        embed_dim=int(_pick(merged, "embed_dim", 50)),
        hidden_dim=int(_pick(merged, "hidden_dim", 64)),
        max_len=int(_pick(merged, "max_len", 128)),
        truncate=_pick(merged, "truncate", "head"),
        epochs=int(_pick(merged, "epochs", 10)),
        batch_size=int(_pick(merged, "batch_size", 32)),
        alpha=float(_pick(merged, "alpha", 1.0)),
        rho=float(_pick(merged, "rho", 0.95)),
        eps=float(_pick(merged, "eps", 1e-6)),
        lr=float(_pick(merged, "lr", 1.0)),
        warmup_epochs=int(_pick(merged, "warmup_epochs", 5)),
        epochs_per_stage=int(_pick(merged, "epochs_per_stage", 10)),
        patience=int(_pick(merged, "patience", 3)),
        glc_epochs=int(_pick(merged, "glc_epochs", 20)),
        use_label_correction=bool(_pick(merged, "use_label_correction", True)),
        use_self_paced=bool(_pick(merged, "use_self_paced", True)),
        corrected_mode=_pick(merged, "corrected_mode", "soft"),
    )
    if schedule:
        kwargs["lambda_schedule"] = tuple(schedule)
    return TrainConfig(**kwargs)


@main.command()
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--threads", "num_threads", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--preset", type=click.Choice(["audit", "benchmark"]), default=None,
              help="audit: all three intents at calibrated audit rates; benchmark: single-intent training corpus")
@click.option("--intent", type=click.Choice(INTENTS), default=None)
@click.option("--id-prefix", default=None)
@click.pass_context
def generate(ctx, out_dir, num_threads, seed, preset, intent, id_prefix):
    """Generate a synthetic corpus (messages/calendar/gold files)."""
    merged = _merge_config(ctx, dict(num_threads=num_threads, seed=seed, preset=preset,
                                     intent=intent, id_prefix=id_prefix))
    preset = _pick(merged, "preset", "benchmark")
    seed = int(_pick(merged, "seed", 0))
    threads = int(_pick(merged, "num_threads", 3000))
    prefix = _pick(merged, "id_prefix", "t")
    if preset == "audit":
        spec = audit_calibrated_spec(num_threads=threads, seed=seed, id_prefix=prefix)
    else:
        spec = experiments.benchmark_spec(
            seed=seed,
            num_threads=threads,
            intent=_pick(merged, "intent", INTENTS[0]),
            id_prefix=prefix,
        )
    corpus = generate_synthetic(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out / "messages.jsonl", out / "calendar.jsonl", out / "gold.jsonl")
    click.echo(f"wrote {len(corpus)} messages, {len(corpus.calendar)} calendar entries to {out}")


def _load_corpus_dir(corpus_dir: str):
    base = Path(corpus_dir)
    calendar = base / "calendar.jsonl"
    gold = base / "gold.jsonl"
    return load_corpus(
        base / "messages.jsonl",
        calendar if calendar.exists() else None,
        gold if gold.exists() else None,
    )


@main.command("weak-label")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--intent", type=click.Choice(INTENTS), default=None, help="default: all intents")
def weak_label(corpus_dir, out, intent):
    """Apply the interaction labeling rules and write the assignments file."""
    corpus = _load_corpus_dir(corpus_dir)
    if intent:
        assignments = LABELING_FUNCTIONS[intent](corpus)
    else:
        assignments = label_all_intents(corpus)
    save_assignments(assignments, out)
    positives = sum(1 for a in assignments if a.label == 1)
    click.echo(f"wrote {len(assignments)} assignments ({positives} positive) to {out}")


@main.command("audit-labels")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--intent", type=click.Choice(INTENTS), required=True)
@click.option("--sample-size", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def audit_labels(corpus_dir, labels_path, intent, sample_size, seed, out):
    """Audit weak labels against gold on a balanced sample; prints the report."""
    corpus = _load_corpus_dir(corpus_dir)
    assignments = [a for a in load_assignments(labels_path) if a.intent == intent]
    sample = balanced_audit_sample(assignments, corpus.gold, sample_size, seed=seed)
    report = evaluate_labeling(sample, corpus.gold)
    line = json.dumps(report.to_record(), sort_keys=True)
    click.echo(line)
    if out:
        Path(out).write_text(line + "\n", encoding="utf-8")


@main.command("build-dataset")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--intent", type=click.Choice(INTENTS), required=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--clean-ratio", type=float, default=None)
@click.option("--clean-size", type=int, default=None)
@click.option("--weak-size", type=int, default=None)
@click.option("--dev-size", type=int, default=None)
@click.option("--test-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--natural-eval", is_flag=True, default=False,
              help="draw dev/test at natural prevalence instead of balancing")
@click.option("--weak-pool", type=click.Choice(["gold", "all"]), default="gold", show_default=True)
@click.pass_context
def build_dataset_cmd(ctx, corpus_dir, labels_path, intent, out, clean_ratio, clean_size,
                      weak_size, dev_size, test_size, seed, natural_eval, weak_pool):
    """Carve balanced clean/weak/dev/test splits and write the dataset file."""
    merged = _merge_config(ctx, dict(clean_ratio=clean_ratio, clean_size=clean_size,
                                     weak_size=weak_size, dev_size=dev_size,
                                     test_size=test_size, seed=seed))
    corpus = _load_corpus_dir(corpus_dir)
    assignments = load_assignments(labels_path)
    ratio = merged.get("clean_ratio")
    if ratio is None and merged.get("weak_size") is None and merged.get("clean_size") is None:
        ratio = 0.1
    dataset = build_dataset(
        corpus,
        assignments,
        intent,
        clean_ratio=ratio,
        seed=int(_pick(merged, "seed", 0)),
        clean_size=merged.get("clean_size"),
        weak_size=merged.get("weak_size"),
        dev_size=merged.get("dev_size"),
        test_size=merged.get("test_size"),
        balance_eval=not natural_eval,
        weak_pool=weak_pool,
    )
    save_dataset(dataset, out)
    click.echo(
        f"clean={len(dataset.clean)} weak={len(dataset.weak)} dev={len(dataset.dev)} "
        f"test={len(dataset.test)} clean_ratio={dataset.clean_ratio():.4f} -> {out}"
    )


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--method", type=click.Choice(METHODS), required=True)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seeds", default=None, help="comma-separated training seeds")
@click.option("--alpha", default=None, help="weak-loss weight, or comma list to pick by dev accuracy")
@click.option("--encoder", type=click.Choice(["avgemb", "bilstm"]), default=None)
@click.option("--save-model", is_flag=True, default=False, help="write a parameter checkpoint")
@click.pass_context
def train(ctx, dataset_path, method, out_dir, seeds, alpha, encoder, save_model):
    """Train one method on a dataset; writes records, manifest, and logs."""
    merged = _merge_config(ctx, dict(seeds=seeds, alpha=None, encoder=encoder))
    dataset = load_dataset(dataset_path)
    seed_list = _parse_seeds(_pick(merged, "seeds", "0"))
    alphas = [float(v) for v in str(alpha or _pick(merged, "alpha", "1.0")).split(",")]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    best = None
    for a in alphas:
        merged["alpha"] = a
        config = _train_config(merged)
        result = run_repeated(method, dataset, seed_list, config)
        result["alpha"] = a
        if best is None or (result["mean_dev_accuracy"] or 0) > (best["mean_dev_accuracy"] or 0):
            best = result
    record = {
        "method": method,
        "encoder": _pick(merged, "encoder", "avgemb"),
        "intent": dataset.intent,
        "clean_ratio": dataset.clean_ratio(),
        "alpha": best["alpha"],
        "seeds": seed_list,
        "per_seed": best["per_seed"],
        "mean_dev_accuracy": best["mean_dev_accuracy"],
        "mean_test_accuracy": best["mean_test_accuracy"],
    }
    (out / "record.jsonl").write_text(json.dumps(record, sort_keys=True) + "\n", encoding="utf-8")
    manifest = build_manifest(
        {**{k: v for k, v in merged.items() if not k.startswith("_")},
         "method": method, "alpha": best["alpha"], "chosen_by": "mean dev accuracy"},
        [dataset_path],
        seed_list,
    )
    write_manifest(manifest, out / "manifest.json")
    if save_model:
        merged["alpha"] = best["alpha"]
        model, _ = train_method(method, dataset, _train_config(merged), seed=seed_list[0])
        save_params(model.params_, out / "model.params")
        model.vocab_.save(out / "vocab.txt")
        if getattr(model, "log_", None):
            with open(out / "training_log.jsonl", "w", encoding="utf-8") as fh:
                for entry in model.log_:
                    fh.write(json.dumps(entry.to_record(), sort_keys=True) + "\n")
    click.echo(json.dumps(record, sort_keys=True))


@main.command()
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--methods", default="clean,dual_head", show_default=True)
@click.option("--intent", type=click.Choice(INTENTS), default=INTENTS[0], show_default=True)
@click.option("--encoder", type=click.Choice(["avgemb", "bilstm"]), default="avgemb", show_default=True)
@click.option("--clean-ratios", default=None, help="comma list, e.g. 0.01,0.05,0.1")
@click.option("--weak-sizes", default=None, help="comma list of weak split sizes")
@click.option("--clean-size", type=int, default=None)
@click.option("--dev-size", type=int, default=None)
@click.option("--test-size", type=int, default=None)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--alphas", default=None, help="comma list; one cell per alpha")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def sweep(ctx, corpus_dir, out_dir, methods, intent, encoder, clean_ratios, weak_sizes,
          clean_size, dev_size, test_size, seeds, alphas, jobs):
    """Run a grid of (method x data setting) cells and emit the report.

    Exits non-zero if any cell failed."""
    merged = _merge_config(ctx, dict(seeds=seeds))
    corpus = _load_corpus_dir(corpus_dir)
    seed_list = _parse_seeds(_pick(merged, "seeds", "0,1,2"))
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    ratio_list = [float(v) for v in clean_ratios.split(",")] if clean_ratios else [None]
    weak_list = [int(v) for v in weak_sizes.split(",")] if weak_sizes else [None]
    alpha_list = [float(v) for v in alphas.split(",")] if alphas else [None]
    cells = [
        SweepCell(
            method=m,
            encoder=encoder,
            intent=intent,
            clean_ratio=r if r is not None else (None if (clean_size and w is not None) else 0.1),
            clean_size=clean_size,
            weak_size=w,
            dev_size=dev_size,
            test_size=test_size,
            alpha=a,
        )
        for m in method_list
        for r in ratio_list
        for w in weak_list
        for a in alpha_list
    ]
    table = run_sweep(corpus, cells, seed_list, _train_config(merged), jobs=jobs)
    paths = emit_report(table.rows, out_dir, stem="sweep")
    manifest = build_manifest(
        {"methods": method_list, "intent": intent, "encoder": encoder,
         "clean_ratios": ratio_list, "weak_sizes": weak_list, "alphas": alpha_list,
         "cells": [asdict(c) for c in cells]},
        [Path(corpus_dir) / "messages.jsonl"],
        seed_list,
    )
    write_manifest(manifest, Path(out_dir) / "manifest.json")
    click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")
    if table.failed:
        click.echo(f"{len(table.failed)} cells failed", err=True)
        sys.exit(1)


@main.command()
@click.option("--corpus-a", required=True, type=click.Path(exists=True),
              help="target domain: supplies clean, dev, and test data")
@click.option("--corpus-b", required=True, type=click.Path(exists=True),
              help="source domain: supplies the weak pool")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--intent", type=click.Choice(INTENTS), default=INTENTS[0], show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True)
@click.option("--clean-size", type=int, default=120, show_default=True)
@click.option("--tiny-clean-size", type=int, default=24, show_default=True)
@click.option("--weak-size", type=int, default=1440, show_default=True)
@click.option("--dev-size", type=int, default=200, show_default=True)
@click.option("--test-size", type=int, default=400, show_default=True)
@click.pass_context
def transfer(ctx, corpus_a, corpus_b, out_dir, intent, seeds, clean_size, tiny_clean_size,
             weak_size, dev_size, test_size):
    """Cross-domain run: clean from A, weak from B, evaluation on A."""
    merged = _merge_config(ctx, dict(seeds=seeds))
    seed_list = _parse_seeds(_pick(merged, "seeds", "0,1,2"))
    result = run_transfer(
        _load_corpus_dir(corpus_a),
        _load_corpus_dir(corpus_b),
        intent,
        seed_list,
        _train_config(merged),
        clean_size_a=clean_size,
        tiny_clean_size=tiny_clean_size,
        weak_size_b=weak_size,
        dev_size=dev_size,
        test_size=test_size,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transfer.json").write_text(json.dumps(result, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    manifest = build_manifest(
        {"intent": intent, "clean_size": clean_size, "tiny_clean_size": tiny_clean_size,
         "weak_size": weak_size},
        [Path(corpus_a) / "messages.jsonl", Path(corpus_b) / "messages.jsonl"],
        seed_list,
    )
    write_manifest(manifest, out / "manifest.json")
    click.echo(json.dumps({k: result[k] for k in ("transfer", "clean_only", "clean_only_tiny", "zero_shot")},
                          sort_keys=True))


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--stem", default="report", show_default=True)
def report(records_path, out_dir, stem):
    """Re-emit report files from a raw records file (idempotent)."""
    records = []
    with open(records_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    paths = emit_report(records, out_dir, stem=stem)
    click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")


if __name__ == "__main__":
    main()

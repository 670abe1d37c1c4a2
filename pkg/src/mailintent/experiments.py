"""Experiment harness: the calibrated synthetic benchmark, sweeps over method
and data-size grids, two-domain transfer runs, and deterministic report files.

Everything downstream of a (spec, seeds) pair is a pure function of it: reports
re-emitted from the same records are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from mailintent.baselines import METHODS, TrainConfig, run_repeated
from mailintent.corpus import (
    Corpus,
    Dataset,
    INTENT_REQUEST_INFO,
    IntentNoise,
    SyntheticSpec,
    build_dataset,
    calibrate_interaction_noise,
    generate_synthetic,
)
from mailintent.weaklabel import LABELING_FUNCTIONS


# ---------------------------------------------------------------------------
# the calibrated synthetic benchmark
# ---------------------------------------------------------------------------


def benchmark_spec(
    seed: int = 42,
    num_threads: int = 4200,
    false_positive: float = 0.4,
    false_negative: float = 0.2,
    intent: str = INTENT_REQUEST_INFO,
    id_prefix: str = "t",
) -> SyntheticSpec:
    """A single-intent corpus whose weak labels are ~70% accurate against gold
    on a signal-balanced pool, with content informative enough to learn from
    but noisy enough that a small clean set underfits.

    The intent prior is pinned at one half so that carving balanced gold
    splits out of the pool leaves the class mix (and therefore the weak-label
    precisions) of the remaining examples unchanged. With fp=0.4 / fn=0.2 the
    audit accuracy over a signal-balanced sample is (0.8/1.2 + 0.6/0.8)/2,
    about 0.708."""
    return SyntheticSpec(
        num_threads=num_threads,
        priors={intent: 0.5},
        noise={intent: IntentNoise(false_positive, false_negative)},
        vocab_size=1500,
        intent_pool_size=200,
        evidence_rate=0.35,
        distractor_rate=0.04,
        body_chunks=(4, 8),
        seed=seed,
        id_prefix=id_prefix,
    )


def benchmark_dataset(
    corpus: Corpus | None = None,
    intent: str = INTENT_REQUEST_INFO,
    clean_ratio: float = 0.1,
    weak_size: int = 1440,
    dev_size: int = 300,
    test_size: int = 600,
    data_seed: int = 0,
) -> Dataset:
    if corpus is None:
        corpus = generate_synthetic(benchmark_spec(intent=intent))
    assignments = LABELING_FUNCTIONS[intent](corpus)
    return build_dataset(
        corpus,
        assignments,
        intent,
        clean_ratio=clean_ratio,
        seed=data_seed,
        weak_size=weak_size,
        dev_size=dev_size,
        test_size=test_size,
    )


def benchmark_config(**overrides) -> TrainConfig:
    """Desk-scale training constants used by the benchmark suites."""
    base = dict(
        encoder="avgemb",
        embed_dim=32,
        max_len=24,
        epochs=25,
        batch_size=32,
        eps=1e-4,
        warmup_epochs=5,
        lambda_schedule=(0.2, 0.35, 0.5, 0.7, 1.0, 1.4),
        epochs_per_stage=4,
        patience=3,
        glc_epochs=25,
        alpha=1.0,
    )
    base.update(overrides)
    return TrainConfig(**base)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    """One grid point: a method trained on one dataset configuration."""

    method: str
    encoder: str = "avgemb"
    intent: str = INTENT_REQUEST_INFO
    clean_ratio: float | None = 0.1
    clean_size: int | None = None
    weak_size: int | None = None
    dev_size: int | None = None
    test_size: int | None = None
    alpha: float | None = None
    data_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")

    def key(self) -> tuple:
        return (
            self.method,
            self.encoder,
            self.intent,
            -1.0 if self.clean_ratio is None else self.clean_ratio,
            -1 if self.clean_size is None else self.clean_size,
            -1 if self.weak_size is None else self.weak_size,
            -1.0 if self.alpha is None else self.alpha,
        )


@dataclass
class ReportTable:
    """Aggregated sweep results; every requested cell is present, either with
    metrics or with an explicit error."""

    rows: list[dict] = field(default_factory=list)

    def sorted_rows(self) -> list[dict]:
        return sorted(self.rows, key=lambda r: json.dumps(r.get("cell", {}), sort_keys=True))

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.rows if r.get("error")]

    def mean_test(self, **cell_match) -> float | None:
        for row in self.rows:
            if all(row["cell"].get(k) == v for k, v in cell_match.items()):
                return row.get("mean_test_accuracy")
        return None


def _run_cell(corpus, assignments_by_intent, cell: SweepCell, seeds, config: TrainConfig) -> dict:
    dataset = build_dataset(
        corpus,
        assignments_by_intent[cell.intent],
        cell.intent,
        clean_ratio=cell.clean_ratio,
        seed=cell.data_seed,
        clean_size=cell.clean_size,
        weak_size=cell.weak_size,
        dev_size=cell.dev_size,
        test_size=cell.test_size,
    )
    cell_config = replace(
        config,
        encoder=cell.encoder,
        alpha=config.alpha if cell.alpha is None else cell.alpha,
    )
    result = run_repeated(cell.method, dataset, seeds, cell_config)
    return {
        "cell": asdict(cell),
        "seeds": list(seeds),
        "alpha": cell_config.alpha,
        "clean_count": len(dataset.clean),
        "weak_count": len(dataset.weak),
        "achieved_clean_ratio": dataset.clean_ratio(),
        "per_seed": result["per_seed"],
        "mean_dev_accuracy": result["mean_dev_accuracy"],
        "mean_test_accuracy": result["mean_test_accuracy"],
        "error": None,
    }


def _run_cell_guarded(args) -> dict:
    corpus, assignments_by_intent, cell, seeds, config = args
    try:
        return _run_cell(corpus, assignments_by_intent, cell, seeds, config)
    except Exception as exc:  # cell failures are recorded, the sweep continues
        return {"cell": asdict(cell), "seeds": list(seeds), "error": f"{type(exc).__name__}: {exc}"}


def run_sweep(
    corpus: Corpus,
    cells,
    seeds,
    config: TrainConfig = TrainConfig(),
    assignments_by_intent: dict | None = None,
    jobs: int = 1,
) -> ReportTable:
    """Run every cell (skipping none): failures are recorded per cell. With
    ``jobs`` > 1 cells run in separate processes; results are ordered by cell,
    never by completion, so reports stay deterministic."""
    cells = list(cells)
    if not cells:
        raise ValueError("sweep grid is empty")
    if assignments_by_intent is None:
        intents = sorted({c.intent for c in cells})
        assignments_by_intent = {i: LABELING_FUNCTIONS[i](corpus) for i in intents}
    arglist = [(corpus, assignments_by_intent, cell, list(seeds), config) for cell in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_guarded, arglist))
    else:
        rows = [_run_cell_guarded(args) for args in arglist]
    return ReportTable(rows=rows)


# ---------------------------------------------------------------------------
# two-domain transfer
# ---------------------------------------------------------------------------


def run_transfer(
    corpus_a: Corpus,
    corpus_b: Corpus,
    intent: str,
    seeds,
    config: TrainConfig = TrainConfig(),
    *,
    clean_size_a: int = 120,
    tiny_clean_size: int = 24,
    weak_size_b: int | None = 1440,
    dev_size: int = 200,
    test_size: int = 400,
    data_seed: int = 0,
) -> dict:
    """Train with clean data from domain A and weak data from domain B, always
    testing on A. Reports four settings: the combined transfer model, the
    A-clean-only control, the same control with a tiny clean set, and the
    zero-shot model trained entirely on B."""
    assignments_a = LABELING_FUNCTIONS[intent](corpus_a)
    assignments_b = LABELING_FUNCTIONS[intent](corpus_b)
    ds_a = build_dataset(
        corpus_a, assignments_a, intent, clean_ratio=1.0, seed=data_seed,
        clean_size=clean_size_a, dev_size=dev_size, test_size=test_size,
    )
    ds_a_tiny = build_dataset(
        corpus_a, assignments_a, intent, clean_ratio=1.0, seed=data_seed,
        clean_size=tiny_clean_size, dev_size=dev_size, test_size=test_size,
    )
    ds_b = build_dataset(
        corpus_b, assignments_b, intent, clean_ratio=None, seed=data_seed,
        clean_size=clean_size_a, weak_size=weak_size_b, dev_size=dev_size, test_size=test_size,
    )
    transfer_ds = Dataset(
        clean=ds_a.clean, weak=ds_b.weak, dev=ds_a.dev, test=ds_a.test,
        num_classes=2, intent=intent,
    )
    zero_shot_ds = Dataset(
        clean=ds_b.clean, weak=ds_b.weak, dev=ds_b.dev, test=ds_a.test,
        num_classes=2, intent=intent,
    )
    settings = {
        "transfer": ("dual_head", transfer_ds),
        "clean_only": ("clean", ds_a),
        "clean_only_tiny": ("clean", ds_a_tiny),
        "zero_shot": ("dual_head", zero_shot_ds),
    }
    out: dict = {"intent": intent, "seeds": list(seeds)}
    for name, (method, dataset) in settings.items():
        result = run_repeated(method, dataset, seeds, config)
        out[name] = result["mean_test_accuracy"]
        out[f"{name}_per_seed"] = result["per_seed"]
    return out


# ---------------------------------------------------------------------------
# reports and manifests
# ---------------------------------------------------------------------------

_TSV_COLUMNS = (
    "method",
    "encoder",
    "intent",
    "clean_ratio",
    "clean_count",
    "weak_count",
    "alpha",
    "mean_dev_accuracy",
    "mean_test_accuracy",
    "seeds",
    "error",
)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def emit_report(records, out_dir: str | Path, stem: str = "report") -> dict[str, Path]:
    """Write sweep records as raw JSONL, a TSV table, plot-ready series, and a
    text summary. Pure function of the records: re-emission is byte-identical."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: json.dumps(r.get("cell", r), sort_keys=True))

    paths = {
        "records": out_dir / f"{stem}_records.jsonl",
        "table": out_dir / f"{stem}.tsv",
        "series": out_dir / f"{stem}_series.tsv",
        "summary": out_dir / f"{stem}_summary.txt",
    }
    with open(paths["records"], "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def row_values(rec):
        cell = rec.get("cell", {})
        merged = {**cell, **{k: v for k, v in rec.items() if k != "cell"}}
        return [_fmt(merged.get(col)) for col in _TSV_COLUMNS]

    with open(paths["table"], "w", encoding="utf-8") as fh:
        fh.write("\t".join(_TSV_COLUMNS) + "\n")
        for rec in records:
            fh.write("\t".join(row_values(rec)) + "\n")

    with open(paths["series"], "w", encoding="utf-8") as fh:
        fh.write("method\tencoder\tintent\tclean_ratio\tweak_count\tmean_test_accuracy\n")
        for rec in records:
            if rec.get("error"):
                continue
            cell = rec.get("cell", {})
            fh.write(
                "\t".join(
                    _fmt(v)
                    for v in (
                        cell.get("method"),
                        cell.get("encoder"),
                        cell.get("intent"),
                        rec.get("achieved_clean_ratio"),
                        rec.get("weak_count"),
                        rec.get("mean_test_accuracy"),
                    )
                )
                + "\n"
            )

    lines = [f"{len(records)} cells, {sum(1 for r in records if r.get('error'))} failed", ""]
    for rec in records:
        cell = rec.get("cell", {})
        name = f"{cell.get('method', '?')}/{cell.get('encoder', '?')}/{cell.get('intent', '?')}"
        if rec.get("error"):
            lines.append(f"{name}: FAILED ({rec['error']})")
        else:
            lines.append(
                f"{name}: clean={rec.get('clean_count')} weak={rec.get('weak_count')} "
                f"ratio={_fmt(rec.get('achieved_clean_ratio'))} "
                f"mean test accuracy {_fmt(rec.get('mean_test_accuracy'))}"
            )
    paths["summary"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths


def content_hash(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode("utf-8")).hexdigest()


def build_manifest(config: dict, input_paths, seeds) -> dict:
    return {
        "config": config,
        "config_hash": config_hash(config),
        "inputs": {str(p): content_hash(p) for p in input_paths},
        "seeds": list(seeds),
    }


def write_manifest(manifest: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")

"""Reproducible experiment runs: configuration, training loop, ablations.

A run is fully determined by its configuration and seed: task order, buffer
sampling and synthetic data all derive from the seed, so the JSON report is
byte-identical across repeated runs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .cil import ExpansionBuffer, incremental_train
from .data import (
    EmbeddingDataset,
    generate_synthetic,
    load_embeddings,
    split_tasks,
)
from .metrics import MetricsReport, TimeTracker, task_accuracy
from .rolann import LogisticActivation, ROLANNClassifier

ABLATION_VARIANTS = ("full", "no_oversampling", "no_buffer")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the Gaussian-cluster synthetic dataset."""

    num_classes: int
    dim: int
    per_class: int
    separation: float


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; echoed verbatim into every report."""

    increment: int
    buffer_capacity: int = 20
    regularization: float = 0.01
    clamp_epsilon: float = 0.05
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"
    disable_buffer: bool = False
    disable_oversampling: bool = False
    train_path: str | None = None
    test_path: str | None = None
    data_format: str = "binary"
    synthetic: SyntheticSpec | None = None

    def validate(self) -> "RunConfig":
        if self.increment < 1:
            raise ValueError(f"increment must be positive, got {self.increment}")
        if self.buffer_capacity < 0:
            raise ValueError(
                f"buffer_capacity must be >= 0, got {self.buffer_capacity}"
            )
        if self.regularization <= 0:
            raise ValueError(
                f"regularization must be positive, got {self.regularization}"
            )
        if not (0 < self.clamp_epsilon <= 0.5):
            raise ValueError(
                f"clamp_epsilon must be in (0, 0.5], got {self.clamp_epsilon}"
            )
        if not self.seeds:
            raise ValueError("at least one seed is required")
        has_files = self.train_path is not None or self.test_path is not None
        if has_files and (self.train_path is None or self.test_path is None):
            raise ValueError("dataset runs need both train and test paths")
        if has_files == (self.synthetic is not None):
            raise ValueError(
                "configure exactly one data source: train/test paths or synthetic"
            )
        if self.data_format not in ("binary", "csv"):
            raise ValueError(f"unknown data format {self.data_format!r}")
        return self

    def echo(self) -> dict:
        """Plain-dict snapshot of the configuration, for reports."""
        out = dataclasses.asdict(self)
        out["seeds"] = list(self.seeds)
        return out

    @classmethod
    def from_echo(cls, echo: dict) -> "RunConfig":
        """Rebuild a configuration from a report's ``config_echo`` field."""
        values = dict(echo)
        values["seeds"] = tuple(values.get("seeds", (0,)))
        if values.get("synthetic") is not None:
            values["synthetic"] = SyntheticSpec(**values["synthetic"])
        return cls(**values).validate()


def _load_data(
    config: RunConfig, seed: int
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    if config.synthetic is not None:
        spec = config.synthetic
        return generate_synthetic(
            spec.num_classes, spec.dim, spec.per_class, spec.separation, seed
        )
    train = load_embeddings(config.train_path, format=config.data_format)
    test = load_embeddings(config.test_path, format=config.data_format)
    if train.dim != test.dim:
        raise ValueError(
            f"train/test dimension mismatch: {train.dim} vs {test.dim}"
        )
    return train, test


@dataclass
class RunResult:
    """Report plus the final trained state of one seeded run."""

    report: MetricsReport
    classifier: ROLANNClassifier
    buffer: ExpansionBuffer


def run_single(config: RunConfig, seed: int) -> RunResult:
    """Train through all tasks for one seed and score after each task.

    Evaluation after task k always covers the union of test samples of all
    classes seen through task k.
    """
    config.validate()
    train, test = _load_data(config, seed)
    split, tasks = split_tasks(train, config.increment, seed)
    classifier = ROLANNClassifier(
        train.dim,
        regularization=config.regularization,
        activation=LogisticActivation(clamp_epsilon=config.clamp_epsilon),
    )
    capacity = 0 if config.disable_buffer else config.buffer_capacity
    buffer = ExpansionBuffer(train.dim, capacity, seed)
    tracker = TimeTracker()

    accuracies: list[float] = []
    for k, task_data in enumerate(tasks):
        with tracker.task():
            incremental_train(
                task_data,
                classifier,
                buffer,
                oversample=not config.disable_oversampling,
            )
        seen = split.seen_through(k)
        if set(classifier.classes) != set(seen):
            raise RuntimeError(
                f"classifier classes {sorted(classifier.classes)} diverged "
                f"from the seen set {sorted(seen)} after task {k + 1}"
            )
        held_out = test.restrict_to(seen)
        X_test, y_test = held_out.as_columns()
        accuracies.append(task_accuracy(classifier.predict(X_test), y_test))

    report = MetricsReport.from_series(
        per_task_accuracy=accuracies,
        per_task_wall_ms=tracker.per_task_ms,
        buffer_bytes=buffer.nbytes,
        config_echo=config.echo(),
        seed=seed,
        op_counts={
            "svd_calls": classifier.svd_calls,
            "samples_absorbed": classifier.samples_absorbed,
        },
    )
    return RunResult(report=report, classifier=classifier, buffer=buffer)


def run_experiment(
    config: RunConfig, save_models: bool = False
) -> list[MetricsReport]:
    """Run every configured seed and write JSON + CSV reports."""
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for seed in config.seeds:
        result = run_single(config, seed)
        result.report.write_json(out_dir / f"run_seed{seed}.json")
        result.report.write_csv(out_dir / f"run_seed{seed}.csv")
        if save_models:
            from .checkpoint import save_classifier

            save_classifier(result.classifier, out_dir / f"model_seed{seed}.cclf")
        reports.append(result.report)
    return reports


def variant_config(config: RunConfig, variant: str) -> RunConfig:
    """Configuration for one ablation variant, sharing everything else."""
    if variant == "full":
        return dataclasses.replace(
            config, disable_buffer=False, disable_oversampling=False
        )
    if variant == "no_oversampling":
        return dataclasses.replace(
            config, disable_buffer=False, disable_oversampling=True
        )
    if variant == "no_buffer":
        return dataclasses.replace(
            config, disable_buffer=True, disable_oversampling=False
        )
    raise ValueError(f"unknown ablation variant {variant!r}")


def run_ablation(config: RunConfig) -> dict[str, list[MetricsReport]]:
    """Run full / no-oversampling / no-buffer variants with shared seeds."""
    config.validate()
    results: dict[str, list[MetricsReport]] = {}
    for variant in ABLATION_VARIANTS:
        cfg = variant_config(config, variant)
        results[variant] = [run_single(cfg, seed).report for seed in config.seeds]
    return results


def ablation_table(
    results: dict[str, list[MetricsReport]]
) -> list[tuple[str, float, float]]:
    """Three rows of (variant, mean average accuracy, mean final accuracy)."""
    rows = []
    for variant in ABLATION_VARIANTS:
        reports = results[variant]
        avg = sum(r.average_accuracy for r in reports) / len(reports)
        final = sum(r.final_accuracy for r in reports) / len(reports)
        rows.append((variant, avg, final))
    return rows

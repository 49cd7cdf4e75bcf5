"""Accuracy and frugality accounting for incremental runs.

Accuracy after task k is always computed over the union of test samples of
every class seen through task k.  Memory accounting is exact integer
arithmetic; megabytes are decimal (10^6 bytes) everywhere.  The JSON report
carries only deterministic fields so that identical configurations and seeds
produce byte-identical files; wall-clock timings go to the companion CSV.
"""

from __future__ import annotations

import csv
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .cil import ExpansionBuffer

JSON_FIELDS = (
    "per_task_accuracy",
    "average_accuracy",
    "final_accuracy",
    "buffer_bytes",
)


def task_accuracy(predictions: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of exact label matches."""
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ValueError(
            f"shape mismatch: {predictions.shape} vs {truth.shape}"
        )
    if predictions.size == 0:
        raise ValueError("cannot score empty prediction vectors")
    return float(np.mean(predictions == truth))


def average_accuracy(series) -> float:
    """Arithmetic mean of a per-task accuracy series."""
    series = list(series)
    if not series:
        raise ValueError("accuracy series is empty")
    return float(sum(series) / len(series))


@dataclass(frozen=True)
class BufferMemoryReport:
    """Buffer footprint versus the raw images it replaces."""

    embedding_bytes: int
    raw_equivalent_bytes: int
    ratio: float  # raw bytes per embedding byte, per stored item


def decimal_mb(n_bytes: int) -> float:
    """Bytes as decimal megabytes (10^6), rounded to two decimals."""
    return round(n_bytes / 1_000_000, 2)


def buffer_memory_report(
    buffer: ExpansionBuffer,
    raw_image_shape: tuple[int, int, int],
    raw_dtype_bytes: int,
) -> BufferMemoryReport:
    """Compare the buffer's float32 embedding storage with raw-image storage.

    ``raw_image_shape`` is (height, width, channels); ``raw_dtype_bytes``
    is 1 for int8 images or 4 for float32.  The ratio is computed per item,
    so it is well defined even for an empty buffer.
    """
    if raw_dtype_bytes not in (1, 4):
        raise ValueError(f"raw_dtype_bytes must be 1 or 4, got {raw_dtype_bytes}")
    h, w, c = raw_image_shape
    if h < 1 or w < 1 or c < 1:
        raise ValueError(f"invalid raw image shape {raw_image_shape}")
    per_embedding = buffer.dim * 4
    per_raw = h * w * c * raw_dtype_bytes
    n = buffer.total_vectors
    return BufferMemoryReport(
        embedding_bytes=n * per_embedding,
        raw_equivalent_bytes=n * per_raw,
        ratio=per_raw / per_embedding,
    )


class TimeTracker:
    """Monotonic wall-clock tracking with one entry per task."""

    def __init__(self) -> None:
        self.per_task_ms: list[int] = []

    @contextmanager
    def task(self):
        start = time.perf_counter_ns()
        yield
        self.per_task_ms.append((time.perf_counter_ns() - start) // 1_000_000)

    @contextmanager
    def measure(self):
        """Time an arbitrary scope without recording it as a task."""
        timing = _Timing()
        start = time.perf_counter_ns()
        try:
            yield timing
        finally:
            timing.elapsed_ms = (time.perf_counter_ns() - start) // 1_000_000

    @property
    def total_ms(self) -> int:
        return sum(self.per_task_ms)


class _Timing:
    elapsed_ms: int = 0


@dataclass
class MetricsReport:
    """Per-run results: accuracy series, timings, memory, configuration."""

    per_task_accuracy: list[float]
    average_accuracy: float
    final_accuracy: float
    per_task_wall_ms: list[int]
    buffer_bytes: int
    config_echo: dict
    seed: int = 0
    op_counts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.per_task_accuracy:
            raise ValueError("per_task_accuracy must be non-empty")
        recomputed = average_accuracy(self.per_task_accuracy)
        if abs(recomputed - self.average_accuracy) > 1e-12:
            raise ValueError(
                f"average_accuracy {self.average_accuracy} inconsistent with "
                f"series mean {recomputed}"
            )
        if self.final_accuracy != self.per_task_accuracy[-1]:
            raise ValueError("final_accuracy must equal the last series entry")

    @classmethod
    def from_series(
        cls,
        per_task_accuracy,
        per_task_wall_ms,
        buffer_bytes: int,
        config_echo: dict,
        seed: int = 0,
        op_counts: dict | None = None,
    ) -> "MetricsReport":
        series = [float(a) for a in per_task_accuracy]
        return cls(
            per_task_accuracy=series,
            average_accuracy=average_accuracy(series),
            final_accuracy=series[-1],
            per_task_wall_ms=[int(ms) for ms in per_task_wall_ms],
            buffer_bytes=int(buffer_bytes),
            config_echo=dict(config_echo),
            seed=seed,
            op_counts=dict(op_counts or {}),
        )

    def to_json_dict(self) -> dict:
        """Deterministic report fields (timings are CSV-only by design)."""
        return {
            "per_task_accuracy": self.per_task_accuracy,
            "average_accuracy": self.average_accuracy,
            "final_accuracy": self.final_accuracy,
            "buffer_bytes": self.buffer_bytes,
            "config_echo": self.config_echo,
            "seed": self.seed,
            "op_counts": self.op_counts,
        }

    def to_json_bytes(self) -> bytes:
        text = json.dumps(self.to_json_dict(), sort_keys=True, indent=2)
        return (text + "\n").encode("utf-8")

    def write_json(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_json_bytes())

    def write_csv(self, path) -> None:
        """Per-task rows ``task,accuracy,wall_ms`` (1-based task index)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["task", "accuracy", "wall_ms"])
            for i, (acc, ms) in enumerate(
                zip(self.per_task_accuracy, self.per_task_wall_ms), start=1
            ):
                writer.writerow([i, repr(acc), ms])


def load_report(json_path) -> MetricsReport:
    """Rebuild a report from its JSON file (wall-clock defaults to zeros)."""
    with open(json_path, "rb") as fh:
        data = json.loads(fh.read().decode("utf-8"))
    for name in JSON_FIELDS:
        if name not in data:
            raise ValueError(f"{json_path}: missing report field {name!r}")
    return MetricsReport(
        per_task_accuracy=list(data["per_task_accuracy"]),
        average_accuracy=data["average_accuracy"],
        final_accuracy=data["final_accuracy"],
        per_task_wall_ms=[0] * len(data["per_task_accuracy"]),
        buffer_bytes=data["buffer_bytes"],
        config_echo=data.get("config_echo", {}),
        seed=data.get("seed", 0),
        op_counts=data.get("op_counts", {}),
    )

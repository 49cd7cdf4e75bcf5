"""Embedding datasets: file formats, task splitting, synthetic generation.

Datasets hold d-dimensional float32 embeddings with dense non-negative
integer class labels.  The binary file format is little-endian throughout:

    header  = magic "CEMB" | version u32 (=1) | dim u32 | count u64
              | label_width u32 (=4)
    payload = count * (label u32, dim * float32)

The payload is record-interleaved, 4 bytes per float, so stored buffers and
files share the same per-vector memory accounting.  A CSV alternative uses
header-less ``label,v0,...,v{D-1}`` rows.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

MAGIC = b"CEMB"
FORMAT_VERSION = 1
LABEL_WIDTH = 4
_HEADER_BYTES = 4 + 4 + 4 + 8 + 4


@dataclass
class EmbeddingDataset:
    """Labeled embedding vectors, stored row-per-sample in float32."""

    embeddings: np.ndarray  # (n, dim) float32
    labels: np.ndarray  # (n,) int64, non-negative

    def __post_init__(self) -> None:
        self.embeddings = np.ascontiguousarray(self.embeddings, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2:
            raise ValueError(
                f"embeddings must be 2-d, got shape {self.embeddings.shape}"
            )
        if self.labels.shape != (self.embeddings.shape[0],):
            raise ValueError(
                f"label count {self.labels.shape} does not match "
                f"{self.embeddings.shape[0]} embeddings"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be non-negative")
        self._class_index: dict[int, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def classes(self) -> list[int]:
        return sorted(self.class_index)

    @property
    def class_index(self) -> dict[int, np.ndarray]:
        """Record indices per class id."""
        if self._class_index is None:
            index: dict[int, list[int]] = {}
            for i, label in enumerate(self.labels.tolist()):
                index.setdefault(label, []).append(i)
            self._class_index = {
                c: np.asarray(idx, dtype=np.int64) for c, idx in index.items()
            }
        return self._class_index

    def class_sizes(self) -> dict[int, int]:
        return {c: idx.size for c, idx in self.class_index.items()}

    def as_columns(self) -> tuple[np.ndarray, np.ndarray]:
        """Float64 column-per-sample matrix and labels, for the learner."""
        return self.embeddings.T.astype(np.float64), self.labels.copy()

    def subset(self, indices: np.ndarray) -> "EmbeddingDataset":
        return EmbeddingDataset(self.embeddings[indices], self.labels[indices])

    def restrict_to(self, class_ids) -> "EmbeddingDataset":
        """Records whose labels belong to ``class_ids``, order preserved."""
        wanted = np.isin(self.labels, np.asarray(sorted(class_ids), dtype=np.int64))
        return self.subset(np.flatnonzero(wanted))


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("vec", "<f4", (dim,))])


def save_embeddings(dataset: EmbeddingDataset, path) -> None:
    """Write a dataset in the binary embedding format (bit-exact payload)."""
    header = io.BytesIO()
    header.write(MAGIC)
    header.write(
        struct.pack("<IIQI", FORMAT_VERSION, dataset.dim, len(dataset), LABEL_WIDTH)
    )
    records = np.empty(len(dataset), dtype=_record_dtype(dataset.dim))
    records["label"] = dataset.labels.astype(np.uint32)
    records["vec"] = dataset.embeddings
    with open(path, "wb") as fh:
        fh.write(header.getvalue())
        fh.write(records.tobytes())


def _load_binary(path) -> EmbeddingDataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER_BYTES:
        raise DataFormatError(
            f"{path}: truncated header, expected {_HEADER_BYTES} bytes, "
            f"got {len(raw)}"
        )
    if raw[:4] != MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {raw[:4]!r} at byte offset 0, expected {MAGIC!r}"
        )
    version = int(np.frombuffer(raw, dtype="<u4", count=1, offset=4)[0])
    if version != FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported version {version} at byte offset 4"
        )
    dim = int(np.frombuffer(raw, dtype="<u4", count=1, offset=8)[0])
    count = int(np.frombuffer(raw, dtype="<u8", count=1, offset=12)[0])
    label_width = int(np.frombuffer(raw, dtype="<u4", count=1, offset=20)[0])
    if label_width != LABEL_WIDTH:
        raise DataFormatError(
            f"{path}: unsupported label width {label_width} at byte offset 20"
        )
    if dim < 1:
        raise DataFormatError(f"{path}: dimension must be positive, got {dim}")
    expected = count * (LABEL_WIDTH + 4 * dim)
    actual = len(raw) - _HEADER_BYTES
    if actual != expected:
        raise DataFormatError(
            f"{path}: payload size mismatch, expected {expected} bytes "
            f"after the header, got {actual}"
        )
    records = np.frombuffer(raw, dtype=_record_dtype(dim), count=count,
                            offset=_HEADER_BYTES)
    return EmbeddingDataset(
        embeddings=records["vec"].reshape(count, dim).copy(),
        labels=records["label"].astype(np.int64),
    )


def _load_csv(path) -> EmbeddingDataset:
    labels: list[int] = []
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DataFormatError(
                        f"{path}:{line_no}: need a label plus at least one value"
                    )
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}:{line_no}: row has {len(row)} fields, expected {width}"
                )
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
    if width is None:
        raise DataFormatError(f"{path}: empty CSV file")
    return EmbeddingDataset(
        embeddings=np.asarray(rows, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
    )


def load_embeddings(path, format: str = "binary") -> EmbeddingDataset:
    """Read a dataset from disk; ``format`` is ``"binary"`` or ``"csv"``."""
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown format {format!r}, expected 'binary' or 'csv'")


def save_embeddings_csv(dataset: EmbeddingDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for label, vec in zip(dataset.labels.tolist(), dataset.embeddings):
            writer.writerow([label] + [repr(float(v)) for v in vec])


@dataclass(frozen=True)
class TaskSplit:
    """Ordered partition of class ids into disjoint task groups."""

    groups: tuple[tuple[int, ...], ...]
    shuffle_seed: int

    @property
    def num_tasks(self) -> int:
        return len(self.groups)

    def seen_through(self, task_index: int) -> list[int]:
        """Union of class ids of tasks 0..task_index."""
        seen: list[int] = []
        for group in self.groups[: task_index + 1]:
            seen.extend(group)
        return seen


def split_tasks(
    dataset: EmbeddingDataset, increment: int, seed: int
) -> tuple[TaskSplit, list[EmbeddingDataset]]:
    """Shuffle classes and partition them into consecutive same-size groups.

    The last group may be smaller when the class count is not a multiple of
    ``increment``.  Each per-task dataset holds exactly the records of its
    group's classes, in the original record order.
    """
    classes = sorted(dataset.class_index)
    if increment < 1:
        raise ValueError(f"increment must be positive, got {increment}")
    if increment > len(classes):
        raise ValueError(
            f"increment {increment} exceeds the {len(classes)} available classes"
        )
    rng = np.random.default_rng(seed)
    order = [classes[i] for i in rng.permutation(len(classes))]
    groups = tuple(
        tuple(order[i : i + increment]) for i in range(0, len(order), increment)
    )
    tasks = [dataset.restrict_to(group) for group in groups]
    return TaskSplit(groups=groups, shuffle_seed=seed), tasks


def generate_synthetic(
    num_classes: int,
    dim: int,
    per_class: int,
    separation: float,
    seed: int,
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Isotropic Gaussian classes with controlled mean separation.

    Class means are scaled so the minimum pairwise distance equals
    ``separation`` (in units of the within-class standard deviation, which
    is 1); ``separation = 0`` collapses all means to the origin.  Each
    class contributes ``per_class`` samples, split 80/20 into train and
    test.  Fully deterministic under ``seed``.
    """
    if num_classes < 1 or dim < 1 or per_class < 1:
        raise ValueError("num_classes, dim and per_class must be positive")
    if separation < 0:
        raise ValueError(f"separation must be non-negative, got {separation}")
    rng = np.random.default_rng(seed)
    if separation == 0:
        means = np.zeros((num_classes, dim))
    else:
        means = rng.normal(size=(num_classes, dim))
        if num_classes > 1:
            diffs = means[:, None, :] - means[None, :, :]
            dist = np.linalg.norm(diffs, axis=-1)
            dist[np.diag_indices(num_classes)] = np.inf
            means *= separation / dist.min()

    n_train = int(round(0.8 * per_class))
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(num_classes):
        samples = means[c] + rng.normal(size=(per_class, dim))
        train_x.append(samples[:n_train])
        train_y.append(np.full(n_train, c, dtype=np.int64))
        test_x.append(samples[n_train:])
        test_y.append(np.full(per_class - n_train, c, dtype=np.int64))
    train = EmbeddingDataset(
        np.vstack(train_x).astype(np.float32), np.concatenate(train_y)
    )
    test = EmbeddingDataset(
        np.vstack(test_x).astype(np.float32), np.concatenate(test_y)
    )
    return train, test

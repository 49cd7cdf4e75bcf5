"""Class-incremental engine: expansion buffer, oversampling, per-task training.

Each completed task deposits a small random sample of its embeddings into the
expansion buffer.  When a later task arrives, the classifier grows output
neurons for the new classes and trains on the task's data concatenated with
the replayed buffer contents, so the fresh neurons see earlier classes as
negatives instead of never seeing them at all.  Replayed classes are
replicated to roughly match the largest current class, which keeps the
closed-form solve from being dominated by the new task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset
from .rolann import ROLANNClassifier


@dataclass
class ReplaySet:
    """Buffered embeddings expanded for one training round.

    ``replication_factors`` records how many copies of each buffered class's
    stored samples were emitted.
    """

    embeddings: np.ndarray  # (dim, n) float64
    labels: np.ndarray  # (n,) int64
    replication_factors: dict[int, int]

    @property
    def num_samples(self) -> int:
        return self.embeddings.shape[1]


class ExpansionBuffer:
    """Per-class store of embedding vectors from completed tasks.

    Holds at most ``capacity_per_class`` float32 vectors per class, drawn
    uniformly without replacement by a generator seeded at construction.
    Entries are immutable once stored; classes are only ever appended.
    """

    def __init__(self, dim: int, capacity_per_class: int, seed: int):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        if capacity_per_class < 0:
            raise ValueError(
                f"capacity_per_class must be >= 0, got {capacity_per_class}"
            )
        self.dim = int(dim)
        self.capacity_per_class = int(capacity_per_class)
        self.seed = int(seed)
        self._rng = np.random.default_rng(seed)
        self._store: dict[int, np.ndarray] = {}  # class id -> (k, dim) float32

    @property
    def classes(self) -> list[int]:
        """Stored class ids in insertion order."""
        return list(self._store)

    def count(self, class_id: int) -> int:
        return self._store[class_id].shape[0]

    def vectors(self, class_id: int) -> np.ndarray:
        return self._store[class_id]

    @property
    def total_vectors(self) -> int:
        return sum(arr.shape[0] for arr in self._store.values())

    @property
    def nbytes(self) -> int:
        """Exact storage footprint: vectors * dim * 4 bytes (float32)."""
        return self.total_vectors * self.dim * 4

    def update(self, task_data: EmbeddingDataset) -> "ExpansionBuffer":
        """Sample and store embeddings of a just-completed task's classes.

        Classes already present are never resampled or evicted; attempting
        to re-add one is an error.
        """
        if task_data.dim != self.dim:
            raise ValueError(
                f"dimension mismatch: buffer is {self.dim}-d, "
                f"task data is {task_data.dim}-d"
            )
        for class_id in sorted(task_data.class_index):
            if class_id in self._store:
                raise ValueError(f"class {class_id} already buffered")
            indices = task_data.class_index[class_id]
            take = min(self.capacity_per_class, indices.size)
            chosen = self._rng.choice(indices, size=take, replace=False)
            stored = task_data.embeddings[np.sort(chosen)].copy()
            stored.setflags(write=False)  # entries are immutable once stored
            self._store[class_id] = stored
        return self


def oversample_buffer(
    task_data: EmbeddingDataset,
    buffer: ExpansionBuffer,
    replicate: bool = True,
) -> ReplaySet:
    """Expand the buffer into a replay batch balanced against the task.

    Each buffered class with ``n_c`` stored vectors is emitted
    ``max(1, n_max // n_c)`` times, where ``n_max`` is the largest class
    size in the current task; the floor never drops a class entirely.  With
    ``replicate=False`` every stored vector is emitted exactly once.  An
    empty buffer yields an empty replay set.
    """
    if len(task_data) == 0:
        raise ValueError("task data must be non-empty")
    n_max = max(task_data.class_sizes().values())
    blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    factors: dict[int, int] = {}
    for class_id in buffer.classes:
        stored = buffer.vectors(class_id)
        n_c = stored.shape[0]
        if n_c == 0:
            continue
        r_c = max(1, n_max // n_c) if replicate else 1
        factors[class_id] = r_c
        block = stored.T.astype(np.float64)
        blocks.append(np.tile(block, (1, r_c)))
        labels.append(np.full(n_c * r_c, class_id, dtype=np.int64))
    if not blocks:
        return ReplaySet(
            embeddings=np.zeros((task_data.dim, 0)),
            labels=np.zeros(0, dtype=np.int64),
            replication_factors={},
        )
    return ReplaySet(
        embeddings=np.hstack(blocks),
        labels=np.concatenate(labels),
        replication_factors=factors,
    )


def expand_classifier(
    classifier: ROLANNClassifier, new_classes
) -> ROLANNClassifier:
    """Add output neurons for a task's new classes (no prior knowledge)."""
    return classifier.add_classes(sorted(int(c) for c in new_classes))


def incremental_train(
    task_data: EmbeddingDataset,
    classifier: ROLANNClassifier,
    buffer: ExpansionBuffer,
    oversample: bool = True,
) -> tuple[ROLANNClassifier, ExpansionBuffer]:
    """Run one task through the incremental training sequence.

    Expands the classifier with the task's classes, replays the buffer
    (optionally without replication), trains on the concatenation of task
    and replay samples, and finally stores a sample of the task into the
    buffer.  Task classes must be disjoint from everything seen before.
    """
    if len(task_data) == 0:
        raise ValueError("task data must be non-empty")
    task_classes = sorted(task_data.class_index)
    overlap = [c for c in task_classes if c in set(classifier.classes)]
    if overlap:
        raise ValueError(f"task classes already known to the classifier: {overlap}")

    expand_classifier(classifier, task_classes)
    replay = oversample_buffer(task_data, buffer, replicate=oversample)
    X_task, y_task = task_data.as_columns()
    if replay.num_samples:
        X = np.hstack([X_task, replay.embeddings])
        y = np.concatenate([y_task, replay.labels])
    else:
        X, y = X_task, y_task
    classifier.partial_fit(X, y)
    buffer.update(task_data)
    return classifier, buffer

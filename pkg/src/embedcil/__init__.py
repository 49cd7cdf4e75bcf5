"""Class-incremental learning on fixed embeddings.

A closed-form, non-iterative one-layer classifier grows output neurons as
new classes arrive; an expansion buffer replays compressed embeddings of
past classes, with temporal oversampling, so fresh neurons stay calibrated
against everything seen before.
"""

from .cil import ExpansionBuffer, ReplaySet, incremental_train, oversample_buffer
from .data import (
    EmbeddingDataset,
    TaskSplit,
    generate_synthetic,
    load_embeddings,
    save_embeddings,
    split_tasks,
)
from .errors import DataFormatError, NotTrainedError, NumericalError
from .experiment import RunConfig, SyntheticSpec, run_ablation, run_experiment, run_single
from .metrics import (
    BufferMemoryReport,
    MetricsReport,
    TimeTracker,
    average_accuracy,
    buffer_memory_report,
    decimal_mb,
    task_accuracy,
)
from .rolann import (
    LogisticActivation,
    NeuronKnowledge,
    ROLANNClassifier,
    augment_bias,
    encode_targets,
    merge_classifiers,
    merge_knowledge,
    solve_weights,
    train_neuron,
)

__version__ = "0.1.0"

__all__ = [
    "BufferMemoryReport",
    "DataFormatError",
    "EmbeddingDataset",
    "ExpansionBuffer",
    "LogisticActivation",
    "MetricsReport",
    "NeuronKnowledge",
    "NotTrainedError",
    "NumericalError",
    "ROLANNClassifier",
    "ReplaySet",
    "RunConfig",
    "SyntheticSpec",
    "TaskSplit",
    "TimeTracker",
    "augment_bias",
    "average_accuracy",
    "buffer_memory_report",
    "decimal_mb",
    "encode_targets",
    "generate_synthetic",
    "incremental_train",
    "load_embeddings",
    "merge_classifiers",
    "merge_knowledge",
    "oversample_buffer",
    "run_ablation",
    "run_experiment",
    "run_single",
    "save_embeddings",
    "solve_weights",
    "split_tasks",
    "task_accuracy",
    "train_neuron",
]

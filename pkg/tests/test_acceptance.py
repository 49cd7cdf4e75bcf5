"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints a single ``[ACCEPTANCE] PASS/FAIL`` line (visible with
``pytest -s`` or in captured output).  Criteria that involve randomness use
fixed seeds; runtime budgets are asserted where the criterion states one.
"""

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embedcil.cil import ExpansionBuffer, incremental_train, oversample_buffer
from embedcil.cli import main
from embedcil.data import EmbeddingDataset, generate_synthetic, split_tasks
from embedcil.experiment import RunConfig, SyntheticSpec, run_single
from embedcil.metrics import buffer_memory_report, decimal_mb
from embedcil.rolann import ROLANNClassifier, merge_classifiers
from oracles import dense_ridge_weights, rel_error

BENCHMARK_SEEDS = (0, 1, 2)


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] FAIL {name}")
        raise
    print(f"\n[ACCEPTANCE] PASS {name}")


def _benchmark_config(separation=8.0, **overrides) -> RunConfig:
    values = dict(
        increment=2,
        buffer_capacity=20,
        seeds=BENCHMARK_SEEDS,
        synthetic=SyntheticSpec(
            num_classes=10, dim=16, per_class=250, separation=separation
        ),
    )
    values.update(overrides)
    return RunConfig(**values)


def test_oracle_equivalence_against_dense_solve():
    """100 random instances: closed-form weights match a dense ridge solve."""
    with criterion("oracle equivalence (1e-8 relative, < 10 s)"):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            dim = int(rng.integers(2, 21))
            n = int(rng.integers(5, 201))
            num_classes = int(rng.integers(1, 6))
            lam = float(rng.choice([0.01, 1.0]))
            X = rng.normal(size=(dim, n))
            labels = rng.integers(0, num_classes, size=n)
            clf = ROLANNClassifier(dim, regularization=lam)
            clf.add_classes(range(num_classes))
            clf.partial_fit(X, labels)
            for c in range(num_classes):
                expected = dense_ridge_weights(X, labels, c, lam)
                worst = max(worst, rel_error(clf.weights(c), expected))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-8, f"worst relative error {worst:.3e}"
        assert elapsed < 10.0, f"took {elapsed:.1f} s"


def test_incremental_equals_batch_and_merge():
    """Sequential, shard-merged and permuted trainings match single-batch."""
    with criterion("incremental == batch == merged shards (1e-6, < 30 s)"):
        start = time.perf_counter()
        rng = np.random.default_rng(7)
        for _ in range(50):
            dim = int(rng.integers(2, 13))
            num_classes = int(rng.integers(1, 5))
            parts = int(rng.integers(2, 9))
            n = int(rng.integers(parts * 2, 150))
            X = rng.normal(size=(dim, n))
            labels = rng.integers(0, num_classes, size=n)

            batch = ROLANNClassifier(dim).add_classes(range(num_classes))
            batch.partial_fit(X, labels)

            cuts = np.sort(
                rng.choice(np.arange(1, n), size=parts - 1, replace=False)
            )
            pieces = np.split(np.arange(n), cuts)

            sequential = ROLANNClassifier(dim).add_classes(range(num_classes))
            for piece in pieces:
                sequential.partial_fit(X[:, piece], labels[piece])

            permuted = ROLANNClassifier(dim).add_classes(range(num_classes))
            for i in rng.permutation(len(pieces)):
                permuted.partial_fit(X[:, pieces[i]], labels[pieces[i]])

            merged = None
            for piece in pieces:
                shard = ROLANNClassifier(dim).add_classes(range(num_classes))
                shard.partial_fit(X[:, piece], labels[piece])
                merged = shard if merged is None else merge_classifiers(merged, shard)

            for c in range(num_classes):
                reference = batch.weights(c)
                assert rel_error(sequential.weights(c), reference) <= 1e-6
                assert rel_error(permuted.weights(c), reference) <= 1e-6
                assert rel_error(merged.weights(c), reference) <= 1e-6
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"took {elapsed:.1f} s"


def test_synthetic_cil_benchmark_accuracy():
    """10 Gaussian classes at 8 sigma: A_5 >= 0.95; chance at 0 sigma."""
    with criterion("synthetic benchmark A_5 >= 0.95 and chance level (< 60 s)"):
        start = time.perf_counter()
        separated = _benchmark_config(separation=8.0)
        for seed in BENCHMARK_SEEDS:
            result = run_single(separated, seed)
            assert result.report.final_accuracy >= 0.95, (
                f"seed {seed}: A_5 = {result.report.final_accuracy:.4f}"
            )
        overlapping = _benchmark_config(separation=0.0)
        for seed in BENCHMARK_SEEDS:
            result = run_single(overlapping, seed)
            assert abs(result.report.final_accuracy - 0.10) <= 0.10, (
                f"seed {seed}: chance run gave {result.report.final_accuracy:.4f}"
            )
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"took {elapsed:.1f} s"


def test_ablation_ordering_matches_reported_direction():
    """Full method dominates no-oversampling dominates no-buffer, per seed.

    At 8 sigma every replay-bearing variant saturates at ~100% accuracy and
    the strict ordering degenerates into ties, so the ablation runs the same
    benchmark at 3 sigma, where the components measurably matter; only the
    direction is asserted, never absolute gaps.
    """
    with criterion("ablation direction full > no-oversampling > no-buffer"):
        for seed in BENCHMARK_SEEDS:
            averages = {}
            for variant, flags in {
                "full": {},
                "no_oversampling": {"disable_oversampling": True},
                "no_buffer": {"disable_buffer": True},
            }.items():
                config = _benchmark_config(separation=3.0, **flags)
                averages[variant] = run_single(config, seed).report.average_accuracy
            assert (
                averages["full"]
                > averages["no_oversampling"]
                > averages["no_buffer"]
            ), f"seed {seed}: {averages}"


def test_buffer_calibrates_new_neuron_activations():
    """New task's neurons respond less to old-class inputs when buffered."""
    with criterion("calibration: buffered new neurons activate lower"):
        for seed in BENCHMARK_SEEDS:
            train, test = generate_synthetic(10, 16, 250, 8.0, seed)
            split, tasks = split_tasks(train, increment=2, seed=seed)
            means = {}
            for capacity in (20, 0):
                clf = ROLANNClassifier(16)
                buffer = ExpansionBuffer(16, capacity_per_class=capacity, seed=seed)
                for task in tasks[:2]:
                    incremental_train(task, clf, buffer)
                first_task_inputs, _ = test.restrict_to(split.groups[0]).as_columns()
                probabilities = clf.predict_proba(first_task_inputs)
                rows = [
                    i
                    for i, c in enumerate(clf.classes)
                    if c in set(split.groups[1])
                ]
                means[capacity] = float(np.mean(probabilities[rows]))
            assert means[20] < means[0], f"seed {seed}: {means}"


def test_buffer_memory_model_reproduces_reported_table():
    """2,000 stored 512-d float32 vectors: 4.10 MB vs ~1.2 GB raw float32."""
    with criterion("memory model: 4.10 MB embeddings vs raw-image equivalents"):
        rng = np.random.default_rng(0)
        data = EmbeddingDataset(
            rng.normal(size=(2000, 512)).astype(np.float32),
            np.repeat(np.arange(100), 20),
        )
        buffer = ExpansionBuffer(dim=512, capacity_per_class=20, seed=0)
        buffer.update(data)
        assert buffer.total_vectors == 2000

        report = buffer_memory_report(buffer, (224, 224, 3), 4)
        assert report.embedding_bytes == 4_096_000
        assert decimal_mb(report.embedding_bytes) == 4.10
        assert report.raw_equivalent_bytes == 1_204_224_000
        assert decimal_mb(report.raw_equivalent_bytes) == 1204.22
        # the published table prints 1,206.40 MB for this row, 0.18% off the
        # exact decimal-MB arithmetic; match it within that transcription slack
        assert abs(decimal_mb(report.raw_equivalent_bytes) - 1206.40) <= 2.5
        assert report.ratio == pytest.approx(294.0)


@given(
    n_max=st.integers(min_value=1, max_value=10**9),
    n_stored=st.integers(min_value=1, max_value=10**9),
)
@settings(max_examples=300, deadline=None)
def test_oversampling_arithmetic_property(n_max, n_stored):
    """floor-based replication satisfies its sandwich bound; zero clamps to 1."""
    floor = n_max // n_stored
    r = max(1, floor)
    if floor >= 1:
        assert r * n_stored <= n_max < (r + 1) * n_stored
    else:
        assert r == 1


def test_oversampling_arithmetic_reported():
    # companion to the property test so the criterion prints its line once
    with criterion("oversampling arithmetic sandwich + clamp-to-1"):
        buffer = ExpansionBuffer(dim=2, capacity_per_class=20, seed=0)
        rng = np.random.default_rng(1)
        buffer.update(
            EmbeddingDataset(
                rng.normal(size=(30, 2)).astype(np.float32),
                np.zeros(30, dtype=np.int64),
            )
        )
        task = EmbeddingDataset(
            rng.normal(size=(500, 2)).astype(np.float32),
            np.ones(500, dtype=np.int64),
        )
        replay = oversample_buffer(task, buffer)
        assert replay.replication_factors == {0: 25}
        assert replay.num_samples == 500


def test_repeated_cli_runs_are_byte_identical(tmp_path):
    """Same config and seed, run twice: JSON reports match byte for byte."""
    with criterion("determinism: byte-identical JSON reports"):
        out = tmp_path / "runs"
        args = [
            "train",
            "--increment",
            "2",
            "--seeds",
            "0",
            "--synth-classes",
            "10",
            "--synth-dim",
            "16",
            "--synth-per-class",
            "50",
            "--synth-separation",
            "8.0",
            "--output-dir",
            str(out),
        ]
        assert main(args) == 0
        first = (out / "run_seed0.json").read_bytes()
        assert main(args) == 0
        second = (out / "run_seed0.json").read_bytes()
        assert first == second


CIFAR_EXPORT_DIR = Path("data/cifar100")


@pytest.mark.skipif(
    not (
        (CIFAR_EXPORT_DIR / "train.cemb").exists()
        and (CIFAR_EXPORT_DIR / "test.cemb").exists()
    ),
    reason="optional real-data check: export CIFAR-100 embeddings to "
    "data/cifar100/{train,test}.cemb first (see exporter/)",
)
def test_real_data_sanity_optional():
    """CIFAR-100 embeddings, increment 10: A_10 >= 0.50, mean accuracy ~73."""
    with criterion("real-data sanity (optional, CIFAR-100 export)"):
        config = RunConfig(
            increment=10,
            buffer_capacity=20,
            seeds=(0,),
            train_path=str(CIFAR_EXPORT_DIR / "train.cemb"),
            test_path=str(CIFAR_EXPORT_DIR / "test.cemb"),
        )
        start = time.perf_counter()
        result = run_single(config, 0)
        elapsed = time.perf_counter() - start
        assert result.report.final_accuracy >= 0.50
        assert abs(result.report.average_accuracy * 100 - 72.93) <= 5.0
        assert elapsed < 15 * 60

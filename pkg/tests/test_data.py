"""Dataset I/O, task splitting and the synthetic generator."""

import numpy as np
import pytest

from embedcil.data import (
    EmbeddingDataset,
    generate_synthetic,
    load_embeddings,
    save_embeddings,
    save_embeddings_csv,
    split_tasks,
)
from embedcil.errors import DataFormatError
from embedcil.rolann import ROLANNClassifier


def _random_dataset(n, dim, num_classes=4, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingDataset(
        rng.normal(size=(n, dim)).astype(np.float32),
        rng.integers(0, num_classes, size=n),
    )


# ---------------------------------------------------------------------------
# binary format


class TestBinaryFormat:
    def test_round_trip_is_bit_identical(self, tmp_path):
        dataset = _random_dataset(123, 7)
        path = tmp_path / "data.cemb"
        save_embeddings(dataset, path)
        loaded = load_embeddings(path)
        np.testing.assert_array_equal(loaded.embeddings, dataset.embeddings)
        np.testing.assert_array_equal(loaded.labels, dataset.labels)
        # re-saving reproduces the same bytes
        second = tmp_path / "again.cemb"
        save_embeddings(loaded, second)
        assert path.read_bytes() == second.read_bytes()

    def test_header_echo(self, tmp_path):
        dataset = _random_dataset(2000, 512, num_classes=10, seed=1)
        path = tmp_path / "big.cemb"
        save_embeddings(dataset, path)
        loaded = load_embeddings(path)
        assert len(loaded) == 2000
        assert loaded.dim == 512

    def test_empty_dataset_round_trips(self, tmp_path):
        dataset = EmbeddingDataset(
            np.zeros((0, 5), dtype=np.float32), np.zeros(0, dtype=np.int64)
        )
        path = tmp_path / "empty.cemb"
        save_embeddings(dataset, path)
        loaded = load_embeddings(path)
        assert len(loaded) == 0
        assert loaded.dim == 5

    def test_truncated_payload_reports_byte_counts(self, tmp_path):
        dataset = _random_dataset(10, 4)
        path = tmp_path / "cut.cemb"
        save_embeddings(dataset, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-7])
        with pytest.raises(DataFormatError, match=r"expected 200 bytes.*got 193"):
            load_embeddings(path)

    def test_bad_magic_reports_offset_zero(self, tmp_path):
        path = tmp_path / "junk.cemb"
        path.write_bytes(b"XEMB" + bytes(20))
        with pytest.raises(DataFormatError, match="byte offset 0"):
            load_embeddings(path)

    def test_bad_version_reports_offset(self, tmp_path):
        dataset = _random_dataset(3, 2)
        path = tmp_path / "v9.cemb"
        save_embeddings(dataset, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = (9).to_bytes(4, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(DataFormatError, match="version 9 at byte offset 4"):
            load_embeddings(path)

    def test_short_header_is_rejected(self, tmp_path):
        path = tmp_path / "short.cemb"
        path.write_bytes(b"CEMB\x01")
        with pytest.raises(DataFormatError, match="truncated header"):
            load_embeddings(path)


# ---------------------------------------------------------------------------
# CSV format


class TestCsvFormat:
    def test_round_trip(self, tmp_path):
        dataset = _random_dataset(17, 3)
        path = tmp_path / "data.csv"
        save_embeddings_csv(dataset, path)
        loaded = load_embeddings(path, format="csv")
        np.testing.assert_array_equal(loaded.embeddings, dataset.embeddings)
        np.testing.assert_array_equal(loaded.labels, dataset.labels)

    def test_ragged_row_reports_line_number(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("0,1.0,2.0\n1,3.0\n")
        with pytest.raises(DataFormatError, match="ragged.csv:2"):
            load_embeddings(path, format="csv")

    def test_unparsable_value_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0,1.0\n1,zap\n")
        with pytest.raises(DataFormatError, match="bad.csv:2"):
            load_embeddings(path, format="csv")

    def test_unknown_format_is_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            load_embeddings(tmp_path / "x", format="parquet")


# ---------------------------------------------------------------------------
# task splitting


class TestSplitTasks:
    def test_hundred_classes_in_fives(self):
        rng = np.random.default_rng(2)
        dataset = EmbeddingDataset(
            rng.normal(size=(200, 2)).astype(np.float32),
            np.tile(np.arange(100), 2),
        )
        split, tasks = split_tasks(dataset, increment=5, seed=0)
        assert split.num_tasks == 20
        assert all(len(g) == 5 for g in split.groups)
        flat = [c for g in split.groups for c in g]
        assert sorted(flat) == sorted(dataset.class_index)

    def test_single_task_degenerate_case(self):
        dataset = _random_dataset(60, 2, num_classes=10, seed=3)
        split, tasks = split_tasks(dataset, increment=10, seed=0)
        assert split.num_tasks == 1
        assert len(tasks[0]) == len(dataset)

    def test_same_seed_means_same_order(self):
        dataset = _random_dataset(90, 2, num_classes=9, seed=4)
        a, _ = split_tasks(dataset, increment=3, seed=11)
        b, _ = split_tasks(dataset, increment=3, seed=11)
        assert a.groups == b.groups

    def test_records_are_conserved(self):
        dataset = _random_dataset(150, 2, num_classes=7, seed=5)
        _, tasks = split_tasks(dataset, increment=3, seed=1)
        assert sum(len(t) for t in tasks) == len(dataset)
        # uneven split: last group is smaller
        assert [len(g) for g in split_tasks(dataset, 3, 1)[0].groups] == [3, 3, 1]

    def test_task_datasets_contain_only_their_classes(self):
        dataset = _random_dataset(150, 2, num_classes=6, seed=6)
        split, tasks = split_tasks(dataset, increment=2, seed=2)
        for group, task in zip(split.groups, tasks):
            assert set(task.class_index) == set(group)

    def test_bad_increment_is_rejected(self):
        dataset = _random_dataset(20, 2, num_classes=4, seed=7)
        with pytest.raises(ValueError):
            split_tasks(dataset, increment=0, seed=0)
        with pytest.raises(ValueError):
            split_tasks(dataset, increment=5, seed=0)


# ---------------------------------------------------------------------------
# synthetic generation


class TestGenerateSynthetic:
    def test_identical_seeds_are_byte_identical(self, tmp_path):
        a_train, a_test = generate_synthetic(5, 8, 30, 4.0, seed=9)
        b_train, b_test = generate_synthetic(5, 8, 30, 4.0, seed=9)
        for a, b in ((a_train, b_train), (a_test, b_test)):
            pa, pb = tmp_path / "a.cemb", tmp_path / "b.cemb"
            save_embeddings(a, pa)
            save_embeddings(b, pb)
            assert pa.read_bytes() == pb.read_bytes()

    def test_split_sizes_are_eighty_twenty(self):
        train, test = generate_synthetic(4, 6, 250, 8.0, seed=0)
        assert train.class_sizes() == {c: 200 for c in range(4)}
        assert test.class_sizes() == {c: 50 for c in range(4)}

    def test_zero_separation_gives_chance_accuracy(self):
        accuracies = []
        for seed in range(3):
            train, test = generate_synthetic(10, 16, 100, 0.0, seed=seed)
            clf = ROLANNClassifier(16).add_classes(range(10))
            clf.partial_fit(*train.as_columns())
            X, y = test.as_columns()
            accuracies.append(float(np.mean(clf.predict(X) == y)))
        assert abs(np.mean(accuracies) - 0.1) <= 0.1

    def test_wide_separation_is_linearly_separable(self):
        train, test = generate_synthetic(10, 16, 100, 8.0, seed=1)
        clf = ROLANNClassifier(16).add_classes(range(10))
        clf.partial_fit(*train.as_columns())
        X, y = test.as_columns()
        assert float(np.mean(clf.predict(X) == y)) >= 0.99

    def test_minimum_pairwise_separation_is_enforced(self):
        train, _ = generate_synthetic(6, 10, 200, 5.0, seed=2)
        centers = np.stack(
            [train.embeddings[train.class_index[c]].mean(axis=0) for c in range(6)]
        )
        dists = [
            np.linalg.norm(centers[i] - centers[j])
            for i in range(6)
            for j in range(i + 1, 6)
        ]
        # empirical means wobble around the true ones by ~1/sqrt(160)
        assert min(dists) >= 5.0 - 0.5

    def test_single_sample_per_class_still_works(self):
        train, test = generate_synthetic(7, 4, 1, 3.0, seed=3)
        assert len(train) == 7
        assert len(test) == 0
        split, tasks = split_tasks(train, increment=7, seed=0)
        assert split.num_tasks == 1

    def test_bad_arguments_are_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic(0, 4, 10, 1.0, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(3, 4, 10, -1.0, seed=0)

"""
Tests for datasets, CSV ingestion, synthetic blobs and partitioning.
"""

import itertools

import numpy as np
import pytest

from fedcom.data import (
    Dataset,
    PartitionSpec,
    concatenate,
    generate_blobs,
    load_csv,
    min_max_bounds,
    partition_by_group,
    partition_dirichlet,
    scale_min_max,
    train_test_split,
    write_csv,
)
from fedcom.errors import InfeasiblePartitionError, InvalidArgumentError, MissingColumnError, ParseError


def _indexed_dataset(n: int, class_count: int = 2) -> Dataset:
    """Rows whose single feature is their own index, labels cycling through the classes."""
    return Dataset(features=np.arange(n, dtype=float), labels=np.arange(n) % class_count, class_count=class_count)


class TestDataset:
    def test_rejects_non_finite_features(self):
        with pytest.raises(ValueError):
            Dataset(features=[[0.0], [np.nan]], labels=[0, 1], class_count=2)

    def test_rejects_label_out_of_range(self):
        with pytest.raises(ValueError):
            Dataset(features=[[0.0], [1.0]], labels=[0, 2], class_count=2)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(features=[[0.0], [1.0]], labels=[0], class_count=2)

    def test_arrays_are_read_only(self, blobs):
        with pytest.raises(ValueError):
            blobs.features[0, 0] = 1.0

    def test_concatenate_stacks_rows(self, blobs):
        both = concatenate([blobs.subset([0, 1]), blobs.subset([2])])
        assert len(both) == 3
        np.testing.assert_array_equal(both.features, blobs.features[:3])


class TestGenerateBlobs:
    def test_minimal_case(self):
        ds = generate_blobs(2, 1, 1, 4.0, seed=3)
        assert len(ds) == 2
        assert sorted(ds.labels.tolist()) == [0, 1]

    def test_label_histogram(self):
        ds = generate_blobs(3, 100, 5, 6.0, seed=3)
        assert len(ds) == 300
        assert ds.label_histogram().tolist() == [100, 100, 100]

    @pytest.mark.parametrize("dim", [1, 5])
    def test_class_means_are_separated(self, dim):
        ds = generate_blobs(3, 2000, dim, 6.0, seed=11)
        means = [ds.features[ds.labels == c].mean(axis=0) for c in range(3)]
        for a, b in itertools.combinations(means, 2):
            assert np.linalg.norm(a - b) > 5.5

    def test_deterministic_in_seed(self):
        a = generate_blobs(3, 10, 4, 2.0, seed=5)
        b = generate_blobs(3, 10, 4, 2.0, seed=5)
        np.testing.assert_array_equal(a.features, b.features)

    @pytest.mark.parametrize("args", [(1, 10, 2, 1.0), (2, 0, 2, 1.0), (2, 10, 0, 1.0), (2, 10, 2, 0.0)])
    def test_invalid_arguments(self, args):
        with pytest.raises(InvalidArgumentError):
            generate_blobs(*args, seed=0)


class TestLoadCsv:
    def test_headerless_file(self, tmp_path):
        path = tmp_path / "three.csv"
        path.write_text("0.5,1.0,0\n1.5,2.0,1\n2.5,3.0,0\n")
        ds, groups = load_csv(str(path))
        assert len(ds) == 3
        assert ds.labels.tolist() == [0, 1, 0]
        assert groups is None

    def test_non_numeric_feature_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n1,2,0\nabc,3,1\n")
        with pytest.raises(ParseError) as excinfo:
            load_csv(str(path), label_column="label")
        assert excinfo.value.row == 2
        assert "row 2" in str(excinfo.value)

    def test_forced_headerless_rejects_text_first_row(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("abc,1.0,0\n0.5,2.0,1\n")
        with pytest.raises(ParseError) as excinfo:
            load_csv(str(path), has_header=False)
        assert excinfo.value.row == 1

    def test_detected_header_skips_text_first_row(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("abc,1.0,0\n0.5,2.0,1\n")
        ds, _ = load_csv(str(path))
        assert len(ds) == 1

    def test_group_column(self, tmp_path):
        path = tmp_path / "har.csv"
        path.write_text("user,f1,f2,activity\nu1,0.1,0.2,0\nu2,0.3,0.4,1\nu1,0.5,0.6,2\n")
        ds, groups = load_csv(str(path), label_column="activity", group_column="user")
        assert ds.dim == 2
        assert ds.class_count == 3
        assert groups.tolist() == ["u1", "u2", "u1"]

    def test_missing_column(self, tmp_path):
        path = tmp_path / "named.csv"
        path.write_text("x,y\n1,0\n2,1\n")
        with pytest.raises(MissingColumnError):
            load_csv(str(path), label_column="target")

    def test_negative_label_rejected(self, tmp_path):
        path = tmp_path / "neg.csv"
        path.write_text("1.0,-1\n")
        with pytest.raises(ParseError):
            load_csv(str(path))

    def test_written_file_reads_back(self, tmp_path, blobs):
        path = tmp_path / "out" / "blobs.csv"
        write_csv(blobs, str(path))
        back, _ = load_csv(str(path))
        np.testing.assert_allclose(back.features, blobs.features, atol=1e-12)
        np.testing.assert_array_equal(back.labels, blobs.labels)


class TestPartitionDirichlet:
    def test_large_alpha_is_close_to_iid(self, blobs):
        spec = PartitionSpec(worker_count=2, dirichlet_alpha=1e6, size_imbalance=1.0, seed=0)
        global_share = blobs.label_histogram() / len(blobs)
        for part in partition_dirichlet(blobs, spec):
            share = part.label_histogram() / len(part)
            assert np.all(np.abs(share - global_share) <= 0.05)

    def test_small_alpha_skews_labels(self):
        ds = generate_blobs(3, 300, 2, 3.0, seed=0)
        for seed in range(5):
            parts = partition_dirichlet(ds, PartitionSpec(worker_count=10, dirichlet_alpha=0.1, seed=seed))
            majority = [p.label_histogram().max() / len(p) for p in parts]
            assert max(majority) > 0.6

    def test_rows_are_disjoint_and_workers_nonempty(self):
        ds = _indexed_dataset(200, class_count=2)
        parts = partition_dirichlet(ds, PartitionSpec(worker_count=8, dirichlet_alpha=0.5, size_imbalance=3.0))
        rows = np.concatenate([p.features[:, 0] for p in parts])
        assert len(rows) == len(np.unique(rows))
        assert all(len(p) > 0 for p in parts)

    @pytest.mark.parametrize("alpha", [0.3, 0.1])
    def test_low_alpha_leaves_every_worker_enough_rows(self, alpha):
        ds = _indexed_dataset(1600, class_count=3)
        for seed in range(25):
            spec = PartitionSpec(worker_count=20, dirichlet_alpha=alpha, min_rows=6, seed=seed)
            parts = partition_dirichlet(ds, spec)
            assert min(len(p) for p in parts) >= 6
            rows = np.concatenate([p.features[:, 0] for p in parts])
            assert sorted(rows.tolist()) == list(range(1600))

    def test_min_rows_beyond_dataset(self):
        with pytest.raises(InfeasiblePartitionError):
            partition_dirichlet(_indexed_dataset(50), PartitionSpec(worker_count=10, min_rows=6))

    def test_more_workers_than_rows(self):
        ds = _indexed_dataset(5)
        with pytest.raises(InfeasiblePartitionError):
            partition_dirichlet(ds, PartitionSpec(worker_count=6))

    def test_deterministic(self, blobs):
        spec = PartitionSpec(worker_count=4, dirichlet_alpha=0.5, seed=9)
        first = partition_dirichlet(blobs, spec)
        second = partition_dirichlet(blobs, spec)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.features, b.features)


class TestPartitionByGroup:
    def test_every_group_used_once(self):
        ds = _indexed_dataset(100)
        groups = np.repeat([f"user{i}" for i in range(20)], 5)
        parts = partition_by_group(ds, groups, k=20, seed=1)
        assert [len(p) for p in parts] == [5] * 20
        rows = np.sort(np.concatenate([p.features[:, 0] for p in parts]))
        np.testing.assert_array_equal(rows, np.arange(100))

    def test_same_seed_same_assignment(self):
        ds = _indexed_dataset(90)
        groups = np.repeat(np.arange(30), 3)
        a = partition_by_group(ds, groups, k=20, seed=4)
        b = partition_by_group(ds, groups, k=20, seed=4)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.features, y.features)

    def test_too_few_groups(self):
        ds = _indexed_dataset(10)
        with pytest.raises(InfeasiblePartitionError):
            partition_by_group(ds, np.repeat(np.arange(5), 2), k=20, seed=0)


class TestTrainTestSplit:
    def test_sizes(self):
        train, test = train_test_split(_indexed_dataset(10), 0.2, seed=0)
        assert (len(train), len(test)) == (8, 2)

    def test_stratified(self):
        ds = generate_blobs(2, 100, 3, 4.0, seed=2)
        _, test = train_test_split(ds, 0.3, seed=0)
        assert test.label_histogram().tolist() == [30, 30]

    def test_parts_are_complementary(self):
        ds = _indexed_dataset(50)
        train, test = train_test_split(ds, 0.3, seed=8)
        rows = np.sort(np.concatenate([train.features[:, 0], test.features[:, 0]]))
        np.testing.assert_array_equal(rows, np.arange(50))

    def test_invalid_fraction(self):
        with pytest.raises(InvalidArgumentError, match="invalid fraction"):
            train_test_split(_indexed_dataset(10), 1.0, seed=0)


def test_min_max_scaling_maps_to_unit_interval(blobs):
    low, high = min_max_bounds(blobs)
    scaled = scale_min_max(blobs, low, high)
    assert scaled.features.min() == pytest.approx(0.0)
    assert scaled.features.max() == pytest.approx(1.0)

"""
Tests for FedAverage, Krum, Multi-Krum and the FedCom credit pipeline.
"""

import numpy as np
import pytest

from fedcom.aggregation import (
    fed_average,
    fedcom_aggregate,
    fedcom_weights,
    gated_weights,
    krum,
    krum_guarantee_holds,
    krum_scores,
    lower_median,
    multi_krum,
    multi_krum_selection,
    training_credits,
)
from fedcom.attacks import gaussian_model
from fedcom.commitment import build_commitment
from fedcom.data import PartitionSpec, generate_blobs, partition_dirichlet
from fedcom.errors import DimensionMismatchError, TooFewUpdatesError
from fedcom.model import ModelArch, ParameterVector, TrainConfig, init_model, train_local
from tests.conftest import vector

FOUR = [vector(0, 0), vector(0, 1), vector(1, 0), vector(10, 10)]


class TestFedAverage:
    def test_equal_sizes(self):
        result = fed_average([vector(0, 0), vector(2, 4)], [5, 5])
        np.testing.assert_allclose(result.values[:2], [1, 2])

    def test_size_weighted(self):
        result = fed_average([vector(0, 0), vector(4, 4)], [1, 3])
        np.testing.assert_allclose(result.values[:2], [3, 3])

    def test_single_update(self):
        only = vector(1.5, -2.0)
        np.testing.assert_array_equal(fed_average([only], [7]).values, only.values)

    def test_architecture_mismatch(self):
        other = ParameterVector(arch=ModelArch(input_dim=2, class_count=2), values=np.zeros(6))
        with pytest.raises(DimensionMismatchError):
            fed_average([vector(0, 0), other], [1, 1])


class TestKrum:
    def test_scores_hand_worked(self):
        scores = krum_scores(FOUR, f=1)
        np.testing.assert_allclose(scores, [2.0, 1 + np.sqrt(2), 1 + np.sqrt(2), np.sqrt(181) * 2], atol=1e-9)
        assert krum(FOUR, f=1) is FOUR[0]

    def test_identical_updates(self):
        same = [vector(3, 3) for _ in range(5)]
        assert not krum_scores(same, f=1).any()
        assert krum(same, f=1) is same[0]

    def test_too_few_updates(self):
        with pytest.raises(TooFewUpdatesError):
            krum_scores(FOUR[:3], f=2)

    def test_permutation_keeps_selected_value(self):
        permuted = [FOUR[3], FOUR[2], FOUR[0], FOUR[1]]
        np.testing.assert_array_equal(krum(permuted, f=1).values, FOUR[0].values)

    def test_neighbor_override(self):
        scores = krum_scores(FOUR, f=1, neighbor_count=1)
        np.testing.assert_allclose(scores[:3], [1.0, 1.0, 1.0])

    @pytest.mark.parametrize("n,f,holds", [(20, 8, True), (20, 9, False), (6, 1, True), (6, 2, False)])
    def test_guarantee_bound(self, n, f, holds):
        assert krum_guarantee_holds(n, f) is holds


class TestMultiKrum:
    def test_hand_worked(self):
        result = multi_krum(FOUR, [1, 1, 1, 1], f=1)
        np.testing.assert_allclose(result.values[:2], [0.0, 0.5])

    def test_identical(self):
        same = [vector(2, -1) for _ in range(4)]
        np.testing.assert_allclose(multi_krum(same, [1, 2, 3, 4], f=1).values, same[0].values)

    def test_k_equals_f_plus_two_selects_one(self):
        assert len(multi_krum_selection(FOUR, f=2)) == 1


class TestTrainingCredits:
    def test_hand_worked(self):
        np.testing.assert_allclose(training_credits([0.5, 0.4, -0.1]), [10, 10, 0], atol=1e-6)

    def test_all_equal_positive(self):
        credits = training_credits([0.2, 0.2, 0.2])
        assert np.all(credits == credits[0])
        assert credits[0] == pytest.approx(1e12)

    def test_no_decrease(self):
        assert not training_credits([0.0, -1.0, -0.5]).any()


class TestFedComWeights:
    def test_lower_median(self):
        assert lower_median([4, 3, 2, 1]) == 2
        assert lower_median([5, 1, 3]) == 3

    def test_median_gate(self):
        report = fedcom_weights([4, 3, 2, 1], [1, 1, 1, 1], [10, 10, 10, 10])
        assert report.flag == [1, 1, 1, 0]
        np.testing.assert_allclose(report.weight, [1 / 3, 1 / 3, 1 / 3, 0])

    def test_flags_to_weights_exact(self):
        assert gated_weights([1, 1, 0, 0], [100, 300, 50, 50]).tolist() == [0.25, 0.75, 0.0, 0.0]

    def test_equal_scores_pass_everyone(self):
        report = fedcom_weights([0.5] * 3, [2.0] * 3, [1, 1, 2])
        assert report.flag == [1, 1, 1]
        np.testing.assert_allclose(report.weight, [0.25, 0.25, 0.5])

    def test_at_least_half_pass(self, rng):
        for k in range(1, 12):
            report = fedcom_weights(rng.random(k), rng.random(k), rng.integers(1, 50, k))
            assert sum(report.flag) >= (k + 1) // 2
            assert sum(report.weight) == pytest.approx(1.0)


class TestFedComAggregate:
    @pytest.fixture
    def setup(self):
        ds = generate_blobs(3, 80, 4, 5.0, seed=3)
        parts = partition_dirichlet(ds, PartitionSpec(worker_count=4, seed=1))
        arch = ModelArch(input_dim=4, class_count=3)
        global_model = init_model(arch, 0)
        cfg = TrainConfig(local_epochs=2, learning_rate=0.05)
        updates = [train_local(global_model, part, cfg) for part in parts]
        commitments = [build_commitment(part, m=3) for part in parts]
        return global_model, parts, updates, commitments

    def test_identical_workers(self, setup):
        global_model, parts, updates, commitments = setup
        same_update = [updates[0]] * 3
        same_commitment = [commitments[0]] * 3
        new_global, report = fedcom_aggregate(global_model, same_update, [10, 20, 30], same_commitment, [0.5] * 3)
        np.testing.assert_allclose(new_global.values, updates[0].values, atol=1e-12)
        assert report.flag == [1, 1, 1]
        np.testing.assert_allclose(report.weight, [1 / 6, 2 / 6, 3 / 6])

    def test_noise_update_is_zeroed(self, setup):
        global_model, parts, updates, commitments = setup
        noisy = list(updates)
        noisy[3] = gaussian_model(global_model.arch, sigma=5.0, seed=9)
        sizes = [len(part) for part in parts]
        _, report = fedcom_aggregate(global_model, noisy, sizes, commitments, [0.5] * 4)
        assert report.l[3] < 0
        assert report.tc[3] == 0.0
        assert report.weight[3] == 0.0
        assert sum(report.weight) == pytest.approx(1.0)

    def test_single_worker(self, setup):
        global_model, parts, updates, commitments = setup
        new_global, report = fedcom_aggregate(global_model, updates[:1], [len(parts[0])], commitments[:1], [1.0])
        np.testing.assert_allclose(new_global.values, updates[0].values)
        assert report.weight == [1.0]

import numpy as np
import pytest

from spectransfer import GridSpec, PeakKind, PeakModel, sum_model
from spectransfer.classify import classify_information_transfer
from spectransfer.errors import ConfigError
from spectransfer.rng import stream

GRID = GridSpec(0, 1000, 1024)


def make_separable_dataset(n_per_class=20, seed=0):
    """Two classes distinguished by peak position (300 vs 700)."""
    rng = stream(seed, "classify-data")
    spectra = []
    for center, label in ((300.0, "low"), (700.0, "high")):
        for _ in range(n_per_class):
            peak = PeakModel(
                PeakKind.GAUSSIAN,
                center + rng.uniform(-15, 15),
                1.0,
                sigma=rng.uniform(8, 14),
            )
            s = sum_model([peak], GRID)
            s = s.with_intensity(
                np.clip(s.intensity + rng.normal(0, 0.01, len(s)), 0, 1)
            )
            spectra.append((s, label))
    return spectra


def test_single_class_rejected():
    data = [(s, "only") for s, _ in make_separable_dataset(3)]
    with pytest.raises(ConfigError):
        classify_information_transfer(data, rounds=1, split_seed=0)


def test_separable_task_is_perfect():
    data = make_separable_dataset(20)
    result = classify_information_transfer(data, rounds=10, split_seed=0)
    assert len(result.rounds) == 10
    for r in result.rounds:
        assert r.test_accuracy == 1.0
    assert result.mean_test_accuracy == 1.0


def test_shuffled_labels_hit_chance_level():
    data = make_separable_dataset(20)
    labels = [label for _, label in data]
    rng = stream(4, "label-shuffle")
    shuffled = [labels[i] for i in rng.permutation(len(labels))]
    data = [(s, label) for (s, _), label in zip(data, shuffled)]
    result = classify_information_transfer(data, rounds=10, split_seed=0)
    # 16 test samples x 10 rounds of ~Bernoulli(1/2) draws
    three_sigma = 3 * np.sqrt(0.25 / (16 * 10))
    assert abs(result.mean_test_accuracy - 0.5) <= three_sigma


def test_confusion_rows_sum_to_test_counts():
    data = make_separable_dataset(10)
    result = classify_information_transfer(data, rounds=3, split_seed=1)
    for r in result.rounds:
        row_sums = r.confusion.sum(axis=1)
        assert row_sums.sum() > 0
        # stratified split: 40% of each 10-sample class
        assert np.all(row_sums == 4)


def test_rounds_deterministic_given_seed():
    data = make_separable_dataset(8)
    a = classify_information_transfer(data, rounds=2, split_seed=7)
    b = classify_information_transfer(data, rounds=2, split_seed=7)
    for ra, rb in zip(a.rounds, b.rounds):
        assert ra.test_accuracy == rb.test_accuracy
        assert np.array_equal(ra.confusion, rb.confusion)


def test_singleton_class_goes_to_train():
    data = make_separable_dataset(6)
    lone = sum_model([PeakModel(PeakKind.GAUSSIAN, 500, 1.0, sigma=10)], GRID)
    data.append((lone, "lone"))
    result = classify_information_transfer(data, rounds=2, split_seed=2)
    for r in result.rounds:
        lone_index = result.class_names.index("lone")
        assert r.confusion[lone_index].sum() == 0  # never in the test set

"""Procedural shape dataset: determinism, balance, ranges, task styles."""

import numpy as np
import pytest

from ddvkit.data import TASKS, make_dataset


class TestMakeDataset:
    def test_deterministic_regeneration(self):
        a = make_dataset("taskA", 42, 300)
        b = make_dataset("taskA", 42, 300)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_different_seeds_differ(self):
        a = make_dataset("taskA", 1, 200)
        b = make_dataset("taskA", 2, 200)
        assert not np.array_equal(a.images, b.images)

    def test_label_histogram_balanced(self):
        ds = make_dataset("taskA", 7, 1000)
        counts = np.bincount(ds.labels, minlength=4)
        assert counts.min() >= 225 and counts.max() <= 275

    def test_exact_balance_within_one(self):
        for task in TASKS:
            ds = make_dataset(task, 3, 401)
            counts = np.bincount(ds.labels)
            assert counts.max() - counts.min() <= 1

    def test_pixel_range(self):
        for task in TASKS:
            ds = make_dataset(task, 9, 200)
            assert ds.images.min() >= 0.0
            assert ds.images.max() <= 1.0
            assert ds.images.dtype == np.float32

    def test_shapes_and_classes(self):
        ds = make_dataset("taskB", 5, 200)
        assert ds.images.shape == (200, 1, 16, 16)
        assert ds.n_classes == 5
        assert set(np.unique(ds.labels)) == set(range(5))

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match=">= 200"):
            make_dataset("taskA", 1, 199)

    def test_unknown_task_rejected(self):
        with pytest.raises(ValueError, match="unknown task"):
            make_dataset("taskZ", 1, 200)

    def test_task_styles_differ(self):
        # same seed, same index: rendering style must make tasks distinct
        a = make_dataset("taskA", 11, 200)
        b = make_dataset("taskB", 11, 200)
        assert not np.array_equal(a.images, b.images)
        # taskA fills are brighter than taskB's dimmed band
        assert a.images.mean() > b.images.mean()

    def test_min_classes(self):
        for task, spec in TASKS.items():
            assert len(spec["classes"]) >= 4

"""Synthetic dataset generator statistics and invariants."""

import numpy as np

from cogcad.synthetic import make_synthetic_dataset, random_attention_map, split_dataset


class TestGenerator:
    def test_deterministic_under_seed(self):
        a = make_synthetic_dataset(4, size=64, seed=1)
        b = make_synthetic_dataset(4, size=64, seed=1)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.image, sb.image)
            np.testing.assert_array_equal(sa.trajectory.points, sb.trajectory.points)
            np.testing.assert_array_equal(sa.y_soft, sb.y_soft)
            assert sa.label == sb.label

    def test_absent_label_means_no_lesions(self):
        samples = make_synthetic_dataset(30, size=64, seed=2)
        for s in samples:
            if s.label == 0:
                assert not s.lesion_mask.any()
            else:
                assert s.lesion_mask.any()

    def test_class_balance_within_40_60(self):
        samples = make_synthetic_dataset(100, size=64, seed=3)
        positives = sum(s.label for s in samples)
        assert 40 <= positives <= 60

    def test_samples_are_valid_training_inputs(self):
        for s in make_synthetic_dataset(6, size=64, seed=4):
            s.trajectory.validate()
            assert s.image.shape == (64, 64)
            assert s.image.min() >= 0.0 and s.image.max() <= 1.0
            assert s.y_soft.max() == 1.0  # at least one dwell always exists
            assert set(np.unique(s.y_hard)) <= {0.0, 1.0}

    def test_attention_overlaps_lesions(self):
        # ground-truth attention should strongly favor lesion pixels
        samples = [s for s in make_synthetic_dataset(40, size=64, seed=5) if s.label]
        ratios = []
        for s in samples:
            inside = s.y_soft[s.lesion_mask].mean()
            outside = s.y_soft[~s.lesion_mask].mean()
            ratios.append(inside / max(outside, 1e-9))
        assert np.mean(ratios) > 2.0


class TestSplit:
    def test_fractions_and_disjointness(self):
        samples = make_synthetic_dataset(20, size=64, seed=6)
        train, val, test = split_dataset(samples, (0.7, 0.15, 0.15), seed=0)
        assert len(train) == 14 and len(val) == 3 and len(test) == 3
        ids = [s.image_id for s in train + val + test]
        assert len(set(ids)) == 20

    def test_split_deterministic(self):
        samples = make_synthetic_dataset(10, size=64, seed=7)
        a = split_dataset(samples, seed=1)
        b = split_dataset(samples, seed=1)
        assert [s.image_id for s in a[0]] == [s.image_id for s in b[0]]


class TestRandomAttention:
    def test_keyed_by_image_id(self):
        a = random_attention_map(64, "img-1", seed=0)
        b = random_attention_map(64, "img-1", seed=0)
        c = random_attention_map(64, "img-2", seed=0)
        np.testing.assert_array_equal(a.grid, b.grid)
        assert not np.array_equal(a.grid, c.grid)

    def test_valid_soft_map(self):
        m = random_attention_map(64, "img-3", seed=1)
        assert m.grid.shape == (64, 64)
        assert m.grid.max() == 1.0 and m.grid.min() >= 0.0

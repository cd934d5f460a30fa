"""Synthetic cluster generation, binary image IO, stratified splitting."""

import numpy as np
import pytest

from s2r2 import (
    LabeledDataset,
    ProbeConfig,
    SyntheticSpec,
    generate_synthetic,
    load_binary_images,
    save_binary_images,
    split,
    train_linear_probe,
)
from s2r2.data import IMAGE_MAGIC, BadMagicError, LabelRangeError, TruncatedFileError


def raw_probe_accuracy(dataset, seed=0):
    """Accuracy of a linear probe trained directly on the raw features."""
    train, test = split(dataset, 0.8, seed=seed)
    result = train_linear_probe(
        train.samples, train.labels, test.samples, test.labels,
        config=ProbeConfig(seed=seed), num_classes=dataset.num_classes,
    )
    return result.top1_accuracy


class TestGenerateSynthetic:
    def test_deterministic_per_seed(self):
        spec = SyntheticSpec(num_classes=10, dim=64, samples_per_class=100, seed=5)
        a, b = generate_synthetic(spec), generate_synthetic(spec)
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(a.labels, b.labels)
        c = generate_synthetic(SyntheticSpec(num_classes=10, dim=64, samples_per_class=100, seed=6))
        assert not np.array_equal(a.samples, c.samples)

    def test_shapes_and_labels(self):
        ds = generate_synthetic(SyntheticSpec(num_classes=4, dim=8, samples_per_class=25, seed=0))
        assert ds.samples.shape == (100, 8)
        assert np.array_equal(np.bincount(ds.labels), [25] * 4)

    def test_degenerate_spread_collapses_to_centers(self):
        spec = SyntheticSpec(num_classes=3, dim=6, samples_per_class=10,
                             cluster_spread=1e-12, seed=1)
        ds = generate_synthetic(spec)
        for cls in range(3):
            rows = ds.samples[ds.labels == cls]
            assert np.max(np.abs(rows - rows[0])) <= 1e-10

    def test_raw_features_linearly_separable_at_low_spread(self):
        spec = SyntheticSpec(num_classes=10, dim=64, samples_per_class=50,
                             cluster_spread=0.1, center_scale=1.0, seed=2)
        assert raw_probe_accuracy(generate_synthetic(spec)) >= 0.99

    def test_separability_monotone_in_spread(self):
        # seed-averaged probe accuracy must not increase with spread
        spreads = (0.1, 0.5, 1.0, 2.0)
        avg = []
        for spread in spreads:
            accs = []
            for seed in range(5):
                spec = SyntheticSpec(num_classes=8, dim=16, samples_per_class=40,
                                     cluster_spread=spread, seed=seed)
                accs.append(raw_probe_accuracy(generate_synthetic(spec), seed=seed))
            avg.append(np.mean(accs))
        for lo, hi in zip(avg[1:], avg[:-1]):
            assert lo <= hi + 0.005

    def test_mixed_source_blocks_and_labels(self):
        spec = SyntheticSpec(num_classes=5, dim=12, samples_per_class=30,
                             cluster_spread=1e-12, composition="mixed_source",
                             mix_count=3, seed=3)
        ds = generate_synthetic(spec)
        block = spec.dim // spec.mix_count
        # the first block is fully determined by the label
        for cls in range(5):
            first = ds.samples[ds.labels == cls, :block]
            assert np.max(np.abs(first - first[0])) <= 1e-10
        # distractor blocks mix across samples of one class
        tail = ds.samples[ds.labels == 0, block:]
        assert np.max(np.abs(tail - tail[0])) > 1e-3

    def test_mixed_source_needs_divisible_dim(self):
        with pytest.raises(ValueError):
            SyntheticSpec(num_classes=3, dim=10, samples_per_class=5,
                          composition="mixed_source", mix_count=3)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(num_classes=3, dim=4, samples_per_class=5, cluster_spread=0.0)
        with pytest.raises(ValueError):
            SyntheticSpec(num_classes=3, dim=4, samples_per_class=5, center_scale=-1.0)
        with pytest.raises(ValueError):
            SyntheticSpec(num_classes=3, dim=4, samples_per_class=5, composition="other")
        with pytest.raises(ValueError):
            SyntheticSpec(num_classes=3, dim=4, samples_per_class=5,
                          composition="mixed_source", mix_count=1)


class TestSplit:
    def test_even_stratification(self):
        ds = generate_synthetic(SyntheticSpec(num_classes=10, dim=4, samples_per_class=10, seed=4))
        train, test = split(ds, 0.5, seed=0)
        assert len(train) == len(test) == 50
        assert np.array_equal(np.bincount(train.labels), [5] * 10)
        assert np.array_equal(np.bincount(test.labels), [5] * 10)

    def test_partition_exhaustive_and_disjoint(self):
        ds = generate_synthetic(SyntheticSpec(num_classes=6, dim=5, samples_per_class=17, seed=5))
        train, test = split(ds, 0.7, seed=1)
        assert len(train) + len(test) == len(ds)
        all_rows = {row.tobytes() for row in ds.samples}
        train_rows = {row.tobytes() for row in train.samples}
        test_rows = {row.tobytes() for row in test.samples}
        assert train_rows | test_rows == all_rows
        assert not (train_rows & test_rows)

    def test_deterministic_per_seed(self):
        ds = generate_synthetic(SyntheticSpec(num_classes=4, dim=3, samples_per_class=20, seed=6))
        a1, b1 = split(ds, 0.6, seed=7)
        a2, b2 = split(ds, 0.6, seed=7)
        assert np.array_equal(a1.samples, a2.samples)
        assert np.array_equal(b1.samples, b2.samples)
        a3, _ = split(ds, 0.6, seed=8)
        assert not np.array_equal(a1.samples, a3.samples)

    def test_both_sides_nonempty_even_at_extreme_fraction(self):
        ds = generate_synthetic(SyntheticSpec(num_classes=2, dim=3, samples_per_class=3, seed=9))
        train, test = split(ds, 0.99, seed=0)
        assert np.all(np.bincount(train.labels) >= 1)
        assert np.all(np.bincount(test.labels) >= 1)

    def test_invalid_fraction_rejected(self):
        ds = generate_synthetic(SyntheticSpec(num_classes=2, dim=3, samples_per_class=5, seed=0))
        for bad in (0.0, 1.0, -0.3):
            with pytest.raises(ValueError):
                split(ds, bad, seed=0)

    def test_singleton_class_rejected(self):
        ds = LabeledDataset(samples=np.zeros((3, 2)), labels=np.array([0, 0, 1]), num_classes=2)
        with pytest.raises(ValueError):
            split(ds, 0.5, seed=0)


class TestBinaryImages:
    def sample_bundle(self):
        rng = np.random.default_rng(50)
        pixels = rng.integers(0, 256, size=(2, 4, 5, 3), dtype=np.uint8)
        labels = np.array([1, 0])
        return pixels, labels

    def test_round_trip(self, tmp_path):
        pixels, labels = self.sample_bundle()
        path = tmp_path / "imgs.bin"
        save_binary_images(path, pixels, labels, num_classes=2)
        ds = load_binary_images(path)
        assert ds.samples.shape == (2, 4, 5, 3)
        assert ds.samples.dtype == np.float32
        assert np.array_equal(ds.labels, labels)
        assert ds.num_classes == 2
        assert np.array_equal(ds.samples, pixels.astype(np.float32) / 255.0)
        assert ds.samples.min() >= 0.0 and ds.samples.max() <= 1.0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "imgs.bin"
        path.write_bytes(b"WRONGMAG" + b"\x00" * 40)
        with pytest.raises(BadMagicError):
            load_binary_images(path)

    def test_truncated_payload(self, tmp_path):
        pixels, labels = self.sample_bundle()
        path = tmp_path / "imgs.bin"
        save_binary_images(path, pixels, labels, num_classes=2)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 3])
        with pytest.raises(TruncatedFileError):
            load_binary_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "imgs.bin"
        path.write_bytes(IMAGE_MAGIC + b"\x01\x00")
        with pytest.raises(TruncatedFileError):
            load_binary_images(path)

    def test_label_out_of_range(self, tmp_path):
        pixels, labels = self.sample_bundle()
        path = tmp_path / "imgs.bin"
        save_binary_images(path, pixels, labels, num_classes=2)
        blob = bytearray(path.read_bytes())
        # patch the last label (little-endian u16) to num_classes
        blob[-2:] = (2).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(LabelRangeError):
            load_binary_images(path)

    def test_writer_rejects_bad_labels(self, tmp_path):
        pixels, _ = self.sample_bundle()
        with pytest.raises(LabelRangeError):
            save_binary_images(tmp_path / "x.bin", pixels, np.array([0, 5]), num_classes=2)

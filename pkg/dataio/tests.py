"""
Tests for the Dataio app - IDX and CSV ingestion, metric records, synthetic blobs, splits and pairs.
"""
import gzip
import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from numkit.exceptions import ContractViolation
from numkit.rng import make_rng

from .csvio import load_csv, write_feature_csv
from .datasets import InputScaling, LabeledDataset, PairSet
from .exceptions import BadMagicError, CountMismatchError, DatasetFormatError, PairGenerationError, TruncatedFileError
from .idx import IMAGES_MAGIC, LABELS_MAGIC, encode_idx, load_idx, write_idx
from .records import append_record, read_records
from .splits import make_pairs, train_test_split
from .synthetic import synth_blobs


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()


class IdxTest(TempDirMixin, SimpleTestCase):
    """Tests for the IDX reader and writer."""

    def _fixture(self):
        images = np.array([[[0, 255], [128, 1]], [[10, 20], [30, 40]]], dtype=np.uint8)
        labels = np.array([3, 7], dtype=np.uint8)
        return images, labels

    def test_two_image_fixture(self):
        """A hand-built two-image file is recovered exactly and scaled by 1/255."""
        images, labels = self._fixture()
        img_path = self.tmp / "images.idx"
        lbl_path = self.tmp / "labels.idx"
        img_path.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + images.tobytes())
        lbl_path.write_bytes(struct.pack(">II", 0x801, 2) + labels.tobytes())
        dataset = load_idx(img_path, lbl_path)
        self.assertEqual(dataset.inputs.shape, (2, 4))
        np.testing.assert_array_equal(dataset.inputs[0], [0.0, 1.0, 128 / 255.0, 1 / 255.0])
        np.testing.assert_array_equal(dataset.labels, [3, 7])
        self.assertEqual(dataset.class_count, 8)

    def test_gzip_roundtrip_is_lossless(self):
        """A random fixture written gzip-compressed reads back byte for byte."""
        rng = make_rng(0)
        images = rng.integers(0, 256, size=(5, 3, 4)).astype(np.uint8)
        labels = rng.integers(0, 10, size=5).astype(np.uint8)
        write_idx(self.tmp / "img.gz", images, IMAGES_MAGIC)
        write_idx(self.tmp / "lbl.gz", labels, LABELS_MAGIC)
        with gzip.open(self.tmp / "img.gz", "rb") as handle:
            self.assertEqual(handle.read(4), b"\x00\x00\x08\x03")
        dataset = load_idx(self.tmp / "img.gz", self.tmp / "lbl.gz", class_count=10)
        np.testing.assert_array_equal(np.rint(dataset.inputs * 255.0).astype(np.uint8), images.reshape(5, 12))
        np.testing.assert_array_equal(dataset.labels, labels)

    def test_labels_with_image_magic(self):
        """A labels file carrying 0x00000803 is a bad-magic error."""
        images, _ = self._fixture()
        write_idx(self.tmp / "img", images, IMAGES_MAGIC)
        write_idx(self.tmp / "lbl", images, IMAGES_MAGIC)
        with self.assertRaises(BadMagicError) as ctx:
            load_idx(self.tmp / "img", self.tmp / "lbl")
        self.assertEqual(ctx.exception.found, IMAGES_MAGIC)

    def test_truncated_file(self):
        """Missing pixel bytes are a truncation error."""
        images, labels = self._fixture()
        (self.tmp / "img").write_bytes(encode_idx(images, IMAGES_MAGIC)[:-3])
        write_idx(self.tmp / "lbl", labels, LABELS_MAGIC)
        with self.assertRaises(TruncatedFileError):
            load_idx(self.tmp / "img", self.tmp / "lbl")

    def test_trailing_bytes(self):
        """Bytes past the declared payload are a format error, not a truncation."""
        images, labels = self._fixture()
        (self.tmp / "img").write_bytes(encode_idx(images, IMAGES_MAGIC) + b"\x00\x00")
        write_idx(self.tmp / "lbl", labels, LABELS_MAGIC)
        with self.assertRaises(DatasetFormatError) as ctx:
            load_idx(self.tmp / "img", self.tmp / "lbl")
        self.assertNotIsInstance(ctx.exception, TruncatedFileError)
        self.assertIn("2 trailing bytes", str(ctx.exception))

    def test_count_mismatch(self):
        """Two images with three labels is a count mismatch."""
        images, _ = self._fixture()
        write_idx(self.tmp / "img", images, IMAGES_MAGIC)
        write_idx(self.tmp / "lbl", np.array([1, 2, 3], dtype=np.uint8), LABELS_MAGIC)
        with self.assertRaises(CountMismatchError):
            load_idx(self.tmp / "img", self.tmp / "lbl")

    def test_empty_file_rejected(self):
        """A zero-image file is rejected."""
        write_idx(self.tmp / "img", np.zeros((0, 2, 2), dtype=np.uint8), IMAGES_MAGIC)
        write_idx(self.tmp / "lbl", np.zeros(0, dtype=np.uint8), LABELS_MAGIC)
        with self.assertRaises(ContractViolation):
            load_idx(self.tmp / "img", self.tmp / "lbl")


class CsvTest(TempDirMixin, SimpleTestCase):
    """Tests for feature CSV tables."""

    def test_roundtrip_is_lossless(self):
        """Seventeen significant digits reproduce every float exactly."""
        rng = make_rng(1)
        features = rng.normal(size=(20, 3)) * 1e3
        labels = rng.integers(0, 4, size=20)
        path = write_feature_csv(self.tmp / "dump.csv", features, labels)
        self.assertEqual(path.read_text().splitlines()[0], "label,f0,f1,f2")
        dataset = load_csv(path, class_count=4)
        self.assertEqual(dataset.inputs.tobytes(), features.tobytes())
        np.testing.assert_array_equal(dataset.labels, labels)

    def test_bad_header(self):
        """The header must read label,f0,..."""
        (self.tmp / "x.csv").write_text("y,a,b\n0,1,2\n")
        with self.assertRaises(DatasetFormatError):
            load_csv(self.tmp / "x.csv")

    def test_ragged_row(self):
        """A short row names its line."""
        (self.tmp / "x.csv").write_text("label,f0,f1\n0,1,2\n1,3\n")
        with self.assertRaises(DatasetFormatError) as ctx:
            load_csv(self.tmp / "x.csv")
        self.assertIn(":3:", str(ctx.exception))

    def test_empty_table(self):
        """A header without rows is rejected."""
        (self.tmp / "x.csv").write_text("label,f0\n")
        with self.assertRaises(ContractViolation):
            load_csv(self.tmp / "x.csv")


class RecordsTest(TempDirMixin, SimpleTestCase):
    """Tests for line-delimited metric records."""

    def test_append_and_read(self):
        """Records append one sorted-key line each and read back unchanged."""
        path = self.tmp / "out" / "metrics.jsonl"
        append_record(path, {"loss": 0.5, "epoch": 1, "acc_radial": 0.9, "acc_head": None, "lambda": 0.003, "seed": 7})
        append_record(path, {"loss": 0.25, "epoch": 2, "acc_radial": 0.95, "acc_head": None, "lambda": 0.003, "seed": 7})
        lines = path.read_text().splitlines()
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[0].startswith('{"acc_head": null, "acc_radial": 0.9, "epoch": 1'))
        records = read_records(path)
        self.assertEqual([r["epoch"] for r in records], [1, 2])
        self.assertEqual(records[1]["loss"], 0.25)

    def test_non_finite_becomes_null(self):
        """NaN values are written as null."""
        path = self.tmp / "m.jsonl"
        append_record(path, {"loss": float("nan")})
        self.assertIsNone(read_records(path)[0]["loss"])

    def test_corrupt_line(self):
        """A broken line raises a format error."""
        path = self.tmp / "m.jsonl"
        path.write_text('{"epoch": 1}\n{oops\n')
        with self.assertRaises(DatasetFormatError):
            read_records(path)


class SyntheticTest(SimpleTestCase):
    """Tests for synth_blobs."""

    def test_deterministic(self):
        """The same seed yields identical datasets."""
        first = synth_blobs(make_rng(3), 4, 3, 10, 0.5)
        second = synth_blobs(make_rng(3), 4, 3, 10, 0.5)
        self.assertEqual(first.inputs.tobytes(), second.inputs.tobytes())
        np.testing.assert_array_equal(first.labels, second.labels)

    def test_two_tight_blobs_are_separable(self):
        """With a tiny spread the two classes are split by a wide linear margin."""
        spread = 1e-3
        data = synth_blobs(make_rng(4), 2, 3, 50, spread)
        a, b = data.inputs[data.labels == 0], data.inputs[data.labels == 1]
        direction = b.mean(axis=0) - a.mean(axis=0)
        direction /= np.linalg.norm(direction)
        gap = (b @ direction).min() - (a @ direction).max()
        self.assertGreaterEqual(gap, 5 * spread)

    def test_nearest_centroid_oracle(self):
        """Ten 2-D blobs are at least 99 percent nearest-centroid separable."""
        data = synth_blobs(make_rng(5), 10, 2, 500, 1.0)
        self.assertEqual(len(data), 5000)
        centroids = np.stack([data.inputs[data.labels == k].mean(axis=0) for k in range(10)])
        distances = np.linalg.norm(data.inputs[:, None, :] - centroids[None, :, :], axis=2)
        self.assertGreaterEqual(np.mean(distances.argmin(axis=1) == data.labels), 0.99)

    def test_invalid_arguments(self):
        """Spread must be positive and counts at least one."""
        with self.assertRaises(ContractViolation):
            synth_blobs(make_rng(0), 2, 2, 5, 0.0)
        with self.assertRaises(ContractViolation):
            synth_blobs(make_rng(0), 0, 2, 5, 1.0)


class InputScalingTest(SimpleTestCase):
    """Tests for the shared-scale input standardization."""

    def test_train_split_is_centered_with_unit_rms(self):
        """The fitted split has zero mean and unit RMS deviation over all coordinates."""
        data = synth_blobs(make_rng(2), 10, 2, 50, 1.0)
        scaled = InputScaling.fit(data).apply(data)
        np.testing.assert_allclose(scaled.inputs.mean(axis=0), 0.0, atol=1e-12)
        self.assertAlmostEqual(float(np.sqrt(np.mean(scaled.inputs ** 2))), 1.0, places=12)
        np.testing.assert_array_equal(scaled.labels, data.labels)

    def test_one_scale_keeps_distance_ratios(self):
        """Pairwise distances shrink by one common factor."""
        inputs = np.array([[0.0, 0.0], [30.0, 0.0], [0.0, 3.0]])
        data = LabeledDataset(inputs, [0, 1, 2], 3)
        scaling = InputScaling.fit(data)
        scaled = scaling.apply(data).inputs
        self.assertAlmostEqual(
            np.linalg.norm(scaled[1] - scaled[0]) / np.linalg.norm(scaled[2] - scaled[0]), 10.0, places=12,
        )
        np.testing.assert_allclose(scaled * scaling.scale + scaling.center, inputs, atol=1e-12)

    def test_test_split_uses_training_statistics(self):
        """The held-out split is mapped with the training center and scale."""
        train = LabeledDataset([[1.0, 1.0], [3.0, 3.0]], [0, 1], 2)
        test = LabeledDataset([[2.0, 2.0]], [0], 2)
        np.testing.assert_allclose(InputScaling.fit(train).apply(test).inputs, [[0.0, 0.0]])

    def test_constant_inputs_keep_unit_scale(self):
        """Identical inputs are centered but not divided by zero."""
        data = LabeledDataset(np.full((4, 3), 5.0), [0, 0, 1, 1], 2)
        scaling = InputScaling.fit(data)
        self.assertEqual(scaling.scale, 1.0)
        np.testing.assert_array_equal(scaling.apply(data).inputs, np.zeros((4, 3)))

    def test_width_mismatch_and_empty_split(self):
        """Applying to another input width, or fitting on nothing, is a contract violation."""
        scaling = InputScaling.fit(LabeledDataset([[1.0, 2.0]], [0], 1))
        with self.assertRaises(ContractViolation):
            scaling.apply(LabeledDataset([[1.0, 2.0, 3.0]], [0], 1))
        with self.assertRaises(ContractViolation):
            InputScaling.fit(LabeledDataset(np.zeros((0, 2)), [], 1))


class SplitTest(SimpleTestCase):
    """Tests for train_test_split."""

    def setUp(self):
        self.data = synth_blobs(make_rng(6), 5, 2, 20, 0.5)

    def test_zero_fraction(self):
        """Fraction 0 leaves the test half empty."""
        train, test = train_test_split(self.data, make_rng(0), 0.0)
        self.assertEqual((len(train), len(test)), (100, 0))

    def test_counts_follow_fraction(self):
        """A 0.3 split of 100 samples holds 30 out."""
        train, test = train_test_split(self.data, make_rng(0), 0.3)
        self.assertEqual((len(train), len(test)), (70, 30))
        self.assertEqual(test.class_count, 5)

    def test_disjoint_classes(self):
        """Class-disjoint splits share no label."""
        train, test = train_test_split(self.data, make_rng(0), 0.4, disjoint_classes=True)
        self.assertFalse(set(train.labels.tolist()) & set(test.labels.tolist()))
        self.assertEqual(len(set(test.labels.tolist())), 2)
        self.assertEqual(len(train) + len(test), 100)

    def test_fraction_range(self):
        """A fraction of 1 is rejected."""
        with self.assertRaises(ContractViolation):
            train_test_split(self.data, make_rng(0), 1.0)


class PairsTest(SimpleTestCase):
    """Tests for make_pairs."""

    def test_balanced_two_class_pairs(self):
        """K = 2 gives equal genuine and impostor counts with correct flags."""
        data = synth_blobs(make_rng(7), 2, 2, 30, 0.5)
        pairs = make_pairs(data, make_rng(1), 40)
        self.assertEqual(len(pairs), 80)
        self.assertEqual(int(pairs.same_class.sum()), 40)
        for a, b, same in pairs.rows():
            self.assertNotEqual(a, b)
            self.assertEqual(data.labels[a] == data.labels[b], same)
        pairs.validate(data)

    def test_without_replacement(self):
        """Pairs are distinct while the pools are large enough, including near exhaustion."""
        data = synth_blobs(make_rng(8), 3, 2, 6, 0.5)
        for count in (5, 40):
            pairs = make_pairs(data, make_rng(2), count)
            rows = [(a, b) for a, b, _ in pairs.rows()]
            self.assertEqual(len(set(rows)), len(rows))

    def test_single_class_has_no_impostors(self):
        """An all-same-class dataset cannot form impostor pairs."""
        data = LabeledDataset(np.zeros((4, 2)), [0, 0, 0, 0], 1)
        with self.assertRaises(PairGenerationError):
            make_pairs(data, make_rng(0), 2)

    def test_validate_rejects_mislabelled_pairs(self):
        """validate catches flags that disagree with labels."""
        data = LabeledDataset(np.zeros((3, 2)), [0, 0, 1], 2)
        with self.assertRaises(ContractViolation):
            PairSet([0, 0], [1, 2], [False, True]).validate(data)

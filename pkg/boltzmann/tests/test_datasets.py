import gzip
import hashlib
import struct
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase
from scipy.io import savemat

from boltzmann.datasets import (
    SILB_HEADER, SILB_HEADER_V2, SILB_VERSION, BinaryDataset, convert_silhouettes_mat, export_csv, load_idx,
    load_mnist, load_silhouettes, stochastic_binarize, toy_dataset, toy_distribution, write_idx, write_silhouettes,
)
from boltzmann.exceptions import ArtifactIOError, DataFormatError, ValidationError

GOLDEN_IDX = bytes([0, 0, 0x08, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 255, 17, 34, 51, 68, 85, 102])


class TempDirMixin:

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()


class IdxTests(TempDirMixin, SimpleTestCase):

    def test_golden_file(self):
        path = self.dir / 'golden.idx'
        path.write_bytes(GOLDEN_IDX)
        array = load_idx(path)
        self.assertEqual(array.shape, (2, 2, 2))
        self.assertEqual(array.dtype, np.uint8)
        self.assertEqual(array.tobytes(), GOLDEN_IDX[16:])

    def test_gzip_is_detected(self):
        path = self.dir / 'golden.idx.gz'
        path.write_bytes(gzip.compress(GOLDEN_IDX))
        self.assertEqual(load_idx(path).tobytes(), GOLDEN_IDX[16:])

    def test_writer_reproduces_the_golden_bytes(self):
        array = np.frombuffer(GOLDEN_IDX[16:], dtype=np.uint8).reshape(2, 2, 2)
        self.assertEqual(write_idx(self.dir / 'out.idx', array).read_bytes(), GOLDEN_IDX)
        compressed = write_idx(self.dir / 'out.idx.gz', array, compress=True).read_bytes()
        self.assertEqual(gzip.decompress(compressed), GOLDEN_IDX)

    def test_malformed_files(self):
        cases = {
            'truncated': GOLDEN_IDX[:-1],
            'trailing':  GOLDEN_IDX + b'\x00',
            'header':    GOLDEN_IDX[:10],
            'magic':     b'\x01' + GOLDEN_IDX[1:],
            'type':      GOLDEN_IDX[:2] + b'\x0d' + GOLDEN_IDX[3:],
        }
        for name, payload in cases.items():
            path = self.dir / f'{name}.idx'
            path.write_bytes(payload)
            with self.assertRaises(DataFormatError, msg=name):
                load_idx(path)

    def test_missing_file(self):
        with self.assertRaises(ArtifactIOError):
            load_idx(self.dir / 'absent.idx')


class BinarizationTests(TempDirMixin, SimpleTestCase):

    def test_extremes_are_deterministic(self):
        grays = np.array([[0, 255] * 50])
        out = stochastic_binarize(grays, seed=1)
        np.testing.assert_array_equal(out[0, ::2], 0)
        np.testing.assert_array_equal(out[0, 1::2], 1)

    def test_same_seed_same_bits(self):
        grays = np.random.default_rng(0).integers(0, 256, size=(20, 30))
        np.testing.assert_array_equal(stochastic_binarize(grays, 5), stochastic_binarize(grays, 5))

    def test_mid_gray_frequency(self):
        out = stochastic_binarize(np.full(100_000, 128), seed=2)
        p = 128 / 255
        self.assertLess(abs(out.mean() - p), 4 * np.sqrt(p * (1 - p) / 100_000))

    def test_out_of_range_rejected(self):
        with self.assertRaises(ValidationError):
            stochastic_binarize(np.array([256]), seed=0)

    def test_mnist_style_loader(self):
        rng   = np.random.default_rng(3)
        train = write_idx(self.dir / 'train.gz', rng.integers(0, 256, size=(5, 2, 2)).astype(np.uint8), True)
        test  = write_idx(self.dir / 'test.gz', rng.integers(0, 256, size=(3, 2, 2)).astype(np.uint8), True)
        data  = load_mnist(train, test, seed=4)
        self.assertEqual(data.train.shape, (5, 4))
        self.assertEqual(data.test.shape, (3, 4))
        self.assertEqual(data.image_shape, (2, 2))
        self.assertEqual(data.provenance['train_sha256'], hashlib.sha256(train.read_bytes()).hexdigest())
        self.assertEqual(data.provenance['binarization']['seed'], 4)
        np.testing.assert_array_equal(load_mnist(train, test, seed=4).rows, data.rows)


class SilhouetteTests(TempDirMixin, SimpleTestCase):

    def test_hand_built_file(self):
        bits = np.array([[1, 0, 0, 1], [0, 1, 1, 0], [1, 1, 1, 1]], dtype=np.uint8)
        path = self.dir / 'tiny.silb'
        path.write_bytes(SILB_HEADER.pack(b'SILB', 1, 2, 2, 3, 2) + np.packbits(bits.ravel()).tobytes())
        data = load_silhouettes(path)
        np.testing.assert_array_equal(data.train, bits[:2])
        np.testing.assert_array_equal(data.test, bits[2:])
        self.assertEqual(data.image_shape, (2, 2))

    def test_count_mismatch_rejected(self):
        path = self.dir / 'short.silb'
        path.write_bytes(SILB_HEADER.pack(b'SILB', 1, 28, 28, 10, 5) + b'\x00' * 10)
        with self.assertRaises(DataFormatError):
            load_silhouettes(path)

    def test_bad_magic_rejected(self):
        path = self.dir / 'magic.silb'
        path.write_bytes(struct.pack('>4sIIIII', b'SILX', 1, 1, 1, 0, 0))
        with self.assertRaises(DataFormatError):
            load_silhouettes(path)

    def test_writer_keeps_every_split(self):
        rows   = np.array([[1, 0], [0, 1], [1, 1], [0, 0]], dtype=np.uint8)
        data   = BinaryDataset(rows, np.array(['test', 'train', 'valid', 'train']), image_shape=(1, 2))
        path   = write_silhouettes(self.dir / 'out.silb', data)
        loaded = load_silhouettes(path)
        self.assertEqual(path.read_bytes()[:8], b'SILB' + SILB_VERSION.to_bytes(4, 'big'))
        np.testing.assert_array_equal(loaded.train, [[0, 1], [0, 0]])
        np.testing.assert_array_equal(loaded.valid, [[1, 1]])
        np.testing.assert_array_equal(loaded.test, [[1, 0]])

    def test_files_round_trip_byte_for_byte(self):
        rng = np.random.default_rng(8)
        without_valid = BinaryDataset((rng.random((5, 6)) < 0.5), np.array(['train'] * 3 + ['test'] * 2),
                                      image_shape=(2, 3))
        with_valid = without_valid.with_validation(0.34, seed=2)
        for name, data in (('v1', without_valid), ('v2', with_valid)):
            first  = write_silhouettes(self.dir / f'{name}.silb', data)
            second = write_silhouettes(self.dir / f'{name}_again.silb', load_silhouettes(first))
            self.assertEqual(first.read_bytes(), second.read_bytes(), name)
        self.assertEqual(load_silhouettes(self.dir / 'v2.silb').valid.shape[0], 1)

    def test_standard_release_split_sizes(self):
        path = self.dir / 'caltech101_silhouettes_28.mat'
        rng  = np.random.default_rng(9)
        savemat(str(path), {
            'train_data': (rng.random((4100, 784)) < 0.5).astype(np.uint8),
            'val_data':   (rng.random((2264, 784)) < 0.5).astype(np.uint8),
            'test_data':  (rng.random((2307, 784)) < 0.5).astype(np.uint8),
        })
        converted = convert_silhouettes_mat(path)
        loaded    = load_silhouettes(write_silhouettes(self.dir / 'silhouettes.silb', converted))
        sizes = (loaded.train.shape[0], loaded.valid.shape[0], loaded.test.shape[0])
        self.assertEqual(sizes, (4100, 2264, 2307))
        self.assertEqual(loaded.image_shape, (28, 28))
        np.testing.assert_array_equal(loaded.rows, converted.rows)

    def test_unknown_version_rejected(self):
        path = self.dir / 'future.silb'
        path.write_bytes(SILB_HEADER_V2.pack(b'SILB', 9, 1, 1, 0, 0, 0))
        with self.assertRaises(DataFormatError):
            load_silhouettes(path)

    def test_mat_conversion(self):
        path = self.dir / 'silhouettes.mat'
        rng  = np.random.default_rng(6)
        savemat(str(path), {
            'train_data': (rng.random((4, 16)) < 0.5).astype(np.uint8),
            'val_data':   (rng.random((2, 16)) < 0.5).astype(np.uint8),
            'test_data':  (rng.random((3, 16)) < 0.5).astype(np.uint8),
        })
        data = convert_silhouettes_mat(path)
        self.assertEqual((data.train.shape[0], data.valid.shape[0], data.test.shape[0]), (4, 2, 3))
        self.assertEqual(data.image_shape, (4, 4))


class ToyDistributionTests(TempDirMixin, SimpleTestCase):

    def test_bars_and_stripes(self):
        patterns, probs = toy_distribution('bars-and-stripes', {'width': 3, 'height': 3})
        self.assertEqual(patterns.shape, (14, 9))
        self.assertEqual(len({tuple(p) for p in patterns}), 14)
        self.assertAlmostEqual(probs.sum(), 1.0)

    def test_parity(self):
        patterns, _ = toy_distribution('parity', {'n': 3})
        self.assertEqual(patterns.tolist(), [[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]])

    def test_degenerate_bernoulli(self):
        data = toy_dataset('independent-bernoulli', {'probs': [1.0, 0.0], 'samples': 10}, seed=0)
        np.testing.assert_array_equal(data.train, np.tile([1.0, 0.0], (10, 1)))
        self.assertEqual(data.test.shape, (2, 2))

    def test_support_is_train_and_test(self):
        data = toy_dataset('parity', {'n': 4})
        np.testing.assert_array_equal(data.train, data.test)
        self.assertEqual(data.train.shape, (8, 4))

    def test_sampling_is_seeded(self):
        params = {'width': 2, 'height': 2, 'samples': 50}
        a = toy_dataset('bars-and-stripes', params, seed=3)
        b = toy_dataset('bars-and-stripes', params, seed=3)
        np.testing.assert_array_equal(a.rows, b.rows)
        self.assertEqual(a.image_shape, (2, 2))

    def test_unknown_kind_and_missing_parameter(self):
        with self.assertRaises(ValidationError):
            toy_distribution('checkerboard', {})
        with self.assertRaises(ValidationError):
            toy_distribution('parity', {})

    def test_validation_split(self):
        data = toy_dataset('parity', {'n': 4}).with_validation(0.25, seed=1)
        self.assertEqual(data.valid.shape[0], 2)
        self.assertEqual(data.train.shape[0], 6)
        self.assertEqual(data.test.shape[0], 8)

    def test_csv_export(self):
        data  = toy_dataset('parity', {'n': 2})
        frame = pd.read_csv(export_csv(data, self.dir / 'data.csv'))
        self.assertEqual(list(frame.columns), ['p0', 'p1', 'split'])
        self.assertEqual(list(frame['split']), ['train', 'train', 'test', 'test'])

    def test_non_binary_rows_rejected(self):
        with self.assertRaises(ValidationError):
            BinaryDataset(np.array([[0, 2]]), np.array(['train']))

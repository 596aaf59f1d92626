"""
boltzmann/datasets.py
─────────────────────
Binary datasets: benchmark ingestion, desk-scale toy distributions and the
SILB container.

IDX      big-endian: 0x00 0x00, type byte (0x08 only), ndim byte, ndim
         uint32 sizes, row-major payload.  gzip is detected by its magic.
SILB v1  big-endian header  b'SILB' | version | rows | cols | count | train_count
         (uint32 each) followed by count·rows·cols bits, row-major, packed
         MSB-first into bytes (np.packbits), zero-padded to a whole byte.
         The first train_count examples are the train split.
SILB v2  adds a trailing uint32 valid_count; rows are train, then valid,
         then test.  Written only when the dataset has valid rows.
"""

from __future__ import annotations

import gzip
import hashlib
import logging
import struct
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.io import loadmat

from boltzmann.exceptions import ArtifactIOError, DataFormatError, ValidationError
from boltzmann.network import make_rng

logger = logging.getLogger(__name__)

IDX_UBYTE    = 0x08
SILB_MAGIC   = b'SILB'
SILB_VERSION = 2
SILB_HEADER  = struct.Struct('>4sIIIII')
SILB_HEADER_V2 = struct.Struct('>4sIIIIII')
SPLITS       = ('train', 'valid', 'test')
TOY_KINDS    = ('bars-and-stripes', 'parity', 'independent-bernoulli')


# ─────────────────────────────────────────────
# Dataset type
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class BinaryDataset:
    rows:        np.ndarray
    splits:      np.ndarray
    provenance:  dict = field(default_factory=dict)
    image_shape: tuple[int, int] | None = None

    def __post_init__(self):
        rows   = np.asarray(self.rows)
        splits = np.asarray(self.splits, dtype='<U5')
        if rows.ndim != 2:
            raise ValidationError(f'dataset rows must form a 2-D array, got shape {rows.shape}')
        if not np.all((rows == 0) | (rows == 1)):
            raise ValidationError('dataset entries must be 0 or 1')
        if splits.shape != (rows.shape[0],):
            raise ValidationError('one split tag per row is required')
        unknown = set(np.unique(splits)) - set(SPLITS)
        if unknown:
            raise ValidationError(f'unknown split tag(s) {sorted(unknown)}')
        rows = rows.astype(np.uint8)
        rows.setflags(write=False)
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'splits', splits)

    @property
    def n_vis(self) -> int:
        return int(self.rows.shape[1])

    def split(self, tag: str) -> np.ndarray:
        """Rows of one split as float64, in file order."""
        return self.rows[self.splits == tag].astype(np.float64)

    @property
    def train(self) -> np.ndarray:
        return self.split('train')

    @property
    def valid(self) -> np.ndarray:
        return self.split('valid')

    @property
    def test(self) -> np.ndarray:
        return self.split('test')

    def with_validation(self, fraction: float, seed: int) -> 'BinaryDataset':
        """Retag a seeded random `fraction` of the train rows as 'valid'."""
        if not 0.0 <= fraction < 1.0:
            raise ValidationError(f'validation fraction must lie in [0, 1), got {fraction}')
        splits = self.splits.copy()
        train  = np.flatnonzero(splits == 'train')
        take   = int(round(fraction * train.size))
        if take:
            chosen = make_rng(seed).choice(train, size=take, replace=False)
            splits[chosen] = 'valid'
        prov = dict(self.provenance, validation={'fraction': fraction, 'seed': seed})
        return BinaryDataset(self.rows, splits, prov, self.image_shape)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ArtifactIOError(f'cannot read {path}: {exc}') from exc
    if raw[:2] == b'\x1f\x8b':
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise DataFormatError(f'{path}: corrupt gzip stream ({exc})') from exc
    return raw


def _write_bytes(path: str | Path, payload: bytes) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as exc:
        raise ArtifactIOError(f'cannot write {path}: {exc}') from exc
    return path


# ─────────────────────────────────────────────
# IDX
# ─────────────────────────────────────────────

def load_idx(path: str | Path) -> np.ndarray:
    """Unsigned-byte IDX file (raw or gzip) as a uint8 array of its declared dims."""
    raw = _read_bytes(path)
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise DataFormatError(f'{path}: bad IDX magic')
    dtype, ndim = raw[2], raw[3]
    if dtype != IDX_UBYTE:
        raise DataFormatError(f'{path}: unsupported IDX type byte 0x{dtype:02x} (only 0x08)')
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError(f'{path}: truncated IDX header')
    dims = struct.unpack(f'>{ndim}I', raw[4:header])
    size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(raw) - header < size:
        raise DataFormatError(f'{path}: truncated payload, dims {dims} need {size} bytes, '
                              f'found {len(raw) - header}')
    if len(raw) - header > size:
        raise DataFormatError(f'{path}: {len(raw) - header - size} trailing byte(s) after the payload')
    logger.debug(f'[DATA] IDX {path}: dims {dims}')
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims).copy()


def write_idx(path: str | Path, array, compress: bool = False) -> Path:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        if array.size and (array.min() < 0 or array.max() > 255 or not np.all(array == np.round(array))):
            raise ValidationError('IDX writer only handles unsigned bytes')
        array = array.astype(np.uint8)
    payload = bytes([0, 0, IDX_UBYTE, array.ndim]) + struct.pack(f'>{array.ndim}I', *array.shape)
    payload += np.ascontiguousarray(array).tobytes()
    if compress:
        payload = gzip.compress(payload, mtime=0)
    return _write_bytes(path, payload)


def stochastic_binarize(grays, seed: int) -> np.ndarray:
    """Each pixel 1 with probability gray/255, from one seeded generator."""
    grays = np.asarray(grays)
    if grays.size and (grays.min() < 0 or grays.max() > 255):
        raise ValidationError('gray levels must lie in [0, 255]')
    rng = make_rng(seed)
    return (rng.random(grays.shape) < grays.astype(np.float64) / 255.0).astype(np.uint8)


def load_mnist(train_images: str | Path, test_images: str | Path, seed: int) -> BinaryDataset:
    """Binarize once: train images first, then test images, from one generator."""
    train_path, test_path = Path(train_images), Path(test_images)
    train, test = load_idx(train_path), load_idx(test_path)
    if train.ndim != 3 or test.ndim != 3 or train.shape[1:] != test.shape[1:]:
        raise DataFormatError(f'expected image stacks of equal size, got {train.shape} and {test.shape}')
    grays = np.concatenate([train.reshape(train.shape[0], -1), test.reshape(test.shape[0], -1)])
    rows  = stochastic_binarize(grays, seed)
    provenance = {
        'source':       'mnist',
        'train_sha256': _sha256(train_path),
        'test_sha256':  _sha256(test_path),
        'binarization': {'kind': 'bernoulli(gray/255)', 'seed': seed},
    }
    logger.info(f'[DATA] MNIST binarized: {train.shape[0]} train / {test.shape[0]} test (seed {seed})')
    splits = np.array(['train'] * train.shape[0] + ['test'] * test.shape[0])
    return BinaryDataset(rows, splits, provenance, tuple(train.shape[1:]))


# ─────────────────────────────────────────────
# SILB
# ─────────────────────────────────────────────

def load_silhouettes(path: str | Path) -> BinaryDataset:
    path = Path(path)
    raw  = _read_bytes(path)
    if len(raw) < SILB_HEADER.size:
        raise DataFormatError(f'{path}: truncated SILB header')
    magic, version = raw[:4], int.from_bytes(raw[4:8], 'big')
    if magic != SILB_MAGIC:
        raise DataFormatError(f'{path}: bad SILB magic {magic!r}')
    if version == 1:
        header = SILB_HEADER
        _, _, rows, cols, count, train_count = header.unpack_from(raw)
        valid_count = 0
    elif version == SILB_VERSION:
        header = SILB_HEADER_V2
        if len(raw) < header.size:
            raise DataFormatError(f'{path}: truncated SILB header')
        _, _, rows, cols, count, train_count, valid_count = header.unpack_from(raw)
    else:
        raise DataFormatError(f'{path}: unsupported SILB version {version}')
    if rows < 1 or cols < 1 or train_count + valid_count > count:
        raise DataFormatError(f'{path}: malformed header rows={rows} cols={cols} '
                              f'count={count} train_count={train_count} valid_count={valid_count}')
    bits   = count * rows * cols
    needed = (bits + 7) // 8
    body   = raw[header.size:]
    if len(body) != needed:
        raise DataFormatError(f'{path}: header declares {count} example(s) of {rows}x{cols} '
                              f'({needed} bytes), payload has {len(body)}')
    flat   = np.unpackbits(np.frombuffer(body, dtype=np.uint8), count=bits)
    test_count = count - train_count - valid_count
    splits = np.array(['train'] * train_count + ['valid'] * valid_count + ['test'] * test_count)
    logger.info(f'[DATA] SILB v{version} {path}: {train_count} train / {valid_count} valid / '
                f'{test_count} test, {rows}x{cols}')
    return BinaryDataset(flat.reshape(count, rows * cols), splits,
                         {'source': 'silb', 'sha256': hashlib.sha256(raw).hexdigest()}, (rows, cols))


def write_silhouettes(path: str | Path, dataset: BinaryDataset) -> Path:
    """
    Rows in train, valid, test order.  Without valid rows the file is v1, so
    v1 files read and written back stay byte-identical.
    """
    blocks = [dataset.rows[dataset.splits == tag] for tag in SPLITS]
    rows, cols = dataset.image_shape or (1, dataset.n_vis)
    if rows * cols != dataset.n_vis:
        raise ValidationError(f'image shape {rows}x{cols} does not match {dataset.n_vis} pixels')
    ordered = np.concatenate(blocks)
    train, valid = blocks[0].shape[0], blocks[1].shape[0]
    if valid:
        header = SILB_HEADER_V2.pack(SILB_MAGIC, SILB_VERSION, rows, cols, ordered.shape[0], train, valid)
    else:
        header = SILB_HEADER.pack(SILB_MAGIC, 1, rows, cols, ordered.shape[0], train)
    return _write_bytes(path, header + np.packbits(ordered.ravel()).tobytes())


def convert_silhouettes_mat(path: str | Path) -> BinaryDataset:
    """The upstream .mat release (train_data / val_data / test_data) as a dataset."""
    path = Path(path)
    try:
        mat = loadmat(str(path))
    except (OSError, ValueError) as exc:
        raise DataFormatError(f'{path}: cannot parse .mat file ({exc})') from exc
    parts, tags = [], []
    for key, tag in (('train_data', 'train'), ('val_data', 'valid'), ('test_data', 'test')):
        if key in mat:
            block = np.asarray(mat[key])
            parts.append(block)
            tags += [tag] * block.shape[0]
    if not parts or 'train_data' not in mat or 'test_data' not in mat:
        raise DataFormatError(f'{path}: expected train_data and test_data arrays')
    rows = np.concatenate(parts)
    side = int(round(np.sqrt(rows.shape[1])))
    shape = (side, side) if side * side == rows.shape[1] else (1, rows.shape[1])
    return BinaryDataset(rows, np.array(tags), {'source': 'silhouettes-mat', 'sha256': _sha256(path)}, shape)


# ─────────────────────────────────────────────
# Toy distributions
# ─────────────────────────────────────────────

def _param(params: dict, name: str, kind: str):
    if name not in params:
        raise ValidationError(f'{kind} needs parameter {name!r}')
    return params[name]


def toy_distribution(kind: str, params: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Support patterns (lexicographic order) and their exact probabilities."""
    params = params or {}
    if kind == 'bars-and-stripes':
        width, height = int(_param(params, 'width', kind)), int(_param(params, 'height', kind))
        if width < 1 or height < 1:
            raise ValidationError('bars-and-stripes needs width, height >= 1')
        found = set()
        for on in product((0, 1), repeat=height):
            found.add(tuple(np.repeat(on, width)))
        for on in product((0, 1), repeat=width):
            found.add(tuple(np.tile(on, height)))
        patterns = np.array(sorted(found), dtype=np.uint8)
        return patterns, np.full(len(patterns), 1.0 / len(patterns))

    if kind == 'parity':
        n = int(_param(params, 'n', kind))
        if not 1 <= n <= 20:
            raise ValidationError('parity needs 1 <= n <= 20')
        patterns = np.array([p for p in product((0, 1), repeat=n) if sum(p) % 2 == 0], dtype=np.uint8)
        return patterns, np.full(len(patterns), 1.0 / len(patterns))

    if kind == 'independent-bernoulli':
        probs = np.asarray(_param(params, 'probs', kind), dtype=np.float64)
        if probs.ndim != 1 or not 1 <= probs.size <= 20 or np.any((probs < 0) | (probs > 1)):
            raise ValidationError('independent-bernoulli needs 1..20 probabilities in [0, 1]')
        patterns = np.array(list(product((0, 1), repeat=probs.size)), dtype=np.uint8)
        weights  = np.prod(np.where(patterns == 1, probs, 1.0 - probs), axis=1)
        keep     = weights > 0
        return patterns[keep], weights[keep]

    raise ValidationError(f'unknown toy dataset {kind!r}, expected one of {TOY_KINDS}')


def toy_dataset(kind: str, params: dict | None = None, seed: int = 0) -> BinaryDataset:
    """
    Without params['samples'] the support itself is both the train and the
    test split.  With it, `samples` train rows and `test_samples` test rows
    (default samples // 4) are drawn i.i.d.
    """
    params = dict(params or {})
    patterns, probs = toy_distribution(kind, params)
    provenance = {'source': 'toy', 'kind': kind, 'params': params, 'seed': seed}
    shape = (int(params['height']), int(params['width'])) if kind == 'bars-and-stripes' else None

    samples = params.get('samples')
    if samples is None:
        rows   = np.concatenate([patterns, patterns])
        splits = ['train'] * len(patterns) + ['test'] * len(patterns)
        return BinaryDataset(rows, np.array(splits), provenance, shape)

    samples = int(samples)
    tests   = int(params.get('test_samples', samples // 4))
    if samples < 1 or tests < 0:
        raise ValidationError('samples must be >= 1 and test_samples >= 0')
    rng    = make_rng(seed)
    picks  = rng.choice(len(patterns), size=samples + tests, p=probs / probs.sum())
    splits = ['train'] * samples + ['test'] * tests
    return BinaryDataset(patterns[picks], np.array(splits), provenance, shape)


# ─────────────────────────────────────────────
# CSV
# ─────────────────────────────────────────────

def export_csv(dataset: BinaryDataset, path: str | Path) -> Path:
    path  = Path(path)
    frame = pd.DataFrame(dataset.rows, columns=[f'p{j}' for j in range(dataset.n_vis)])
    frame['split'] = dataset.splits
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator='\n', encoding='utf-8')
    except OSError as exc:
        raise ArtifactIOError(f'cannot write {path}: {exc}') from exc
    return path

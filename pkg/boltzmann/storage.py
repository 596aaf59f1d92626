"""
boltzmann/storage.py
────────────────────
Model file format, version 1.

    {
      "format_version": 1,
      "encoding": "decimal" | "ieee754",
      "layer_sizes": [n0, n1, ...],
      "mask": [[k, l], ...],
      "weights": {"k,l": <row-major reals>},
      "biases": [<reals per layer>],
      "offsets": [<reals per layer>] | null
    }

decimal  : JSON numbers written with repr(), which round-trips float64.
ieee754  : each real list is one base64 string of little-endian float64.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
from pathlib import Path

import numpy as np

from boltzmann.exceptions import ArtifactIOError, DataFormatError
from boltzmann.network import Model, NetworkSpec, ParameterInit, Parameters, build_network
from boltzmann.serializers import ModelDocumentSerializer, validated

logger = logging.getLogger(__name__)

ENCODINGS = ('decimal', 'ieee754')


def encode_reals(values: np.ndarray, encoding: str):
    flat = np.ascontiguousarray(values, dtype='<f8').ravel()
    if encoding == 'ieee754':
        return base64.b64encode(flat.tobytes()).decode('ascii')
    return [float(x) for x in flat]


def decode_reals(value, encoding: str, what: str) -> np.ndarray:
    if encoding == 'ieee754':
        if not isinstance(value, str):
            raise DataFormatError(f'{what}: ieee754 encoding expects a base64 string')
        try:
            raw = base64.b64decode(value.encode('ascii'), validate=True)
        except (binascii.Error, ValueError) as exc:
            raise DataFormatError(f'{what}: bad base64 payload ({exc})') from exc
        if len(raw) % 8:
            raise DataFormatError(f'{what}: payload length {len(raw)} is not a multiple of 8')
        return np.frombuffer(raw, dtype='<f8').astype(np.float64)
    if not isinstance(value, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                              for x in value):
        raise DataFormatError(f'{what}: decimal encoding expects a list of numbers')
    return np.asarray(value, dtype=np.float64)


def model_to_document(model: Model, encoding: str = 'decimal') -> dict:
    if encoding not in ENCODINGS:
        raise DataFormatError(f'unknown encoding {encoding!r}, expected one of {ENCODINGS}')
    p = model.params
    return {
        'format_version': 1,
        'encoding':       encoding,
        'layer_sizes':    list(model.spec.layer_sizes),
        'mask':           [[k, l] for k, l in model.spec.pairs],
        'weights':        {f'{k},{l}': encode_reals(p.weights[(k, l)], encoding) for k, l in model.spec.pairs},
        'biases':         [encode_reals(b, encoding) for b in p.biases],
        'offsets':        None if p.offsets is None else [encode_reals(mu, encoding) for mu in p.offsets],
    }


def model_from_document(doc: dict) -> Model:
    data     = validated(ModelDocumentSerializer, doc, 'model file', error=DataFormatError)
    encoding = data['encoding']
    spec     = NetworkSpec(tuple(data['layer_sizes']), frozenset(tuple(p) for p in data['mask']))

    weights = {}
    for key, value in data['weights'].items():
        k, l = (int(x) for x in key.split(','))
        weights[(k, l)] = decode_reals(value, encoding, f'weights[{key}]')
    biases  = tuple(decode_reals(b, encoding, f'biases[{k}]') for k, b in enumerate(data['biases']))
    offsets = None
    if data['offsets'] is not None:
        offsets = tuple(decode_reals(mu, encoding, f'offsets[{k}]') for k, mu in enumerate(data['offsets']))
    return build_network(spec, ParameterInit.explicit(Parameters(weights, biases, offsets)))


def dumps_model(model: Model, encoding: str = 'decimal') -> str:
    return json.dumps(model_to_document(model, encoding), indent=1) + '\n'


def save_model(model: Model, path: str | Path, encoding: str = 'decimal') -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps_model(model, encoding), encoding='utf-8', newline='\n')
    except OSError as exc:
        raise ArtifactIOError(f'cannot write model file {path}: {exc}') from exc
    logger.info(f'[STORAGE] wrote {model.spec.topology} model {list(model.spec.layer_sizes)} -> {path}')
    return path


def load_model(path: str | Path) -> Model:
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ArtifactIOError(f'cannot read model file {path}: {exc}') from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f'{path} is not valid JSON: {exc}') from exc
    return model_from_document(doc)


def write_json(path: str | Path, payload) -> Path:
    """Deterministic JSON artifact writer shared by the commands."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + '\n', encoding='utf-8', newline='\n')
    except OSError as exc:
        raise ArtifactIOError(f'cannot write {path}: {exc}') from exc
    return path


def read_json(path: str | Path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except OSError as exc:
        raise ArtifactIOError(f'cannot read {path}: {exc}') from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f'{path} is not valid JSON: {exc}') from exc

"""
boltzmann/enumeration.py
────────────────────────
Hidden-configuration enumeration shared by the free-energy, mixture and
partition-function code.

Configuration index m over N hidden units has bit j = (m >> (N−1−j)) & 1,
bits laid out layer-major (layer 1 unit 1 first), so index order is
lexicographic order of the flattened bitstring.

For a fixed hidden configuration H the energy is affine in v:

    E(v, H) = α_H · v + C_H

HiddenScan reduces over configurations in fixed chunks of
BM_ENUMERATION_CHUNK; chunk results are folded strictly in chunk order, so
the result does not depend on how many worker threads computed them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from boltzmann.conf import setting
from boltzmann.exceptions import EnumerationCapExceeded
from boltzmann.network import Model
from boltzmann.workers import ordered_map

logger = logging.getLogger(__name__)

ROW_BLOCK = 256
WAVE      = 32


def enumeration_cap() -> int:
    return int(setting('BM_ENUMERATION_CAP', 25))


def chunk_size() -> int:
    return int(setting('BM_ENUMERATION_CHUNK', 2 ** 14))


def check_hidden_cap(n_hidden: int, cap: int | None = None, what: str = 'hidden units') -> None:
    cap = enumeration_cap() if cap is None else cap
    if n_hidden > cap:
        raise EnumerationCapExceeded(what, n_hidden, cap)


def configuration_bits(start: int, stop: int, width: int) -> np.ndarray:
    """Rows of 0/1 floats for configuration indices start..stop−1."""
    return index_bits(np.arange(start, stop, dtype=np.int64), width)


def index_bits(indices, width: int) -> np.ndarray:
    idx    = np.asarray(indices, dtype=np.int64)[:, None]
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((idx >> shifts) & 1).astype(np.float64)


def bitstring(index: int, width: int) -> str:
    return format(int(index), 'b').zfill(width) if width else ''


def chunk_bounds(total: int, size: int | None = None) -> list[tuple[int, int]]:
    size = size or chunk_size()
    return [(s, min(s + size, total)) for s in range(0, total, size)]


def hidden_layers(model: Model, index: int) -> tuple[np.ndarray, ...]:
    """Per-layer hidden unit values of configuration `index`."""
    spec = model.spec
    bits = configuration_bits(index, index + 1, spec.n_hid)[0]
    cuts = np.cumsum(spec.layer_sizes[1:])[:-1]
    return tuple(np.split(bits, cuts))


# ── affine decomposition ────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class AffineOperator:
    """
    Matrices giving every hidden configuration's (α_H, C_H) by two matmuls:

        α = −b⁰ − X B          C = c − X b_h − rowsum((X U) ∘ X)

    X holds configuration rows, B stacks W^{k,0} for masked k, U holds the
    hidden-hidden blocks W^{k,l} (k > l ≥ 1) once each.
    """
    visible_bias:    np.ndarray
    coupling:        np.ndarray
    hidden_bias:     np.ndarray
    hidden_coupling: np.ndarray
    constant:        float

    @classmethod
    def from_model(cls, model: Model) -> 'AffineOperator':
        plain, constant = model.uncentered()
        spec  = model.spec
        n_hid = spec.n_hid
        start = [s - spec.n_vis for s in spec.unit_offsets]

        coupling = np.zeros((n_hid, spec.n_vis))
        upper    = np.zeros((n_hid, n_hid))
        for (k, l), w in plain.weights.items():
            rk = slice(start[k], start[k] + spec.layer_sizes[k])
            if l == 0:
                coupling[rk, :] = w
            else:
                rl = slice(start[l], start[l] + spec.layer_sizes[l])
                upper[rk, rl] = w
        hidden_bias = np.concatenate(plain.biases[1:]) if n_hid else np.zeros(0)
        return cls(plain.biases[0].copy(), coupling, hidden_bias, upper, constant)

    @property
    def n_hidden(self) -> int:
        return self.hidden_bias.shape[0]

    def block(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        x          = configuration_bits(start, stop, self.n_hidden)
        gradients  = -self.visible_bias[None, :] - x @ self.coupling
        intercepts = self.constant - x @ self.hidden_bias - np.sum((x @ self.hidden_coupling) * x, axis=1)
        return gradients, intercepts


# ── chunked scan over hidden configurations ─────────────────────────────────

@dataclass(frozen=True, eq=False)
class HiddenScan:
    """Per visible row: min energy, its first argmin, log Σ e^{−E}, log Σ_{H≠Ĥ} e^{−E}."""
    minimum:      np.ndarray
    argmin:       np.ndarray
    log_sum:      np.ndarray
    log_residual: np.ndarray


def _scan_chunk(op: AffineOperator, visible: np.ndarray, bounds: tuple[int, int]):
    start, stop = bounds
    gradients, intercepts = op.block(start, stop)
    n = visible.shape[0]
    minimum  = np.empty(n)
    argmin   = np.empty(n, dtype=np.int64)
    log_all  = np.empty(n)
    log_excl = np.empty(n)
    for r in range(0, n, ROW_BLOCK):
        rows   = slice(r, min(r + ROW_BLOCK, n))
        e      = visible[rows] @ gradients.T + intercepts[None, :]
        am     = np.argmin(e, axis=1)
        picked = np.arange(e.shape[0])
        minimum[rows] = e[picked, am]
        argmin[rows]  = am + start
        log_all[rows] = logsumexp(-e, axis=1)
        e[picked, am] = np.inf
        with np.errstate(divide='ignore', invalid='ignore'):
            log_excl[rows] = logsumexp(-e, axis=1) if e.shape[1] > 1 else -np.inf
    return minimum, argmin, log_all, log_excl


def scan_hidden(model: Model, visible: np.ndarray, cap: int | None = None,
                threads: int | None = None) -> HiddenScan:
    """Reduce E(v, H) over all hidden configurations for each row v."""
    spec = model.spec
    check_hidden_cap(spec.n_hid, cap)
    visible = np.asarray(visible, dtype=np.float64)
    op      = AffineOperator.from_model(model)
    n       = visible.shape[0]

    minimum  = np.full(n, np.inf)
    argmin   = np.zeros(n, dtype=np.int64)
    log_sum  = np.full(n, -np.inf)
    residual = np.full(n, -np.inf)

    chunks = chunk_bounds(2 ** spec.n_hid)
    for w in range(0, len(chunks), WAVE):
        wave = chunks[w:w + WAVE]
        for c_min, c_arg, c_all, c_excl in ordered_map(lambda b: _scan_chunk(op, visible, b), wave, threads):
            better   = c_min < minimum
            residual = np.where(better, np.logaddexp(log_sum, c_excl), np.logaddexp(residual, c_all))
            argmin   = np.where(better, c_arg, argmin)
            minimum  = np.where(better, c_min, minimum)
            log_sum  = np.logaddexp(log_sum, c_all)

    logger.debug(f'[ENUM] {n} visible rows x 2^{spec.n_hid} configurations in {len(chunks)} chunks')
    return HiddenScan(minimum, argmin, log_sum, residual)

"""
boltzmann/network.py
────────────────────
Layered Boltzmann machines of any layer-pair connectivity.

  1. NetworkSpec        : layer sizes + the set of connected (k, l) pairs, l < k
  2. Parameters / Model : dense weight blocks per connected pair, per-layer
                          biases, optional centering offsets
  3. energy() / layer_conditional()
  4. block Gibbs sampling with explicit layer schedules

Layer 0 is the visible layer.  Units inside a layer are never connected, so
every layer is conditionally independent given all the others; a schedule
group may therefore hold any set of mutually unconnected layers.

Energies are in nats:

    E(X) = − Σ_(k,l) (x^k − μ^k) W^{k,l} (x^l − μ^l) − Σ_k b^k · x^k

where μ are the centering offsets (zero unless training set them).  All
state arrays may carry leading batch dimensions: a layer has shape
(..., n^k).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from boltzmann.exceptions import ValidationError

logger = logging.getLogger(__name__)

Pair          = tuple[int, int]
LayerSchedule = tuple[tuple[int, ...], ...]


# ── 1. Topology ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple[int, ...]
    mask:        frozenset[Pair] = field(default_factory=frozenset)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        mask  = frozenset((int(k), int(l)) for k, l in self.mask)
        object.__setattr__(self, 'layer_sizes', sizes)
        object.__setattr__(self, 'mask', mask)

        if not sizes:
            raise ValidationError('layer_sizes must be non-empty')
        if any(n < 1 for n in sizes):
            raise ValidationError(f'every layer needs at least one unit, got {list(sizes)}')
        for k, l in mask:
            if not (0 <= l < k < len(sizes)):
                raise ValidationError(
                    f'pair ({k},{l}) is not an ordered layer pair 0 <= l < k <= {len(sizes) - 1}'
                )

    # ── presets ──────────────────────────────────────────────────────────────
    @classmethod
    def rbm(cls, n_vis: int, n_hid: int) -> 'NetworkSpec':
        return cls((n_vis, n_hid), frozenset({(1, 0)}))

    @classmethod
    def dbm(cls, layer_sizes: Sequence[int]) -> 'NetworkSpec':
        return cls(tuple(layer_sizes), frozenset((k, k - 1) for k in range(1, len(layer_sizes))))

    @classmethod
    def sdbm(cls, layer_sizes: Sequence[int]) -> 'NetworkSpec':
        return cls(tuple(layer_sizes), frozenset(
            (k, l) for l, k in combinations(range(len(layer_sizes)), 2)
        ))

    @classmethod
    def general(cls, layer_sizes: Sequence[int], pairs: Iterable[Pair]) -> 'NetworkSpec':
        return cls(tuple(layer_sizes), frozenset(tuple(p) for p in pairs))

    # ── shape helpers ────────────────────────────────────────────────────────
    @property
    def depth(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_vis(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_hid(self) -> int:
        return sum(self.layer_sizes[1:])

    @property
    def n_units(self) -> int:
        return sum(self.layer_sizes)

    @property
    def pairs(self) -> tuple[Pair, ...]:
        return tuple(sorted(self.mask))

    @property
    def unit_offsets(self) -> tuple[int, ...]:
        """Index of each layer's first unit in the flattened (layer-major) order."""
        return tuple(int(s) for s in np.concatenate([[0], np.cumsum(self.layer_sizes)[:-1]]))

    def connected(self, a: int, b: int) -> bool:
        return (max(a, b), min(a, b)) in self.mask

    def partners(self, k: int) -> list[int]:
        return [l for l in range(len(self.layer_sizes)) if l != k and self.connected(k, l)]

    @property
    def topology(self) -> str:
        L = self.depth
        if L == 1 and self.mask == {(1, 0)}:
            return 'rbm'
        if L >= 2 and self.mask == {(k, k - 1) for k in range(1, L + 1)}:
            return 'dbm'
        if L >= 2 and self.mask == {(k, l) for l, k in combinations(range(L + 1), 2)}:
            return 'sdbm'
        return 'general'


# ── 2. Parameters and models ────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Parameters:
    weights: dict[Pair, np.ndarray]
    biases:  tuple[np.ndarray, ...]
    offsets: tuple[np.ndarray, ...] | None = None

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> 'Parameters':
        return cls(
            weights={(k, l): np.zeros((spec.layer_sizes[k], spec.layer_sizes[l])) for k, l in spec.pairs},
            biases=tuple(np.zeros(n) for n in spec.layer_sizes),
        )

    @property
    def centered(self) -> bool:
        return self.offsets is not None and any(np.any(mu != 0.0) for mu in self.offsets)

    def offset(self, k: int) -> np.ndarray | float:
        return 0.0 if self.offsets is None else self.offsets[k]

    def copy(self, writeable: bool = True) -> 'Parameters':
        def _c(a):
            a = np.array(a, dtype=np.float64, copy=True)
            a.setflags(write=writeable)
            return a
        return Parameters(
            weights={pair: _c(w) for pair, w in self.weights.items()},
            biases=tuple(_c(b) for b in self.biases),
            offsets=None if self.offsets is None else tuple(_c(mu) for mu in self.offsets),
        )

    def scaled(self, beta: float) -> 'Parameters':
        return Parameters(
            weights={pair: beta * w for pair, w in self.weights.items()},
            biases=tuple(beta * b for b in self.biases),
            offsets=self.offsets,
        )

    def flat_vector(self) -> np.ndarray:
        """Weights (sorted pair order, row-major) then biases; offsets excluded."""
        parts = [self.weights[p].ravel() for p in sorted(self.weights)]
        parts += [b.ravel() for b in self.biases]
        return np.concatenate(parts) if parts else np.zeros(0)


@dataclass(frozen=True, eq=False)
class Model:
    """Immutable network handle; build with build_network()."""
    spec:   NetworkSpec
    params: Parameters

    @property
    def weights(self) -> dict[Pair, np.ndarray]:
        return self.params.weights

    @property
    def biases(self) -> tuple[np.ndarray, ...]:
        return self.params.biases

    def uncentered(self) -> tuple['Model', float]:
        """
        Equivalent zero-offset model and the additive energy constant c with
        E_centered(X) = E_uncentered(X) + c for every X.
        """
        if not self.params.centered:
            return self, 0.0
        spec, p = self.spec, self.params
        biases   = [b.copy() for b in p.biases]
        constant = 0.0
        for (k, l), w in p.weights.items():
            mu_k, mu_l = p.offsets[k], p.offsets[l]
            biases[k] -= w @ mu_l
            biases[l] -= w.T @ mu_k
            constant  -= float(mu_k @ w @ mu_l)
        plain = Parameters(weights=dict(p.weights), biases=tuple(biases), offsets=None)
        return Model(spec, plain.copy(writeable=False)), constant


@dataclass(frozen=True)
class ParameterInit:
    kind:   str = 'zeros'
    sigma:  float = 0.0
    seed:   int | None = None
    params: Parameters | None = None

    @classmethod
    def zeros(cls) -> 'ParameterInit':
        return cls('zeros')

    @classmethod
    def gaussian(cls, sigma: float, seed: int | None = None) -> 'ParameterInit':
        return cls('gaussian', sigma=float(sigma), seed=seed)

    @classmethod
    def explicit(cls, params: Parameters) -> 'ParameterInit':
        return cls('explicit', params=params)


def _as_block(value, shape: tuple[int, ...], what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        if arr.size == int(np.prod(shape)) and arr.ndim <= 1:
            arr = arr.reshape(shape)
        else:
            raise ValidationError(f'{what}: expected shape {shape}, got {arr.shape}')
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f'{what}: non-finite entries')
    return arr


def validate_parameters(spec: NetworkSpec, params: Parameters) -> Parameters:
    """Check shapes, masking and finiteness; returns a read-only copy."""
    extra = set(params.weights) - spec.mask
    if extra:
        raise ValidationError(f'weight supplied for unmasked pair(s) {sorted(extra)}')
    missing = spec.mask - set(params.weights)
    if missing:
        raise ValidationError(f'no weight block for masked pair(s) {sorted(missing)}')
    if len(params.biases) != len(spec.layer_sizes):
        raise ValidationError(f'expected {len(spec.layer_sizes)} bias lists, got {len(params.biases)}')

    sizes   = spec.layer_sizes
    weights = {(k, l): _as_block(params.weights[(k, l)], (sizes[k], sizes[l]), f'w^{{{k},{l}}}')
               for k, l in spec.pairs}
    biases  = tuple(_as_block(b, (sizes[k],), f'b^{k}') for k, b in enumerate(params.biases))
    offsets = None
    if params.offsets is not None:
        if len(params.offsets) != len(sizes):
            raise ValidationError(f'expected {len(sizes)} offset lists, got {len(params.offsets)}')
        offsets = tuple(_as_block(mu, (sizes[k],), f'offsets^{k}') for k, mu in enumerate(params.offsets))
        for k, mu in enumerate(offsets):
            if np.any(mu < 0.0) or np.any(mu > 1.0):
                raise ValidationError(f'offsets^{k} must lie in [0, 1]')
    return Parameters(weights, biases, offsets).copy(writeable=False)


def build_network(spec: NetworkSpec, init: ParameterInit | None = None) -> Model:
    init = init or ParameterInit.zeros()

    if init.kind == 'zeros':
        params = Parameters.zeros(spec)
    elif init.kind == 'gaussian':
        if not np.isfinite(init.sigma) or init.sigma < 0:
            raise ValidationError(f'gaussian init needs a finite sigma >= 0, got {init.sigma}')
        rng    = make_rng(init.seed)
        params = Parameters(
            weights={(k, l): rng.normal(0.0, init.sigma, (spec.layer_sizes[k], spec.layer_sizes[l]))
                     for k, l in spec.pairs},
            biases=tuple(np.zeros(n) for n in spec.layer_sizes),
        )
    elif init.kind == 'explicit':
        if init.params is None:
            raise ValidationError('explicit init requires parameters')
        params = init.params
    else:
        raise ValidationError(f'unknown init kind {init.kind!r}')

    return Model(spec, validate_parameters(spec, params))


# ── 3. States, energies, conditionals ───────────────────────────────────────

@dataclass(frozen=True, eq=False)
class BinaryState:
    """Per-layer unit values x^0..x^L; x^0 is the visible layer."""
    layers: tuple[np.ndarray, ...]

    @classmethod
    def of(cls, layers: Sequence) -> 'BinaryState':
        return cls(tuple(np.asarray(x, dtype=np.float64) for x in layers))

    @classmethod
    def zeros(cls, spec: NetworkSpec, batch: int | None = None) -> 'BinaryState':
        lead = () if batch is None else (batch,)
        return cls(tuple(np.zeros(lead + (n,)) for n in spec.layer_sizes))

    @classmethod
    def random(cls, spec: NetworkSpec, rng: np.random.Generator, batch: int | None = None,
               p: float = 0.5) -> 'BinaryState':
        lead = () if batch is None else (batch,)
        return cls(tuple((rng.random(lead + (n,)) < p).astype(np.float64) for n in spec.layer_sizes))

    @classmethod
    def from_flat(cls, spec: NetworkSpec, x) -> 'BinaryState':
        x = np.asarray(x, dtype=np.float64)
        cuts = np.cumsum(spec.layer_sizes)[:-1]
        return cls(tuple(np.split(x, cuts, axis=-1)))

    @property
    def visible(self) -> np.ndarray:
        return self.layers[0]

    @property
    def hidden(self) -> tuple[np.ndarray, ...]:
        return self.layers[1:]

    def flat(self) -> np.ndarray:
        return np.concatenate(self.layers, axis=-1)

    def with_layer(self, k: int, values) -> 'BinaryState':
        layers = list(self.layers)
        layers[k] = np.asarray(values, dtype=np.float64)
        return BinaryState(tuple(layers))

    def copy(self) -> 'BinaryState':
        return BinaryState(tuple(x.copy() for x in self.layers))


def check_state(spec: NetworkSpec, state: BinaryState, binary: bool = False) -> None:
    if len(state.layers) != len(spec.layer_sizes):
        raise ValidationError(f'state has {len(state.layers)} layers, network has {len(spec.layer_sizes)}')
    lead = state.layers[0].shape[:-1]
    for k, (x, n) in enumerate(zip(state.layers, spec.layer_sizes)):
        if x.shape[-1:] != (n,) or x.shape[:-1] != lead:
            raise ValidationError(f'layer {k}: expected trailing size {n} and batch {lead}, got {x.shape}')
        if binary and not np.all((x == 0.0) | (x == 1.0)):
            raise ValidationError(f'layer {k}: entries must be 0 or 1')


def _centered(model: Model, state: BinaryState, k: int) -> np.ndarray:
    return state.layers[k] - model.params.offset(k)


def energy(model: Model, state: BinaryState):
    """E(X) in nats; a float for a single state, an array for a batch."""
    check_state(model.spec, state)
    total = 0.0
    for k, b in enumerate(model.biases):
        total = total - state.layers[k] @ b
    for (k, l), w in model.weights.items():
        xk = _centered(model, state, k)
        xl = _centered(model, state, l)
        total = total - np.einsum('...i,ij,...j->...', xk, w, xl)
    return float(total) if np.ndim(total) == 0 else total


def layer_input(model: Model, k: int, state: BinaryState) -> np.ndarray:
    """Total input b^k + Σ_partners W (x − μ) to every unit of layer k."""
    spec = model.spec
    if not 0 <= k <= spec.depth:
        raise ValidationError(f'layer index {k} out of range 0..{spec.depth}')
    total = model.biases[k]
    for l in spec.partners(k):
        xl = _centered(model, state, l)
        if k > l:
            total = total + xl @ model.weights[(k, l)].T
        else:
            total = total + xl @ model.weights[(l, k)]
    return np.broadcast_to(total, state.layers[0].shape[:-1] + (spec.layer_sizes[k],)).copy()


def layer_conditional(model: Model, k: int, state: BinaryState) -> np.ndarray:
    """p(x^k_i = 1 | every other layer) for each unit i of layer k."""
    check_state(model.spec, state)
    return expit(layer_input(model, k, state))


# ── 4. Gibbs sampling ────────────────────────────────────────────────────────

def make_rng(seed: int | np.random.SeedSequence | None = None) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def split_rng(seed: int | None, n: int) -> list[np.random.Generator]:
    """n independent child generators; child i depends only on (seed, i)."""
    return [make_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def parity_schedule(spec: NetworkSpec) -> LayerSchedule:
    layers = range(spec.depth + 1)
    return tuple(g for g in (tuple(k for k in layers if k % 2 == 0),
                             tuple(k for k in layers if k % 2 == 1)) if g)


def sequential_schedule(spec: NetworkSpec) -> LayerSchedule:
    return tuple((k,) for k in range(spec.depth + 1))


def default_schedule(spec: NetworkSpec) -> LayerSchedule:
    """Exact parity blocks for RBM/DBM, ascending layer order otherwise."""
    if spec.topology in ('rbm', 'dbm'):
        return parity_schedule(spec)
    return sequential_schedule(spec)


def validate_schedule(spec: NetworkSpec, order: LayerSchedule) -> LayerSchedule:
    seen: set[int] = set()
    for group in order:
        for k in group:
            if not 0 <= k <= spec.depth:
                raise ValidationError(f'schedule names layer {k}, network has 0..{spec.depth}')
            if k in seen:
                raise ValidationError(f'schedule visits layer {k} twice')
            seen.add(k)
        for a, b in combinations(group, 2):
            if spec.connected(a, b):
                raise ValidationError(f'layers {a} and {b} are connected and cannot be sampled jointly')
    return tuple(tuple(g) for g in order)


def gibbs_sweep(model: Model, state: BinaryState, rng: np.random.Generator,
                order: LayerSchedule | None = None, clamp: Iterable[int] = ()) -> BinaryState:
    """
    One sweep: each scheduled group of layers is resampled jointly from its
    conditional given the current values of all other layers.  Clamped layers
    are left bit-identical.
    """
    spec  = model.spec
    order = validate_schedule(spec, order if order is not None else default_schedule(spec))
    clamp = set(clamp)
    check_state(spec, state)

    layers = list(state.layers)
    for group in order:
        current = BinaryState(tuple(layers))
        for k in group:
            if k in clamp:
                continue
            p = expit(layer_input(model, k, current))
            layers[k] = (rng.random(p.shape) < p).astype(np.float64)
    return BinaryState(tuple(layers))


def sample_chain(model: Model, state: BinaryState, steps: int, rng: np.random.Generator,
                 order: LayerSchedule | None = None, clamp: Iterable[int] = (),
                 thin: int = 1) -> list[BinaryState]:
    """Consecutive states of one chain, every `thin` sweeps."""
    if steps < 0 or thin < 1:
        raise ValidationError('steps must be >= 0 and thin >= 1')
    clamp  = tuple(clamp)
    states = []
    for t in range(1, steps + 1):
        state = gibbs_sweep(model, state, rng, order, clamp)
        if t % thin == 0:
            states.append(state)
    return states


# ── 5. Flattened general-BM view ────────────────────────────────────────────

def flatten(model: Model) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Symmetric N×N weights W (zero diagonal), biases b and constant c of the
    equivalent general BM:  E(x) = −½ xᵀ W x − bᵀ x + c.
    """
    plain, constant = model.uncentered()
    spec    = model.spec
    starts  = spec.unit_offsets
    n       = spec.n_units
    weights = np.zeros((n, n))
    for (k, l), w in plain.weights.items():
        rk = slice(starts[k], starts[k] + spec.layer_sizes[k])
        rl = slice(starts[l], starts[l] + spec.layer_sizes[l])
        weights[rk, rl] = w
        weights[rl, rk] = w.T
    biases = np.concatenate(plain.biases)
    return weights, biases, constant

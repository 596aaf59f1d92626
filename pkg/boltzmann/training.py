"""
boltzmann/training.py
─────────────────────
Joint training of any layered topology by stochastic maximum likelihood.

Per update t (0-based):

  1. draw a minibatch of training rows
  2. positive phase: pos_chain_steps Gibbs sweeps with the visible layer
     clamped, warm-started from each row's persisted hidden state
  3. negative phase: neg_chain_steps sweeps of the persistent free chains
  4. θ ← θ + lr_t · (⟨·⟩_data − ⟨·⟩_model − 2λ^{k,l} w^{k,l}),
     lr_t = initial_lr · (1 − t / total_updates)
  5. centering: μ ← (1 − ρ) μ + ρ · batch means, biases compensated so the
     distribution is unchanged by the offset move

Weight statistics are centered: ⟨(x^k − μ^k)(x^l − μ^l)ᵀ⟩.  Bias
statistics are plain ⟨x^k⟩, matching the energy in boltzmann.network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import logit, softmax

from boltzmann.constructor import regularization_schedule
from boltzmann.enumeration import AffineOperator, check_hidden_cap, configuration_bits, enumeration_cap
from boltzmann.evaluation import (
    CLIP, AnnealingSchedule, ais_log_z, average_log_likelihood, data_base_biases, exact_feasible,
    test_log_likelihood,
)
from boltzmann.exceptions import ArtifactIOError, DataFormatError, NumericalAbort, ValidationError
from boltzmann.network import (
    BinaryState, LayerSchedule, Model, NetworkSpec, Pair, ParameterInit, Parameters, build_network,
    default_schedule, flatten, gibbs_sweep, layer_conditional, make_rng, split_rng,
)
from boltzmann.serializers import HyperparameterRangesSerializer, TrainConfigSerializer, validated
from boltzmann.storage import decode_reals, encode_reals, load_model, save_model
from boltzmann.workers import ordered_map

logger = logging.getLogger(__name__)

CHAIN_BLOCK          = 32
EXACT_GRADIENT_UNITS = 20
MONITOR_BETAS        = 30_000
INIT_SIGMA           = 0.01
CHECKPOINT_MODEL     = 'model.json'
CHECKPOINT_SIDECAR   = 'chains.json'


# ─────────────────────────────────────────────
# Configuration
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class Regularization:
    eta:           float
    base_strength: float


@dataclass(frozen=True)
class Centering:
    offset_update_rate: float


@dataclass(frozen=True)
class TrainConfig:
    initial_lr:        float
    total_updates:     int
    batch_size:        int
    pos_chain_steps:   int = 1
    neg_chain_steps:   int = 1
    num_neg_chains:    int | None = None
    reg:               Regularization | None = None
    centering:         Centering | None = None
    momentum:          float = 0.0
    seed:              int = 0
    log_every:         int | None = None
    monitor_ais_runs:  int | None = None
    monitor_ais_betas: int | None = None
    sample_phases:     bool = True

    def __post_init__(self):
        validated(TrainConfigSerializer, self.to_document(), 'training config')

    @classmethod
    def from_document(cls, doc: dict) -> 'TrainConfig':
        data = dict(validated(TrainConfigSerializer, doc, 'training config'))
        if data.get('reg') is not None:
            data['reg'] = Regularization(**data['reg'])
        if data.get('centering') is not None:
            data['centering'] = Centering(**data['centering'])
        return cls(**data)

    def to_document(self) -> dict:
        return asdict(self)

    @property
    def chains(self) -> int:
        """One persistent chain per minibatch slot unless set."""
        return self.num_neg_chains or self.batch_size

    @property
    def interval(self) -> int:
        return self.log_every or max(1, self.total_updates // 20)


def learning_rate(config: TrainConfig, t: int) -> float:
    if config.total_updates == 0:
        return 0.0
    return config.initial_lr * (1.0 - t / config.total_updates)


# ─────────────────────────────────────────────
# Gradients
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Gradient:
    weights: dict[Pair, np.ndarray]
    biases:  tuple[np.ndarray, ...]

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> 'Gradient':
        p = Parameters.zeros(spec)
        return cls(p.weights, p.biases)

    def __sub__(self, other: 'Gradient') -> 'Gradient':
        return Gradient({pair: w - other.weights[pair] for pair, w in self.weights.items()},
                        tuple(a - b for a, b in zip(self.biases, other.biases)))

    def norms(self) -> dict[str, float]:
        out = {f'w{k},{l}': float(np.linalg.norm(w)) for (k, l), w in sorted(self.weights.items())}
        out.update({f'b{k}': float(np.linalg.norm(b)) for k, b in enumerate(self.biases)})
        return out

    def flat_vector(self) -> np.ndarray:
        return Parameters(self.weights, self.biases).flat_vector()


def _moments(params: Parameters, spec: NetworkSpec, state: BinaryState, weights: np.ndarray) -> Gradient:
    """Weighted centered second moments and plain first moments of a batch of states."""
    centered = [x - params.offset(k) for k, x in enumerate(state.layers)]
    return Gradient(
        {(k, l): (centered[k] * weights[:, None]).T @ centered[l] for k, l in spec.pairs},
        tuple(weights @ x for x in state.layers),
    )


def _regularize(grad: Gradient, params: Parameters, strengths: dict[Pair, float]) -> Gradient:
    if not strengths:
        return grad
    return Gradient({pair: g - 2.0 * strengths[pair] * params.weights[pair] for pair, g in grad.weights.items()},
                    grad.biases)


def exact_gradient(model: Model, data, strengths: dict[Pair, float] | None = None) -> Gradient:
    """
    Average log-likelihood gradient with both expectations computed by
    enumeration (the SML gradient with exact expectations).  Offsets are held
    fixed.
    """
    spec = model.spec
    check_hidden_cap(spec.n_units, EXACT_GRADIENT_UNITS, 'units (exact gradient)')
    rows = _training_rows(spec, data)
    n    = rows.shape[0]

    op     = AffineOperator.from_model(model)
    hidden = configuration_bits(0, 2 ** spec.n_hid, spec.n_hid)
    grads, intercepts = op.block(0, 2 ** spec.n_hid)
    posterior = softmax(-(rows @ grads.T + intercepts[None, :]), axis=1)
    joint_pos = np.hstack([np.repeat(rows, hidden.shape[0], axis=0), np.tile(hidden, (n, 1))])
    positive  = _moments(model.params, spec, BinaryState.from_flat(spec, joint_pos), posterior.ravel() / n)

    weights, biases, _ = flatten(model)
    x        = configuration_bits(0, 2 ** spec.n_units, spec.n_units)
    p_model  = softmax(0.5 * np.sum((x @ weights) * x, axis=1) + x @ biases)
    negative = _moments(model.params, spec, BinaryState.from_flat(spec, x), p_model)

    return _regularize(positive - negative, model.params, strengths or {})


# ─────────────────────────────────────────────
# Training state
# ─────────────────────────────────────────────

@dataclass(eq=False)
class TrainState:
    spec:       NetworkSpec
    params:     Parameters
    config:     TrainConfig
    data:       np.ndarray
    neg_chains: BinaryState
    pos_hidden: tuple[np.ndarray, ...]
    rngs:       list[np.random.Generator]
    strengths:  dict[Pair, float]
    velocity:   Gradient | None = None
    update:     int = 0
    metrics:    list[dict] = field(default_factory=list)
    last_positive: BinaryState | None = None

    @property
    def model(self) -> Model:
        """Live view on the mutable parameters; freeze with frozen_model()."""
        return Model(self.spec, self.params)

    def frozen_model(self) -> Model:
        return build_network(self.spec, ParameterInit.explicit(self.params))


def _training_rows(spec: NetworkSpec, data) -> np.ndarray:
    rows = np.asarray(data, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != spec.n_vis:
        raise ValidationError(f'training data must be a (k, {spec.n_vis}) array, got shape {rows.shape}')
    if rows.shape[0] == 0:
        raise ValidationError('training data is empty')
    if not np.all((rows == 0.0) | (rows == 1.0)):
        raise ValidationError('training rows must be binary')
    return rows


def _data_digest(rows: np.ndarray) -> str:
    return hashlib.sha256(rows.astype(np.uint8).tobytes()).hexdigest()


def _shift_offsets(params: Parameters, targets: tuple[np.ndarray, ...]) -> None:
    """Move offsets in place to `targets`; b^k += W Δμ^l, b^l += Wᵀ Δμ^k keeps p(X) unchanged."""
    deltas = [t - mu for t, mu in zip(targets, params.offsets)]
    for (k, l), w in params.weights.items():
        params.biases[k][...] += w @ deltas[l]
        params.biases[l][...] += w.T @ deltas[k]
    for mu, t in zip(params.offsets, targets):
        mu[...] = t


def initial_model(spec: NetworkSpec, data, seed: int = 0, sigma: float = INIT_SIGMA) -> Model:
    """Gaussian weights, visible biases at the logit of the clipped data means."""
    rows  = _training_rows(spec, data)
    p     = build_network(spec, ParameterInit.gaussian(sigma, seed)).params.copy()
    means = np.clip(rows.mean(axis=0), CLIP, 1.0 - CLIP)
    p.biases[0][...] = logit(means)
    return build_network(spec, ParameterInit.explicit(p))


def init_train_state(model: Model, data, config: TrainConfig) -> TrainState:
    spec   = model.spec
    rows   = _training_rows(spec, data)
    params = model.params.copy(writeable=True)
    if params.offsets is None:
        params = Parameters(params.weights, params.biases, tuple(np.zeros(n) for n in spec.layer_sizes))
    if config.centering is not None:
        _shift_offsets(params, (rows.mean(axis=0),) + tuple(np.full(n, 0.5) for n in spec.layer_sizes[1:]))

    blocks = -(-config.chains // CHAIN_BLOCK)
    rngs   = split_rng(config.seed, 1 + blocks)
    neg    = BinaryState.random(spec, rngs[0], batch=config.chains)
    pos    = tuple((rngs[0].random((rows.shape[0], n)) < 0.5).astype(np.float64) for n in spec.layer_sizes[1:])
    strengths = {}
    if config.reg is not None:
        strengths = regularization_schedule(spec, config.reg.eta, config.reg.base_strength)
    velocity = Gradient.zeros(spec) if config.momentum > 0 else None
    return TrainState(spec, params, config, rows, neg, pos, rngs, strengths, velocity)


# ─────────────────────────────────────────────
# One update
# ─────────────────────────────────────────────

def _advance_negative(state: TrainState, model: Model, order: LayerSchedule, threads: int | None) -> BinaryState:
    chains = state.neg_chains
    n      = chains.layers[0].shape[0]
    bounds = [(s, min(s + CHAIN_BLOCK, n)) for s in range(0, n, CHAIN_BLOCK)]

    def run(i: int) -> BinaryState:
        start, stop = bounds[i]
        block = BinaryState(tuple(x[start:stop] for x in chains.layers))
        for _ in range(state.config.neg_chain_steps):
            block = gibbs_sweep(model, block, state.rngs[1 + i], order)
        return block

    blocks = ordered_map(run, range(len(bounds)), threads)
    return BinaryState(tuple(np.concatenate([b.layers[k] for b in blocks])
                             for k in range(len(chains.layers))))


def sml_gradient(state: TrainState, batch, threads: int | None = None) -> Gradient:
    """
    SML gradient for the training rows indexed by `batch`.  Advances the
    positive chains of those rows and the persistent negative chains.
    """
    batch = np.asarray(batch, dtype=np.int64)
    if batch.size == 0:
        raise ValidationError('empty minibatch')
    spec, config = state.spec, state.config
    model = state.model

    if not config.sample_phases:
        state.last_positive = None
        return _regularize(Gradient.zeros(spec), state.params, state.strengths)

    order = default_schedule(spec)
    pos   = BinaryState((state.data[batch],) + tuple(h[batch] for h in state.pos_hidden))
    for _ in range(config.pos_chain_steps):
        pos = gibbs_sweep(model, pos, state.rngs[0], order, clamp=(0,))
    for h, x in zip(state.pos_hidden, pos.hidden):
        h[batch] = x
    state.neg_chains    = _advance_negative(state, model, order, threads)
    state.last_positive = pos

    positive = _moments(state.params, spec, pos, np.full(batch.size, 1.0 / batch.size))
    n_neg    = state.neg_chains.layers[0].shape[0]
    negative = _moments(state.params, spec, state.neg_chains, np.full(n_neg, 1.0 / n_neg))
    return _regularize(positive - negative, state.params, state.strengths)


def update_offsets(state: TrainState, positive: BinaryState) -> tuple[np.ndarray, ...]:
    """μ ← (1 − ρ) μ + ρ · batch means (data for the visibles, positive chains for the hiddens)."""
    if state.config.centering is None:
        raise ValidationError('centering is disabled for this run')
    rho     = state.config.centering.offset_update_rate
    targets = tuple(np.clip((1.0 - rho) * mu + rho * x.mean(axis=0), 0.0, 1.0)
                    for mu, x in zip(state.params.offsets, positive.layers))
    _shift_offsets(state.params, targets)
    return state.params.offsets


def _apply(state: TrainState, grad: Gradient, lr: float) -> None:
    step = grad
    if state.velocity is not None:
        m = state.config.momentum
        for pair, v in state.velocity.weights.items():
            v *= m
            v += grad.weights[pair]
        for v, g in zip(state.velocity.biases, grad.biases):
            v *= m
            v += g
        step = state.velocity
    for pair, w in state.params.weights.items():
        w += lr * step.weights[pair]
    for b, g in zip(state.params.biases, step.biases):
        b += lr * g


def _finite(params: Parameters) -> bool:
    return all(np.all(np.isfinite(a)) for a in (*params.weights.values(), *params.biases, *params.offsets))


# ─────────────────────────────────────────────
# Monitoring
# ─────────────────────────────────────────────

def _monitor_ll(state: TrainState, model: Model, rows: np.ndarray, threads: int | None) -> tuple[float | None, str | None]:
    config = state.config
    if exact_feasible(model) and model.spec.n_hid <= enumeration_cap():
        return average_log_likelihood(model, rows, threads=threads), 'exact'
    if config.monitor_ais_runs:
        schedule = AnnealingSchedule.uniform(config.monitor_ais_betas or MONITOR_BETAS, config.monitor_ais_runs)
        result   = ais_log_z(model, schedule, config.seed + state.update,
                             data_base_biases(model, state.data), threads)
        return test_log_likelihood(model, rows, result.log_z_estimate, 'meanfield').mean, 'ais-meanfield'
    return None, None


def _record(state: TrainState, grad: Gradient, test: np.ndarray | None, threads: int | None) -> dict:
    model = state.frozen_model()
    rows  = state.data if test is None else test
    ll, method = _monitor_ll(state, model, rows, threads)
    recon = None
    if state.last_positive is not None:
        p     = layer_conditional(model, 0, state.last_positive)
        recon = float(np.mean((p - state.last_positive.visible) ** 2))
    return {
        'update':               state.update,
        'lr':                   learning_rate(state.config, state.update),
        'll':                   ll,
        'll_method':            method,
        'll_split':             'train' if test is None else 'test',
        'grad_norms':           grad.norms(),
        'reconstruction_error': recon,
    }


def _append_jsonl(path: Path, record: dict) -> None:
    try:
        with path.open('a', encoding='utf-8', newline='\n') as fh:
            fh.write(json.dumps(record, sort_keys=True) + '\n')
    except OSError as exc:
        raise ArtifactIOError(f'cannot append to {path}: {exc}') from exc


# ─────────────────────────────────────────────
# Checkpoints
# ─────────────────────────────────────────────

def _pack(x: np.ndarray) -> dict:
    return {'shape': list(x.shape), 'bits': base64.b64encode(np.packbits(x.astype(np.uint8)).tobytes()).decode('ascii')}


def _unpack(doc: dict, what: str) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in doc['shape'])
        raw   = np.frombuffer(base64.b64decode(doc['bits'], validate=True), dtype=np.uint8)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f'checkpoint {what}: malformed packed array ({exc})') from exc
    count = int(np.prod(shape))
    if raw.size * 8 < count:
        raise DataFormatError(f'checkpoint {what}: payload too short for shape {shape}')
    return np.unpackbits(raw, count=count).reshape(shape).astype(np.float64)


def save_checkpoint(state: TrainState, directory: str | Path) -> Path:
    """model.json (ieee754, bit-exact) plus a sidecar with chains and generator states."""
    directory = Path(directory)
    save_model(state.frozen_model(), directory / CHECKPOINT_MODEL, encoding='ieee754')
    velocity = None
    if state.velocity is not None:
        velocity = {
            'weights': {f'{k},{l}': encode_reals(v, 'ieee754') for (k, l), v in state.velocity.weights.items()},
            'biases':  [encode_reals(v, 'ieee754') for v in state.velocity.biases],
        }
    sidecar = {
        'update':      state.update,
        'config':      state.config.to_document(),
        'data_sha256': _data_digest(state.data),
        'neg_chains':  [_pack(x) for x in state.neg_chains.layers],
        'pos_hidden':  [_pack(x) for x in state.pos_hidden],
        'rng_states':  [g.bit_generator.state for g in state.rngs],
        'velocity':    velocity,
        'metrics':     state.metrics,
    }
    path = directory / CHECKPOINT_SIDECAR
    try:
        path.write_text(json.dumps(sidecar, sort_keys=True) + '\n', encoding='utf-8', newline='\n')
    except OSError as exc:
        raise ArtifactIOError(f'cannot write checkpoint {path}: {exc}') from exc
    logger.info(f'[TRAIN] checkpoint at update {state.update} -> {directory}')
    return directory


def load_checkpoint(directory: str | Path, data) -> TrainState:
    directory = Path(directory)
    model     = load_model(directory / CHECKPOINT_MODEL)
    path      = directory / CHECKPOINT_SIDECAR
    try:
        sidecar = json.loads(path.read_text(encoding='utf-8'))
    except OSError as exc:
        raise ArtifactIOError(f'cannot read checkpoint {path}: {exc}') from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f'{path} is not valid JSON: {exc}') from exc

    spec   = model.spec
    rows   = _training_rows(spec, data)
    if sidecar.get('data_sha256') != _data_digest(rows):
        raise ValidationError('checkpoint was written for different training data')
    config = TrainConfig.from_document(sidecar['config'])

    rngs = []
    for s in sidecar['rng_states']:
        g = np.random.Generator(np.random.PCG64())
        g.bit_generator.state = s
        rngs.append(g)

    velocity = None
    if sidecar.get('velocity') is not None:
        doc = sidecar['velocity']
        velocity = Gradient(
            {(k, l): decode_reals(doc['weights'][f'{k},{l}'], 'ieee754', f'velocity[{k},{l}]')
                     .reshape(spec.layer_sizes[k], spec.layer_sizes[l]) for k, l in spec.pairs},
            tuple(decode_reals(v, 'ieee754', f'velocity.biases[{k}]') for k, v in enumerate(doc['biases'])),
        )

    params = model.params.copy(writeable=True)
    if params.offsets is None:
        params = Parameters(params.weights, params.biases, tuple(np.zeros(n) for n in spec.layer_sizes))
    strengths = {}
    if config.reg is not None:
        strengths = regularization_schedule(spec, config.reg.eta, config.reg.base_strength)
    return TrainState(
        spec, params, config, rows,
        BinaryState(tuple(_unpack(x, 'neg_chains') for x in sidecar['neg_chains'])),
        tuple(_unpack(x, 'pos_hidden') for x in sidecar['pos_hidden']),
        rngs, strengths, velocity, int(sidecar['update']), list(sidecar.get('metrics', [])),
    )


# ─────────────────────────────────────────────
# Training loop
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class TrainResult:
    model:   Model
    metrics: list[dict]
    state:   TrainState | None


def train(model: Model | None, data, config: TrainConfig | None, test=None,
          checkpoint_dir: str | Path | None = None, resume: str | Path | None = None,
          metrics_sink: str | Path | None = None, threads: int | None = None,
          stop_after: int | None = None) -> TrainResult:
    """
    Run config.total_updates SML updates (or the remainder of a resumed run).
    With zero updates the input model is returned as is.  `stop_after` ends
    the run early at that update count, checkpointing it when checkpoint_dir
    is set, so a later call with resume= continues bit-identically.
    """
    if resume is None and (model is None or config is None):
        raise ValidationError('a model and a training config are required unless resuming')
    if resume is None and config.total_updates == 0:
        logger.info('[TRAIN] zero updates requested; model returned unchanged')
        return TrainResult(model, [], None)

    if resume is not None:
        state = load_checkpoint(resume, data)
        if config is not None and config.to_document() != state.config.to_document():
            raise ValidationError('resumed run must use the checkpoint\'s training config')
    else:
        state = init_train_state(model, data, config)
    config = state.config

    test_rows = None if test is None or len(test) == 0 else _training_rows(state.spec, test)
    sink = Path(metrics_sink) if metrics_sink is not None else None
    if sink is not None:
        sink.parent.mkdir(parents=True, exist_ok=True)
        if resume is None:
            sink.write_text('', encoding='utf-8')

    n_rows = state.data.shape[0]
    size   = min(config.batch_size, n_rows)
    logger.info(f'[TRAIN] {state.spec.topology} {list(state.spec.layer_sizes)}: updates {state.update}..'
                f'{config.total_updates}, batch {size}, {config.chains} negative chain(s)')

    until = config.total_updates if stop_after is None else min(stop_after, config.total_updates)
    while state.update < until:
        t     = state.update
        lr    = learning_rate(config, t)
        batch = state.rngs[0].choice(n_rows, size=size, replace=False)
        grad  = sml_gradient(state, batch, threads)
        _apply(state, grad, lr)
        if config.centering is not None and state.last_positive is not None:
            update_offsets(state, state.last_positive)
        if not _finite(state.params):
            raise NumericalAbort('non-finite parameters after the gradient step', t)
        state.update += 1

        if state.update % config.interval == 0 or state.update == config.total_updates:
            record = _record(state, grad, test_rows, threads)
            state.metrics.append(record)
            ll = 'n/a' if record['ll'] is None else f'{record["ll"]:.4f}'
            logger.info(f'[TRAIN] update {state.update}/{config.total_updates} lr {record["lr"]:.3g} ll {ll}')
            if sink is not None:
                _append_jsonl(sink, record)
            if checkpoint_dir is not None:
                save_checkpoint(state, checkpoint_dir)

    if checkpoint_dir is not None and state.update < config.total_updates:
        save_checkpoint(state, checkpoint_dir)
    return TrainResult(state.frozen_model(), state.metrics, state)


# ─────────────────────────────────────────────
# Random search
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class HyperparameterRanges:
    lr_log10:          tuple[float, float] = (-4.0, -2.0)
    reg_log10:         tuple[float, float] = (-7.0, -4.0)
    eta:               tuple[float, float] = (0.5, 3.5)
    offset_rate_log10: tuple[float, float] = (-8.0, -5.0)

    def __post_init__(self):
        validated(HyperparameterRangesSerializer, {k: list(v) for k, v in asdict(self).items()},
                  'hyperparameter ranges')

    @classmethod
    def from_document(cls, doc: dict) -> 'HyperparameterRanges':
        data = validated(HyperparameterRangesSerializer, doc, 'hyperparameter ranges')
        return cls(**{k: tuple(v) for k, v in data.items()})


MNIST_RANGES       = HyperparameterRanges()
SILHOUETTES_RANGES = HyperparameterRanges(lr_log10=(-4.5, -2.5))


def sample_hyperparams(ranges: HyperparameterRanges, seed: int, base: TrainConfig,
                       count: int = 16) -> list[TrainConfig]:
    """
    `count` configurations drawn from one seeded generator: log-uniform
    learning rate, L2 base strength and centering rate; η uniform.
    """
    if count < 1:
        raise ValidationError('count must be >= 1')
    rng = make_rng(seed)
    out = []
    for i in range(count):
        lr   = 10.0 ** rng.uniform(*ranges.lr_log10)
        reg  = 10.0 ** rng.uniform(*ranges.reg_log10)
        eta  = float(rng.uniform(*ranges.eta))
        rate = 10.0 ** rng.uniform(*ranges.offset_rate_log10)
        out.append(replace(base, initial_lr=float(lr), reg=Regularization(eta, float(reg)),
                           centering=Centering(float(rate)), seed=base.seed + i))
    return out

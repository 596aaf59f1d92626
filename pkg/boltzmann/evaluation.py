"""
boltzmann/evaluation.py
───────────────────────
Partition functions and log-likelihoods.

  exact_log_z          enumeration oracle (marginalize / full / visible routes)
  ais_log_z            annealed importance sampling on the energy path
                       E_β = (1 − β)·E_A + β·E_model
  test_log_likelihood  −F(v) − log Z per example (exact F or the mean-field bound)
  bernoulli_baseline   independent-Bernoulli reference model
  nearest_neighbors    pixelwise L² neighbours of generated samples
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit, logsumexp

from boltzmann.conf import setting
from boltzmann.enumeration import check_hidden_cap, chunk_bounds, configuration_bits, enumeration_cap
from boltzmann.exceptions import EnumerationCapExceeded, NumericalAbort, ValidationError
from boltzmann.free_energy import MeanFieldConfig, exact_free_energy, meanfield_free_energy
from boltzmann.network import (
    BinaryState, Model, Parameters, default_schedule, energy, flatten, gibbs_sweep, split_rng,
)
from boltzmann.serializers import EvaluationReportSerializer, validated
from boltzmann.workers import ordered_map

logger = logging.getLogger(__name__)

ROUTES    = ('auto', 'marginalize', 'full', 'visible')
RUN_BLOCK = 256
CLIP      = 1e-3


def eval_cap() -> int:
    return int(setting('BM_EXACT_EVAL_CAP', 2 ** 25))


# ─────────────────────────────────────────────
# Exact partition function
# ─────────────────────────────────────────────

def _route_cost(model: Model, route: str) -> int:
    spec = model.spec
    if route == 'marginalize':
        return 2 ** (spec.n_units - max(spec.layer_sizes))
    return 2 ** spec.n_units


def exact_feasible(model: Model) -> bool:
    return _route_cost(model, 'marginalize') <= eval_cap()


def _fold(parts: list[float]) -> float:
    total = -np.inf
    for p in parts:
        total = np.logaddexp(total, p)
    return float(total)


def exact_log_z(model: Model, route: str = 'auto', threads: int | None = None) -> float:
    """log Σ_X exp(−E(X)), by enumeration within BM_EXACT_EVAL_CAP evaluations."""
    if route not in ROUTES:
        raise ValidationError(f'unknown route {route!r}, expected one of {ROUTES}')
    if route == 'auto':
        route = 'marginalize'
    cost = _route_cost(model, route)
    if cost > eval_cap():
        raise EnumerationCapExceeded(f'log Z via {route}', cost, eval_cap())

    spec = model.spec
    if route == 'visible':
        check_hidden_cap(spec.n_vis, enumeration_cap(), 'visible units')
        parts = ordered_map(
            lambda b: float(logsumexp(-np.atleast_1d(exact_free_energy(
                model, configuration_bits(b[0], b[1], spec.n_vis), threads=1)))),
            chunk_bounds(2 ** spec.n_vis), threads,
        )
        return _fold(parts)

    weights, biases, constant = flatten(model)
    if route == 'full':
        def part(bounds):
            x = configuration_bits(bounds[0], bounds[1], spec.n_units)
            a = 0.5 * np.sum((x @ weights) * x, axis=1) + x @ biases
            return float(logsumexp(a))
        return _fold(ordered_map(part, chunk_bounds(2 ** spec.n_units), threads)) - constant

    k      = int(np.argmax(spec.layer_sizes))
    start  = spec.unit_offsets[k]
    summed = np.arange(start, start + spec.layer_sizes[k])
    rest   = np.setdiff1d(np.arange(spec.n_units), summed)
    w_rr   = weights[np.ix_(rest, rest)]
    w_rk   = weights[np.ix_(rest, summed)]
    b_r, b_k = biases[rest], biases[summed]

    def part(bounds):
        x = configuration_bits(bounds[0], bounds[1], rest.size)
        a = 0.5 * np.sum((x @ w_rr) * x, axis=1) + x @ b_r
        a = a + np.sum(np.logaddexp(0.0, b_k[None, :] + x @ w_rk), axis=1)
        return float(logsumexp(a))

    return _fold(ordered_map(part, chunk_bounds(2 ** rest.size), threads)) - constant


# ─────────────────────────────────────────────
# AIS
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class AnnealingSchedule:
    betas:    np.ndarray
    num_runs: int

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        object.__setattr__(self, 'betas', betas)
        if betas.ndim != 1 or betas.size < 2:
            raise ValidationError('an annealing schedule needs at least two betas')
        if betas[0] != 0.0 or betas[-1] != 1.0:
            raise ValidationError('betas must start at 0 and end at 1')
        if np.any(np.diff(betas) <= 0):
            raise ValidationError('betas must be strictly increasing')
        if self.num_runs < 1:
            raise ValidationError('num_runs must be >= 1')

    @classmethod
    def uniform(cls, num_betas: int, num_runs: int) -> 'AnnealingSchedule':
        if num_betas < 2:
            raise ValidationError('num_betas must be >= 2')
        betas = np.linspace(0.0, 1.0, num_betas)
        betas[-1] = 1.0
        return cls(betas, num_runs)

    def summary(self) -> dict:
        return {'num_betas': int(self.betas.size), 'num_runs': int(self.num_runs), 'path': 'energy-geometric'}


@dataclass(frozen=True, eq=False)
class AISResult:
    log_z_estimate: float
    log_weights:    np.ndarray
    ci3:            tuple[float, float]
    schedule:       dict
    log_z_base:     float
    aborted_runs:   int = 0

    def to_document(self) -> dict:
        return {
            'estimate': self.log_z_estimate,
            'ci3':      [self.ci3[0], self.ci3[1]],
            'method':   'ais',
            'schedule': dict(self.schedule, aborted_runs=self.aborted_runs),
        }


def data_base_biases(model: Model, data: np.ndarray) -> tuple[np.ndarray, ...]:
    """Base-model biases: visible logit of clipped data means, hidden zero."""
    means = np.clip(np.asarray(data, dtype=np.float64).mean(axis=0), CLIP, 1.0 - CLIP)
    return (logit(means),) + tuple(np.zeros(n) for n in model.spec.layer_sizes[1:])


def _tempered(plain: Model, base: tuple[np.ndarray, ...], beta: float) -> Model:
    return Model(plain.spec, Parameters(
        weights={pair: beta * w for pair, w in plain.weights.items()},
        biases=tuple((1.0 - beta) * a + beta * b for a, b in zip(base, plain.biases)),
    ))


def _ais_block(plain: Model, base: tuple[np.ndarray, ...], betas: np.ndarray,
               rng: np.random.Generator, runs: int) -> np.ndarray:
    order  = default_schedule(plain.spec)
    state  = BinaryState(tuple(
        (rng.random((runs, a.size)) < expit(a)).astype(np.float64) for a in base
    ))
    log_w = np.zeros(runs)
    last  = betas.size - 1
    for t in range(1, betas.size):
        e_base  = -sum(x @ a for x, a in zip(state.layers, base))
        e_model = energy(plain, state)
        log_w  += (betas[t] - betas[t - 1]) * (e_base - e_model)
        if t < last:
            state = gibbs_sweep(_tempered(plain, base, betas[t]), state, rng, order)
    return log_w


def ais_log_z(model: Model, schedule: AnnealingSchedule, seed: int = 0,
              base_biases: tuple[np.ndarray, ...] | None = None, threads: int | None = None) -> AISResult:
    """
    Runs are split into fixed blocks of RUN_BLOCK; block i draws from child
    seed i of `seed`, so results do not depend on the thread count.
    """
    plain, constant = model.uncentered()
    base = base_biases or tuple(np.zeros(n) for n in model.spec.layer_sizes)
    if len(base) != len(model.spec.layer_sizes):
        raise ValidationError('base biases need one vector per layer')
    log_z_base = float(sum(np.sum(np.logaddexp(0.0, a)) for a in base))

    sizes  = [min(RUN_BLOCK, schedule.num_runs - s) for s in range(0, schedule.num_runs, RUN_BLOCK)]
    rngs   = split_rng(seed, len(sizes))
    blocks = ordered_map(lambda i: _ais_block(plain, base, schedule.betas, rngs[i], sizes[i]),
                         range(len(sizes)), threads)
    log_w  = np.concatenate(blocks)

    finite  = np.isfinite(log_w)
    aborted = int(np.count_nonzero(~finite))
    if aborted:
        logger.warning(f'[AIS] {aborted}/{log_w.size} run(s) produced non-finite weights and were dropped')
    if not finite.any():
        raise NumericalAbort('every AIS run produced a non-finite importance weight')
    kept = log_w[finite]

    top      = float(np.max(kept))
    scaled   = np.exp(kept - top)
    mean     = float(scaled.mean())
    estimate = top + np.log(mean) + log_z_base - constant
    se       = float(scaled.std(ddof=1) / np.sqrt(kept.size)) if kept.size > 1 else 0.0
    delta    = 3.0 * se / mean
    logger.info(f'[AIS] log Z = {estimate:.6f} ± {delta:.6f} ({kept.size} runs, {schedule.betas.size} betas)')
    return AISResult(float(estimate), log_w, (float(estimate - delta), float(estimate + delta)),
                     schedule.summary(), log_z_base, aborted)


# ─────────────────────────────────────────────
# Log-likelihood
# ─────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class LikelihoodReport:
    per_example: np.ndarray
    mean:        float
    ci3:         tuple[float, float]
    mode:        str

    def to_document(self) -> dict:
        return {'mean': self.mean, 'ci3': [self.ci3[0], self.ci3[1]], 'mode': self.mode,
                'examples': int(self.per_example.size)}


def _summarise(values: np.ndarray, mode: str) -> LikelihoodReport:
    mean = float(values.mean())
    half = 3.0 * float(values.std(ddof=1)) / np.sqrt(values.size) if values.size > 1 else 0.0
    return LikelihoodReport(values, mean, (mean - half, mean + half), mode)


def _binary_rows(model: Model, data) -> np.ndarray:
    rows = np.asarray(data, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.spec.n_vis or rows.shape[0] == 0:
        raise ValidationError(f'dataset must be a non-empty (k, {model.spec.n_vis}) array')
    if not np.all((rows == 0.0) | (rows == 1.0)):
        raise ValidationError('dataset rows must be binary')
    return rows


def test_log_likelihood(model: Model, data, log_z: float, mode: str = 'exact',
                        meanfield: MeanFieldConfig | None = None, threads: int | None = None) -> LikelihoodReport:
    """'exact' uses −F(v); 'meanfield' uses the lower bound −F_MF(v)."""
    rows = _binary_rows(model, data)
    if mode == 'exact':
        values = -np.atleast_1d(exact_free_energy(model, rows, threads=threads)) - log_z
    elif mode == 'meanfield':
        values = -np.atleast_1d(meanfield_free_energy(model, rows, meanfield).value) - log_z
    else:
        raise ValidationError(f"mode must be 'exact' or 'meanfield', got {mode!r}")
    return _summarise(values, mode)


def average_log_likelihood(model: Model, data, log_z: float | None = None, threads: int | None = None) -> float:
    log_z = exact_log_z(model, threads=threads) if log_z is None else log_z
    return test_log_likelihood(model, data, log_z, 'exact', threads=threads).mean


def bernoulli_baseline(train, test) -> LikelihoodReport:
    """Independent Bernoulli per pixel, fitted with add-one smoothing."""
    train = np.asarray(train, dtype=np.float64)
    test  = np.asarray(test, dtype=np.float64)
    p = (train.sum(axis=0) + 1.0) / (train.shape[0] + 2.0)
    values = test @ np.log(p) + (1.0 - test) @ np.log1p(-p)
    return _summarise(values, 'bernoulli')


def nearest_neighbors(samples, rows, block: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Index and L² distance of each sample's nearest row; ties go to the lower index."""
    samples = np.asarray(samples, dtype=np.float64)
    rows    = np.asarray(rows, dtype=np.float64)
    r2      = np.sum(rows ** 2, axis=1)
    index   = np.empty(samples.shape[0], dtype=np.int64)
    dist    = np.empty(samples.shape[0])
    for s in range(0, samples.shape[0], block):
        chunk = samples[s:s + block]
        d2    = np.sum(chunk ** 2, axis=1)[:, None] + r2[None, :] - 2.0 * chunk @ rows.T
        best  = np.argmin(d2, axis=1)
        index[s:s + block] = best
        dist[s:s + block]  = np.sqrt(np.maximum(d2[np.arange(chunk.shape[0]), best], 0.0))
    return index, dist


# ─────────────────────────────────────────────
# Report
# ─────────────────────────────────────────────

@dataclass
class EvaluationReport:
    log_z:    dict
    ll:       dict = field(default_factory=dict)
    baseline: dict | None = None

    def to_document(self) -> dict:
        doc = {'log_z': self.log_z, 'll': self.ll, 'baseline': self.baseline}
        validated(EvaluationReportSerializer, doc, 'evaluation report')
        return doc


def evaluate(model: Model, train, test, ais: AnnealingSchedule | None = None, seed: int = 0,
             ais_base: str = 'uniform', threads: int | None = None) -> EvaluationReport:
    """
    log Z exactly when enumeration is feasible, by AIS when a schedule is
    given (both when both apply), then train/test LL in every feasible mode.
    """
    exact = exact_log_z(model, threads=threads) if exact_feasible(model) else None
    result = None
    if ais is not None:
        base   = data_base_biases(model, train) if ais_base == 'data' else None
        result = ais_log_z(model, ais, seed, base, threads)
    if exact is None and result is None:
        raise ValidationError('model is beyond exact enumeration; supply an AIS schedule')

    if result is not None:
        log_z = result.to_document()
        log_z['exact'] = exact
    else:
        log_z = {'estimate': exact, 'ci3': [exact, exact], 'method': 'exact', 'schedule': None, 'exact': exact}
    if exact is not None and result is not None:
        log_z['delta'] = result.log_z_estimate - exact
        logger.info(f'[EVAL] AIS − exact = {log_z["delta"]:+.6f} nats')
    value = log_z['estimate']

    ll = {}
    modes = ['meanfield']
    try:
        check_hidden_cap(model.spec.n_hid)
        modes.insert(0, 'exact')
    except EnumerationCapExceeded:
        pass
    for split, rows in (('train', train), ('test', test)):
        if rows is None or len(rows) == 0:
            continue
        for mode in modes:
            ll[f'{split}_{mode}'] = test_log_likelihood(model, rows, value, mode, threads=threads).to_document()

    baseline = None
    if train is not None and test is not None and len(train) and len(test):
        baseline = bernoulli_baseline(train, test).to_document()
    return EvaluationReport(log_z, ll, baseline)

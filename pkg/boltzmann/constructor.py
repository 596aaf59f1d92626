"""
boltzmann/constructor.py
────────────────────────
Soft-deep parameter constructions.

soft_deep_params(L) builds the single-visible-unit chain gBM(L), one unit
per layer, every layer pair connected:

    x       = 2^{k−1}
    w^{k,0} = x
    b^k     = x(1 − x) / 2
    w^{k,l} = −x · w^{l,0}          1 ≤ l < k

Every hidden configuration's energy line E(v, x^{1:L}) is then tangent to

    f(v) = −(v(v + 1) + 1/4) / 2

at ξ = Σ_k x^k 2^{k−1} − 1/2, so the lower envelope has 2^L pieces.  All
values are integers; tangency is checked in exact rational arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from boltzmann.exceptions import ValidationError
from boltzmann.mixtures import affine_family
from boltzmann.network import Model, NetworkSpec, ParameterInit, Parameters, build_network

logger = logging.getLogger(__name__)

FIGURE_TARGET = 30.0


# ── 1. The recursion ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SoftDeepParams:
    depth:   int
    weights: dict[tuple[int, int], int]
    biases:  tuple[int, ...]

    def line(self, bits: tuple[int, ...]) -> tuple[int, int]:
        """(slope, intercept) of E(v, x^{1:L}) for the first len(bits) layers."""
        L = len(bits)
        if L > self.depth:
            raise ValidationError(f'configuration of {L} layers exceeds depth {self.depth}')
        x = (1,) + tuple(bits)
        slope     = -sum(x[k] * self.weights[(k, 0)] for k in range(1, L + 1)) - self.biases[0]
        intercept = -sum(x[k] * self.biases[k] for k in range(1, L + 1))
        intercept -= sum(x[k] * x[l] * self.weights[(k, l)]
                         for k in range(1, L + 1) for l in range(1, k))
        return slope, intercept

    def closed_form_matches(self) -> bool:
        for k in range(1, self.depth + 1):
            if self.weights[(k, 0)] != 2 ** (k - 1):
                return False
            if 2 * self.biases[k] != 2 ** (k - 1) * (1 - 2 ** (k - 1)):
                return False
            if any(self.weights[(k, l)] != -2 ** (k + l - 2) for l in range(1, k)):
                return False
        return True


def soft_deep_params(depth: int) -> SoftDeepParams:
    if depth < 0:
        raise ValidationError(f'depth must be >= 0, got {depth}')
    weights: dict[tuple[int, int], int] = {}
    biases = [0]
    for k in range(1, depth + 1):
        x = 2 ** (k - 1)
        weights[(k, 0)] = x
        biases.append(x * (1 - x) // 2)
        for l in range(1, k):
            weights[(k, l)] = -x * weights[(l, 0)]
    return SoftDeepParams(depth, weights, tuple(biases))


def _chain_model(params: SoftDeepParams, beta: float) -> Model:
    spec = NetworkSpec.sdbm([1] * (params.depth + 1))
    return build_network(spec, ParameterInit.explicit(Parameters(
        weights={pair: np.array([[beta * float(w)]]) for pair, w in params.weights.items()},
        biases=tuple(np.array([beta * float(b)]) for b in params.biases),
    )))


def soft_deep_model(depth: int, beta: float = 1.0) -> Model:
    """gBM(depth) as a Model, optionally rescaled by beta."""
    _check_beta(beta)
    return _chain_model(soft_deep_params(depth), beta)


# ── 2. Tangency ──────────────────────────────────────────────────────────────

def quadratic_f(v: Fraction) -> Fraction:
    return -(v * (v + 1) + Fraction(1, 4)) / 2


@dataclass(frozen=True)
class TangencyEntry:
    config:       str
    slope:        int
    intercept:    int
    xi:           Fraction
    residual:     Fraction
    discriminant: Fraction
    sampled_gap:  float

    @property
    def ok(self) -> bool:
        return self.residual == 0 and self.discriminant == 0 and self.sampled_gap >= -1e-9


@dataclass(frozen=True)
class TangencyCertificate:
    depth:    int
    entries:  tuple[TangencyEntry, ...]
    failures: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def tangency_points(self) -> list[Fraction]:
        return sorted(e.xi for e in self.entries)


def tangency_check(params: SoftDeepParams, depth: int | None = None, samples: int = 1000) -> TangencyCertificate:
    """
    For each configuration of the first `depth` layers: the line touches f at
    ξ with matching slope (residual 0) and never dips below it (zero
    discriminant of line − f, plus a sampled check on [ξ_min − 1, ξ_max + 1]).
    """
    depth = params.depth if depth is None else depth
    if not 0 <= depth <= params.depth:
        raise ValidationError(f'depth {depth} outside 0..{params.depth}')

    grid = np.linspace(-1.5, 2 ** depth - 0.5, samples)
    f    = -(grid * (grid + 1.0) + 0.25) / 2.0
    span = max(1.0, float(np.max(np.abs(f))))

    entries, failures = [], []
    for bits in product((0, 1), repeat=depth):
        slope, intercept = params.line(bits)
        xi       = Fraction(sum(b * 2 ** k for k, b in enumerate(bits))) - Fraction(1, 2)
        residual = abs(slope * xi + intercept - quadratic_f(xi))
        # line − f = v²/2 + (slope + 1/2) v + intercept + 1/8
        disc     = (slope + Fraction(1, 2)) ** 2 - 2 * (intercept + Fraction(1, 8))
        gap      = float(np.min(slope * grid + intercept - f)) / span
        entry    = TangencyEntry(''.join(map(str, bits)), slope, intercept, xi, residual, disc, gap)
        entries.append(entry)
        if not entry.ok or slope != -(xi + Fraction(1, 2)):
            failures.append(entry.config)

    if failures:
        logger.warning(f'[CONSTRUCT] tangency failed for {len(failures)} configuration(s) at depth {depth}')
    return TangencyCertificate(depth, tuple(entries), tuple(failures))


# ── 3. Bundles, rescaling, regularization ───────────────────────────────────

def bundle_sdbm(units: int, depth: int, base: SoftDeepParams | None = None,
                n_vis: int | None = None, beta: float = 1.0) -> Model:
    """
    sDBM with `units` units in each of `depth` hidden layers: unit j of every
    layer joins only unit j of the others, with the chain's weights.  The
    mask stays full; cross-unit weights are explicit zeros.
    """
    base  = base or soft_deep_params(depth)
    n_vis = units if n_vis is None else n_vis
    if units < 1 or depth < 1:
        raise ValidationError('a bundle needs at least one unit and one hidden layer')
    if base.depth < depth:
        raise ValidationError(f'base chain has depth {base.depth} < {depth}')
    if units > n_vis:
        raise ValidationError(f'bundle of {units} chains needs at least {units} visible units, got {n_vis}')
    _check_beta(beta)

    spec    = NetworkSpec.sdbm([n_vis] + [units] * depth)
    weights = {}
    for k, l in spec.pairs:
        block = np.zeros((units, n_vis if l == 0 else units))
        block[np.arange(units), np.arange(units)] = beta * base.weights[(k, l)]
        weights[(k, l)] = block
    biases = (np.zeros(n_vis),) + tuple(np.full(units, beta * float(base.biases[k])) for k in range(1, depth + 1))
    return build_network(spec, ParameterInit.explicit(Parameters(weights, biases)))


def _check_beta(beta: float) -> None:
    if not np.isfinite(beta) or beta <= 0:
        raise ValidationError(f'rescaling factor must be finite and > 0, got {beta}')


def rescale(model: Model, beta: float) -> Model:
    _check_beta(beta)
    return build_network(model.spec, ParameterInit.explicit(model.params.scaled(beta)))


def regularization_schedule(spec: NetworkSpec, eta: float, base_strength: float) -> dict[tuple[int, int], float]:
    """
    λ^{k,l} = base / |w̃^{k,l}|^η with chain magnitudes |w̃^{k,0}| = 2^{k−1},
    |w̃^{k,l}| = 2^{k+l−2}; evaluated in log space.
    """
    if not np.isfinite(eta):
        raise ValidationError(f'eta must be finite, got {eta}')
    if not base_strength > 0:
        raise ValidationError(f'base_strength must be > 0, got {base_strength}')
    log_base = np.log(base_strength)
    strengths = {}
    for k, l in spec.pairs:
        exponent = (k - 1) if l == 0 else (k + l - 2)
        with np.errstate(over='ignore'):
            value = float(np.exp(log_base - eta * exponent * np.log(2.0)))
        if not np.isfinite(value):
            raise ValidationError(f'regularization strength for pair ({k},{l}) overflows (eta={eta})')
        strengths[(k, l)] = value
    return strengths


def figure_scale(model: Model, box=((-1.0, 4.0),), target: float = FIGURE_TARGET) -> float:
    """β such that the largest per-configuration |E(v, H)| over the box corners is `target` nats."""
    family = affine_family(model)
    box    = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    if box.shape[0] != family.n_vis:
        raise ValidationError(f'box needs {family.n_vis} interval(s)')
    corners = np.array(list(product(*box)))
    largest = float(np.max(np.abs(family.energies(corners))))
    return 1.0 if largest == 0.0 else target / largest

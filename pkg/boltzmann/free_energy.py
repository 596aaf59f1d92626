"""
boltzmann/free_energy.py
────────────────────────
Exact, hard-min and mean-field free energies of a visible point v, and the
sandwich that ties them together:

    F̂(v) − exp(F̂(v) − E_res(v))  ≤  F(v)  ≤  F_MF(v)  ≤  F̂(v)

v may be real-valued: the visible layer only enters energies linearly.
Every function accepts a single point (shape (N_vis,)) or a batch (shape
(k, N_vis)) and returns a float or an array accordingly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import expit, xlogy

from boltzmann.enumeration import bitstring, check_hidden_cap, hidden_layers, index_bits, scan_hidden
from boltzmann.exceptions import ArtifactIOError, ValidationError
from boltzmann.mixtures import affine_family, count_regions_1d, slice_family
from boltzmann.network import BinaryState, Model, energy, layer_input

logger = logging.getLogger(__name__)

BOUND_SLACK = 1e-9


def as_visible(model: Model, v) -> tuple[np.ndarray, bool]:
    """Normalise v to a (k, N_vis) float array; flag whether a single point was given."""
    n   = model.spec.n_vis
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 0 and n == 1:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] != n:
            raise ValidationError(f'visible point has {arr.shape[0]} entries, network has {n}')
        return arr.reshape(1, n), True
    if arr.ndim == 2 and arr.shape[1] == n:
        return arr, False
    raise ValidationError(f'visible input of shape {arr.shape} does not match N_vis={n}')


def _out(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


# ── 1. Enumeration-based quantities ─────────────────────────────────────────

def exact_free_energy(model: Model, v, cap: int | None = None, threads: int | None = None):
    """F(v) = −log Σ_H exp(−E(v, H))."""
    visible, single = as_visible(model, v)
    return _out(-scan_hidden(model, visible, cap, threads).log_sum, single)


@dataclass(frozen=True, eq=False)
class HardMin:
    value:  float | np.ndarray
    index:  int | np.ndarray
    hidden: tuple[np.ndarray, ...] | None


def hardmin_free_energy(model: Model, v, cap: int | None = None, threads: int | None = None) -> HardMin:
    """F̂(v) = min_H E(v, H); ties go to the lexicographically smallest H."""
    visible, single = as_visible(model, v)
    scan = scan_hidden(model, visible, cap, threads)
    if single:
        index = int(scan.argmin[0])
        return HardMin(float(scan.minimum[0]), index, hidden_layers(model, index))
    return HardMin(scan.minimum, scan.argmin, None)


def residual_energy(model: Model, v, cap: int | None = None, threads: int | None = None):
    """E_res(v) = −log(Σ_H e^{−E(v,H)} − e^{−F̂(v)}); +inf with a single configuration."""
    visible, single = as_visible(model, v)
    return _out(-scan_hidden(model, visible, cap, threads).log_residual, single)


def free_energy_gap(model: Model, v, cap: int | None = None, threads: int | None = None):
    """F̂(v) − F(v), computed as log(1 + exp(F̂ − E_res))."""
    visible, single = as_visible(model, v)
    scan = scan_hidden(model, visible, cap, threads)
    return _out(np.logaddexp(0.0, scan.log_residual - (-scan.minimum)), single)


def rbm_free_energy(model: Model, v):
    """Closed form for single-hidden-layer models: −b⁰·v − Σ_i softplus(W v + b¹)_i."""
    if model.spec.depth != 1:
        raise ValidationError('closed-form free energy needs exactly one hidden layer')
    plain, constant = model.uncentered()
    visible, single = as_visible(model, v)
    b0, b1 = plain.biases
    inputs = b1[None, :] + (visible @ plain.weights[(1, 0)].T if (1, 0) in plain.weights else 0.0)
    values = -visible @ b0 - np.sum(np.logaddexp(0.0, inputs), axis=1) + constant
    return _out(values, single)


# ── 2. Mean field ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MeanFieldConfig:
    max_iters:      int = 10_000
    damping:        float = 0.5
    tol:            float = 1e-10
    init:           float = 0.5
    from_hardmin:   bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError('max_iters must be >= 1')
        if not 0.0 <= self.damping < 1.0:
            raise ValidationError('damping must lie in [0, 1)')
        if not 0.0 <= self.init <= 1.0:
            raise ValidationError('init must lie in [0, 1]')


@dataclass(frozen=True, eq=False)
class MeanFieldResult:
    value:      float | np.ndarray
    means:      tuple[np.ndarray, ...]
    iterations: int
    converged:  bool


def _meanfield_value(model: Model, state: BinaryState) -> np.ndarray:
    expected = np.atleast_1d(energy(model, state))
    entropy  = 0.0
    for mu in state.hidden:
        entropy = entropy - np.sum(xlogy(mu, mu) + xlogy(1.0 - mu, 1.0 - mu), axis=-1)
    return expected - entropy


def _coordinate_ascent(model: Model, state: BinaryState, config: MeanFieldConfig):
    """Damped layer-wise updates μ^k ← σ(input to layer k); each layer update lowers F_MF."""
    layers = list(state.layers)
    for it in range(1, config.max_iters + 1):
        change = 0.0
        for k in range(1, len(layers)):
            target = expit(layer_input(model, k, BinaryState(tuple(layers))))
            new    = config.damping * layers[k] + (1.0 - config.damping) * target
            change = max(change, float(np.max(np.abs(new - layers[k])))) if new.size else change
            layers[k] = new
        if change < config.tol:
            return BinaryState(tuple(layers)), it, True
    return BinaryState(tuple(layers)), config.max_iters, False


def meanfield_free_energy(model: Model, v, config: MeanFieldConfig | None = None,
                          cap: int | None = None) -> MeanFieldResult:
    """
    Naive mean-field F_MF(v) = E_Q[E] − H(Q) for a factorised Bernoulli Q.

    With config.from_hardmin a second run starts from the hard-min
    configuration and the lower value per row wins; the hard-min start needs
    N_hid within the enumeration cap and is skipped otherwise.
    """
    config = config or MeanFieldConfig()
    visible, single = as_visible(model, v)
    spec = model.spec
    n    = visible.shape[0]

    start = BinaryState((visible,) + tuple(np.full((n, size), config.init) for size in spec.layer_sizes[1:]))
    state, iters, converged = _coordinate_ascent(model, start, config)
    value = _meanfield_value(model, state)

    use_hardmin = config.from_hardmin and spec.n_hid > 0
    if use_hardmin:
        try:
            check_hidden_cap(spec.n_hid, cap)
        except ValidationError:
            logger.debug(f'[MEANFIELD] N_hid={spec.n_hid} beyond cap, skipping hard-min start')
            use_hardmin = False
    if use_hardmin:
        scan   = scan_hidden(model, visible, cap)
        bits   = index_bits(scan.argmin, spec.n_hid)
        layers = [visible] + np.split(bits, np.cumsum(spec.layer_sizes[1:])[:-1], axis=1)
        alt_state, alt_iters, alt_conv = _coordinate_ascent(model, BinaryState(tuple(layers)), config)
        alt_value = _meanfield_value(model, alt_state)
        pick      = alt_value < value
        value     = np.where(pick, alt_value, value)
        state     = BinaryState(tuple(np.where(pick[:, None], a, b)
                                      for a, b in zip(alt_state.layers, state.layers)))
        iters     = max(iters, alt_iters)
        converged = converged and alt_conv

    if not converged:
        logger.warning(f'[MEANFIELD] not converged after {config.max_iters} iterations (tol={config.tol})')
    means = tuple(mu[0] for mu in state.hidden) if single else state.hidden
    return MeanFieldResult(_out(value, single), means, iters, converged)


# ── 3. Bound sandwich ────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FreeEnergyBundle:
    v:             np.ndarray
    exact:         float
    hardmin:       float
    meanfield:     float
    residual:      float
    argmin_index:  int
    argmin_hidden: tuple[np.ndarray, ...]
    meanfield_converged: bool = True

    @property
    def lower_bound(self) -> float:
        return float(self.hardmin - np.exp(self.hardmin - self.residual))

    @property
    def gap(self) -> float:
        return float(np.logaddexp(0.0, self.hardmin - self.residual))


@dataclass(frozen=True, eq=False)
class BoundCheck:
    bundle:     FreeEnergyBundle
    passed:     bool
    violations: list[str] = field(default_factory=list)


def free_energy_bundles(model: Model, v, meanfield: MeanFieldConfig | None = None,
                        cap: int | None = None, threads: int | None = None) -> list[FreeEnergyBundle]:
    visible, _ = as_visible(model, v)
    scan = scan_hidden(model, visible, cap, threads)
    mf   = meanfield_free_energy(model, visible, meanfield, cap)
    return [
        FreeEnergyBundle(
            v=visible[r].copy(),
            exact=float(-scan.log_sum[r]),
            hardmin=float(scan.minimum[r]),
            meanfield=float(mf.value[r]),
            residual=float(-scan.log_residual[r]),
            argmin_index=int(scan.argmin[r]),
            argmin_hidden=hidden_layers(model, int(scan.argmin[r])),
            meanfield_converged=mf.converged,
        )
        for r in range(visible.shape[0])
    ]


def _verify(bundle: FreeEnergyBundle, slack: float) -> BoundCheck:
    b = bundle
    violations = []
    if not b.lower_bound <= b.exact + slack:
        violations.append(f'lower bound {b.lower_bound!r} > F {b.exact!r}')
    if not b.exact <= b.meanfield + slack:
        violations.append(f'F {b.exact!r} > F_MF {b.meanfield!r}')
    if not b.meanfield <= b.hardmin + slack:
        violations.append(f'F_MF {b.meanfield!r} > F_hat {b.hardmin!r}')
    return BoundCheck(b, not violations, violations)


def check_bounds(model: Model, v, slack: float = BOUND_SLACK, meanfield: MeanFieldConfig | None = None,
                 cap: int | None = None, threads: int | None = None):
    """BoundCheck for a single point, a list of them for a batch.  Never raises on a failed bound."""
    _, single = as_visible(model, v)
    checks = [_verify(b, slack) for b in free_energy_bundles(model, v, meanfield, cap, threads)]
    failed = sum(not c.passed for c in checks)
    if failed:
        logger.warning(f'[BOUNDS] {failed}/{len(checks)} point(s) violate the free-energy sandwich')
    return checks[0] if single else checks


# ── 4. Envelope export ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class EnvelopeAxes:
    """Which visible coordinates vary, over what range, at what resolution."""
    coords:     tuple[int, ...]
    lows:       tuple[float, ...]
    highs:      tuple[float, ...]
    resolution: tuple[int, ...]
    base:       tuple[float, ...] | None = None

    def __post_init__(self):
        d = len(self.coords)
        if d not in (1, 2):
            raise ValidationError('envelope slices vary one or two visible coordinates')
        if not (len(self.lows) == len(self.highs) == len(self.resolution) == d):
            raise ValidationError('coords, lows, highs and resolution must have equal length')
        if len(set(self.coords)) != d:
            raise ValidationError('envelope coordinates must be distinct')
        if any(r < 2 for r in self.resolution):
            raise ValidationError('resolution must be >= 2 points per axis')
        if any(not lo < hi for lo, hi in zip(self.lows, self.highs)):
            raise ValidationError('each axis needs low < high')

    def points(self, n_vis: int) -> np.ndarray:
        if any(not 0 <= c < n_vis for c in self.coords):
            raise ValidationError(f'envelope coordinate out of range 0..{n_vis - 1}')
        base = np.zeros(n_vis) if self.base is None else np.asarray(self.base, dtype=np.float64)
        if base.shape != (n_vis,):
            raise ValidationError(f'base point must have {n_vis} entries')
        axes  = [np.linspace(lo, hi, r) for lo, hi, r in zip(self.lows, self.highs, self.resolution)]
        grids = np.meshgrid(*axes, indexing='ij')
        pts   = np.tile(base, (grids[0].size, 1))
        for c, g in zip(self.coords, grids):
            pts[:, c] = g.ravel()
        return pts


@dataclass(frozen=True, eq=False)
class EnvelopeExport:
    path:              Path
    lines_path:        Path | None
    points:            int
    distinct_argmins:  int
    breakpoints:       list[float]
    frame:             pd.DataFrame


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n', encoding='utf-8')
    except OSError as exc:
        raise ArtifactIOError(f'cannot write {path}: {exc}') from exc
    return path


def export_envelope(model: Model, axes: EnvelopeAxes, sink: str | Path,
                    meanfield: MeanFieldConfig | None = None, cap: int | None = None,
                    threads: int | None = None) -> EnvelopeExport:
    """
    Tabulate F, F̂, F_MF and the sandwich lower bound over a 1-D or 2-D slice
    of visible space.  1-D slices also get `<sink stem>_lines.csv` with every
    configuration's line restricted to the slice, and exact breakpoints.
    """
    sink   = Path(sink)
    spec   = model.spec
    pts    = axes.points(spec.n_vis)
    scan   = scan_hidden(model, pts, cap, threads)
    mf     = meanfield_free_energy(model, pts, meanfield, cap)
    hard   = scan.minimum
    lower  = hard - np.exp(hard + scan.log_residual)

    frame = pd.DataFrame({f'v{j}': pts[:, j] for j in range(spec.n_vis)})
    frame['F']            = -scan.log_sum
    frame['F_hat']        = hard
    frame['F_MF']         = np.asarray(mf.value)
    frame['lower_bound']  = lower
    frame['argmin_index'] = scan.argmin.astype(np.int64)
    frame['argmin_config'] = [bitstring(i, spec.n_hid) for i in scan.argmin]
    write_csv(frame, sink)

    lines_path  = None
    breakpoints = []
    if len(axes.coords) == 1:
        family = slice_family(affine_family(model, cap, threads), axes.coords[0],
                              np.zeros(spec.n_vis) if axes.base is None else np.asarray(axes.base, float))
        lines_path = sink.with_name(f'{sink.stem}_lines.csv')
        write_csv(pd.DataFrame({
            'config':    [bitstring(i, spec.n_hid) for i in family.configs],
            'index':     family.configs.astype(np.int64),
            'slope':     family.gradients[:, 0],
            'intercept': family.intercepts,
        }), lines_path)
        report      = count_regions_1d(family, (axes.lows[0], axes.highs[0]))
        breakpoints = list(report.breakpoints)

    distinct = int(np.unique(scan.argmin).size)
    logger.info(f'[ENVELOPE] {len(frame)} points, {distinct} distinct argmin(s) -> {sink}')
    return EnvelopeExport(sink, lines_path, len(frame), distinct, breakpoints, frame)


__all__ = [
    'BOUND_SLACK', 'BoundCheck', 'EnvelopeAxes', 'EnvelopeExport', 'FreeEnergyBundle', 'HardMin',
    'MeanFieldConfig', 'MeanFieldResult', 'as_visible', 'check_bounds', 'exact_free_energy',
    'export_envelope', 'free_energy_bundles', 'free_energy_gap', 'hardmin_free_energy',
    'meanfield_free_energy', 'rbm_free_energy', 'residual_energy', 'write_csv',
]

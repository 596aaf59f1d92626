# boltzmann/management/commands/_common.py
#
# Shared plumbing for every subcommand:
#   - global flags   --seed --threads --output_dir --config
#   - config merge   command defaults < --config JSON file < explicit flags
#   - snapshot       <output_dir>/resolved_config.json, always written
#   - error mapping  BoltzmannError -> CommandError(returncode=2|3|4)
#   - model / dataset source options shared by several commands
#
# Django skips modules starting with '_' when it looks for commands, so this
# file never shows up in `manage.py help`.
# ─────────────────────────────────────────────

import json
import logging
from pathlib import Path

import numpy as np
from django.core.management.base import BaseCommand, CommandError

from boltzmann.conf import resolve_threads, setting
from boltzmann.constructor import bundle_sdbm, figure_scale, rescale, soft_deep_model
from boltzmann.datasets import TOY_KINDS, BinaryDataset, load_mnist, load_silhouettes, toy_dataset
from boltzmann.exceptions import BoltzmannError, ValidationError
from boltzmann.free_energy import EnvelopeAxes
from boltzmann.network import Model, NetworkSpec, ParameterInit, build_network
from boltzmann.presets import MNIST_TEST, MNIST_TRAIN, SILHOUETTES_FILE
from boltzmann.serializers import RunConfigSerializer, validated
from boltzmann.storage import load_model, read_json, write_json

logger = logging.getLogger(__name__)

# Options Django adds to every command; never part of a run config.
DJANGO_OPTIONS = {
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color',
    'skip_checks', 'stdout', 'stderr', 'config',
}

MODEL_SOURCES = ('model', 'gbm', 'bundle', 'rbm', 'dbm', 'sdbm')

MODEL_DEFAULTS = {
    'model':  None,
    'gbm':    None,
    'bundle': None,
    'rbm':    None,
    'dbm':    None,
    'sdbm':   None,
    'init':   None,
    'beta':   None,
}

DATA_DEFAULTS = {
    'dataset':             None,
    'dataset_params':      None,
    'data_dir':            None,
    'validation_fraction': None,
}


class BoltzmannCommand(BaseCommand):
    command_name = ''
    defaults: dict = {}

    def add_arguments(self, parser):
        run = parser.add_argument_group('run')
        run.add_argument('--seed',       type=int, help='master seed (default 0)')
        run.add_argument('--threads',    type=int, help='worker threads (default BM_THREADS)')
        run.add_argument('--output_dir', '--output-dir', dest='output_dir',
                         help='where every artifact of this run is written')
        run.add_argument('--config',     help='JSON file of option values; explicit flags win')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    # ── config resolution ────────────────────────────────────────────────
    def resolve(self, options: dict) -> dict:
        known = {'seed', 'threads', 'output_dir', *self.defaults}
        from_file = {}
        if options.get('config'):
            from_file = read_json(options['config'])
            if not isinstance(from_file, dict):
                raise ValidationError(f'{options["config"]}: config file must hold a JSON object')
            unknown = sorted(set(from_file) - known)
            if unknown:
                raise ValidationError(f'{options["config"]}: unknown option(s) {", ".join(unknown)}')

        explicit = {k: v for k, v in options.items() if k not in DJANGO_OPTIONS and v is not None}
        cfg = {
            'seed':       0,
            'threads':    resolve_threads(None),
            'output_dir': str(Path(setting('BM_OUTPUT_DIR', 'runs')) / self.command_name),
            **self.defaults,
            **from_file,
            **explicit,
        }
        cfg['threads'] = resolve_threads(cfg['threads'])
        cfg['output_dir'] = str(cfg['output_dir'])

        snapshot = {
            'command':    self.command_name,
            'seed':       cfg['seed'],
            'threads':    cfg['threads'],
            'output_dir': cfg['output_dir'],
            'settings':   {k: v for k, v in cfg.items() if k not in ('seed', 'threads', 'output_dir')},
        }
        validated(RunConfigSerializer, snapshot, 'run config')
        write_json(Path(cfg['output_dir']) / 'resolved_config.json', snapshot)
        return cfg

    def handle(self, *args, **options):
        try:
            cfg = self.resolve(options)
            self.output_dir = Path(cfg['output_dir'])
            logger.info(f'[CLI] {self.command_name} -> {self.output_dir}')
            self.run(cfg)
        except BoltzmannError as exc:
            raise CommandError(str(exc), returncode=exc.exit_code) from exc

    def run(self, cfg: dict):
        raise NotImplementedError

    def line(self, text: str = ''):
        self.stdout.write(text)


# ─────────────────────────────────────────────
# Model sources
# ─────────────────────────────────────────────

def add_model_arguments(parser):
    src = parser.add_argument_group('model source (exactly one)')
    src.add_argument('--model',  help='model file')
    src.add_argument('--gbm',    type=int, metavar='L', help='single-visible-unit soft-deep chain with L hidden layers')
    src.add_argument('--bundle', metavar='MxL', help='M parallel soft-deep chains of depth L')
    src.add_argument('--rbm',    type=int, nargs=2, metavar=('NV', 'NH'))
    src.add_argument('--dbm',    type=int, nargs='+', metavar='N')
    src.add_argument('--sdbm',   type=int, nargs='+', metavar='N')
    src.add_argument('--init',   help="parameters for --rbm/--dbm/--sdbm: 'zeros' or 'gaussian:<sigma>'")
    src.add_argument('--beta',   type=float, help='rescale every parameter by this factor')


def parse_init(text: str | None, seed: int) -> ParameterInit:
    if text is None or text == 'zeros':
        return ParameterInit.zeros()
    kind, _, sigma = text.partition(':')
    if kind != 'gaussian' or not sigma:
        raise ValidationError(f"--init must be 'zeros' or 'gaussian:<sigma>', got {text!r}")
    try:
        return ParameterInit.gaussian(float(sigma), seed)
    except ValueError as exc:
        raise ValidationError(f'--init: bad sigma {sigma!r}') from exc


def parse_bundle(text: str) -> tuple[int, int]:
    units, sep, depth = str(text).lower().partition('x')
    if not sep or not units.isdigit() or not depth.isdigit():
        raise ValidationError(f"--bundle expects 'MxL', got {text!r}")
    return int(units), int(depth)


def model_from_options(cfg: dict) -> Model:
    chosen = [name for name in MODEL_SOURCES if cfg.get(name) is not None]
    if len(chosen) != 1:
        raise ValidationError(f'give exactly one model source ({", ".join("--" + s for s in MODEL_SOURCES)})')
    source = chosen[0]
    value  = cfg[source]

    if source == 'model':
        model = load_model(value)
    elif source == 'gbm':
        model = soft_deep_model(int(value))
    elif source == 'bundle':
        model = bundle_sdbm(*parse_bundle(value))
    else:
        sizes = [int(n) for n in value]
        spec  = {
            'rbm':  lambda: NetworkSpec.rbm(*sizes),
            'dbm':  lambda: NetworkSpec.dbm(sizes),
            'sdbm': lambda: NetworkSpec.sdbm(sizes),
        }[source]()
        model = build_network(spec, parse_init(cfg.get('init'), cfg['seed']))

    if cfg.get('beta') is not None:
        model = rescale(model, float(cfg['beta']))
    return model


def is_shape_only(cfg: dict) -> bool:
    return any(cfg.get(name) is not None for name in ('rbm', 'dbm', 'sdbm')) and cfg.get('init') is None


def parameter_table(model: Model) -> list[str]:
    spec = model.spec
    rows = [f'{spec.topology} {list(spec.layer_sizes)}  pairs {[list(p) for p in spec.pairs]}',
            f'{"block":<10} {"shape":<10} {"min":>12} {"max":>12} {"mean":>12}']
    blocks = [(f'w^{k},{l}', w) for (k, l), w in sorted(model.weights.items())]
    blocks += [(f'b^{k}', b) for k, b in enumerate(model.biases)]
    for name, arr in blocks:
        rows.append(f'{name:<10} {"x".join(map(str, arr.shape)):<10} '
                    f'{np.min(arr):>12.6g} {np.max(arr):>12.6g} {np.mean(arr):>12.6g}')
    return rows


# ─────────────────────────────────────────────
# Dataset sources
# ─────────────────────────────────────────────

def add_data_arguments(parser):
    data = parser.add_argument_group('dataset')
    data.add_argument('--dataset', help=f'toy-bas, mnist, silhouettes or one of {", ".join(TOY_KINDS)}')
    data.add_argument('--dataset_params', '--dataset-params', dest='dataset_params',
                      help='JSON object of dataset parameters, e.g. {"width": 3, "height": 3}')
    data.add_argument('--data_dir', '--data-dir', dest='data_dir', help='benchmark files (default BM_DATA_DIR)')
    data.add_argument('--validation_fraction', type=float, help='retag this share of train rows as valid')


def _params(value) -> dict:
    if value is None:
        return {}
    if isinstance(value, dict):
        return value
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError as exc:
        raise ValidationError(f'--dataset_params is not valid JSON: {exc}') from exc
    if not isinstance(parsed, dict):
        raise ValidationError('--dataset_params must be a JSON object')
    return parsed


def dataset_from_options(cfg: dict, required: bool = True) -> BinaryDataset | None:
    kind = cfg.get('dataset')
    if kind is None:
        if required:
            raise ValidationError('--dataset is required')
        return None
    params   = _params(cfg.get('dataset_params'))
    data_dir = Path(cfg.get('data_dir') or setting('BM_DATA_DIR', 'data'))
    seed     = cfg['seed']

    if kind == 'toy-bas':
        dataset = toy_dataset('bars-and-stripes', {'width': 3, 'height': 3, **params}, seed)
    elif kind in TOY_KINDS:
        dataset = toy_dataset(kind, params, seed)
    elif kind == 'mnist':
        dataset = load_mnist(params.get('train', data_dir / MNIST_TRAIN), params.get('test', data_dir / MNIST_TEST), seed)
    elif kind == 'silhouettes':
        dataset = load_silhouettes(params.get('path', data_dir / SILHOUETTES_FILE))
    else:
        raise ValidationError(f'unknown dataset {kind!r}')

    if cfg.get('validation_fraction'):
        dataset = dataset.with_validation(float(cfg['validation_fraction']), seed)
    return dataset


def check_visible(model: Model, dataset: BinaryDataset) -> None:
    if dataset.n_vis != model.spec.n_vis:
        raise ValidationError(f'dataset has {dataset.n_vis} pixels, model has {model.spec.n_vis} visible units')


# ─────────────────────────────────────────────
# Small parsers
# ─────────────────────────────────────────────

def parse_domain(value, n_vis: int):
    """'lo:hi' per visible unit, comma separated, or a JSON-style list; None is the whole space."""
    if value is None or value == 'all':
        return None
    if isinstance(value, str):
        try:
            value = [[float(x) for x in part.split(':')] for part in value.split(',')]
        except ValueError as exc:
            raise ValidationError(f"--domain expects 'lo:hi[,lo:hi...]', got {value!r}") from exc
    if any(len(iv) != 2 for iv in value):
        raise ValidationError('every domain interval needs exactly two bounds')
    if len(value) == 1 and n_vis > 1:
        value = value * n_vis
    return value


def parse_key_values(tokens, what: str) -> dict:
    if tokens is None:
        return {}
    if isinstance(tokens, dict):
        return tokens
    out = {}
    for token in tokens:
        key, sep, value = str(token).partition('=')
        if not sep:
            raise ValidationError(f"{what}: expected key=value, got {token!r}")
        out[key.strip()] = value.strip()
    return out


# ─────────────────────────────────────────────
# Envelope slices (bounds / export_envelope)
# ─────────────────────────────────────────────

ENVELOPE_DEFAULTS = {'axis': None, 'base': None, 'figure': False, 'csv': 'envelope.csv'}


def add_envelope_arguments(parser):
    env = parser.add_argument_group('slice')
    env.add_argument('--axis', action='append',
                     help="COORD:LO:HI[:POINTS]; give once for a 1-D slice, twice for 2-D")
    env.add_argument('--base', type=float, nargs='+', help='values of the visible units that stay fixed')
    env.add_argument('--figure', action='store_true', default=None,
                     help='rescale the model so the largest energy term on the slice is 30 nats')
    env.add_argument('--csv', help='file name of the table inside output_dir')


def axes_from_options(cfg: dict, n_vis: int) -> EnvelopeAxes:
    specs = cfg.get('axis') or (['0:-1:4:501'] if n_vis == 1 else ['0:-1:4:101', '1:-1:4:101'])
    coords, lows, highs, points = [], [], [], []
    for text in specs:
        parts = str(text).split(':')
        if len(parts) not in (3, 4):
            raise ValidationError(f"--axis expects COORD:LO:HI[:POINTS], got {text!r}")
        try:
            coords.append(int(parts[0]))
            lows.append(float(parts[1]))
            highs.append(float(parts[2]))
            points.append(int(parts[3]) if len(parts) == 4 else 501)
        except ValueError as exc:
            raise ValidationError(f'--axis {text!r}: {exc}') from exc
    base = None if cfg.get('base') is None else tuple(float(b) for b in cfg['base'])
    return EnvelopeAxes(tuple(coords), tuple(lows), tuple(highs), tuple(points), base)


def figure_model(model: Model, axes: EnvelopeAxes) -> Model:
    n_vis = model.spec.n_vis
    base  = np.zeros(n_vis) if axes.base is None else np.asarray(axes.base, dtype=np.float64)
    box   = [(float(b), float(b)) for b in base]
    for c, lo, hi in zip(axes.coords, axes.lows, axes.highs):
        box[c] = (lo, hi)
    beta = figure_scale(model, tuple(box))
    logger.info(f'[CLI] figure rescaling by beta = {beta:.6g}')
    return rescale(model, beta)

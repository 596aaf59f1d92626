# boltzmann/management/commands/train.py
#
# Joint SML training with centering and soft-deep regularization.
#
# ─────────────────────────────────────────────
# USAGE:
#
#   python manage.py train --preset toy-bas
#   python manage.py train --preset mnist-2hl-smoke --data_dir ~/data
#   python manage.py train --sdbm 9 6 6 --dataset toy-bas --updates 5000 --lr 0.05 \
#       --eta 1 --reg 1e-4 --centering_rate 0.01
#   python manage.py train --preset toy-bas --checkpoint            # then, after an interruption:
#   python manage.py train --preset toy-bas --resume runs/train/checkpoint
#
# Outputs: model.json, metrics.jsonl, summary.json, checkpoint/ (with --checkpoint).
# ─────────────────────────────────────────────

from dataclasses import replace

from boltzmann.evaluation import bernoulli_baseline
from boltzmann.exceptions import ValidationError
from boltzmann.management.commands._common import (
    DATA_DEFAULTS, MODEL_DEFAULTS, BoltzmannCommand, add_data_arguments, add_model_arguments, check_visible,
    dataset_from_options, is_shape_only, model_from_options, write_json,
)
from boltzmann.presets import get_preset
from boltzmann.storage import ENCODINGS, save_model
from boltzmann.training import Centering, Regularization, TrainConfig, initial_model, train

# Flag -> TrainConfig field.
OVERRIDES = {
    'updates':          'total_updates',
    'lr':               'initial_lr',
    'batch_size':       'batch_size',
    'pos_steps':        'pos_chain_steps',
    'neg_steps':        'neg_chain_steps',
    'chains':           'num_neg_chains',
    'momentum':         'momentum',
    'log_every':        'log_every',
    'monitor_ais_runs': 'monitor_ais_runs',
    'monitor_ais_betas': 'monitor_ais_betas',
}

BASE_CONFIG = TrainConfig(initial_lr=0.01, total_updates=1_000, batch_size=100, pos_chain_steps=5, neg_chain_steps=5)


def config_from_options(cfg: dict, base: TrainConfig) -> TrainConfig:
    changes = {field: cfg[flag] for flag, field in OVERRIDES.items() if cfg.get(flag) is not None}
    if cfg.get('eta') is not None or cfg.get('reg') is not None:
        current = base.reg or Regularization(eta=1.0, base_strength=1e-4)
        changes['reg'] = Regularization(
            eta=current.eta if cfg.get('eta') is None else float(cfg['eta']),
            base_strength=current.base_strength if cfg.get('reg') is None else float(cfg['reg']),
        )
    if cfg.get('no_reg'):
        changes['reg'] = None
    if cfg.get('centering_rate') is not None:
        changes['centering'] = Centering(float(cfg['centering_rate']))
    if cfg.get('no_centering'):
        changes['centering'] = None
    changes['seed'] = cfg['seed']
    return replace(base, **changes)


class Command(BoltzmannCommand):
    help = 'Train a layered Boltzmann machine by stochastic maximum likelihood.'
    command_name = 'train'
    defaults = {
        **MODEL_DEFAULTS, **DATA_DEFAULTS,
        'preset': None, 'encoding': 'decimal', 'resume': None, 'checkpoint': False,
        **{flag: None for flag in OVERRIDES},
        'eta': None, 'reg': None, 'no_reg': False, 'centering_rate': None, 'no_centering': False,
    }

    def add_command_arguments(self, parser):
        parser.add_argument('--preset', help='toy-bas, mnist-{2,3,4}hl, silhouettes-{2,3,4}hl, optionally -smoke')
        add_model_arguments(parser)
        add_data_arguments(parser)
        opt = parser.add_argument_group('training')
        opt.add_argument('--updates',    type=int, help='total parameter updates')
        opt.add_argument('--lr',         type=float, help='initial learning rate (decays linearly to 0)')
        opt.add_argument('--batch_size', type=int)
        opt.add_argument('--pos_steps',  type=int, help='positive-phase Gibbs sweeps per update')
        opt.add_argument('--neg_steps',  type=int, help='negative-phase Gibbs sweeps per update')
        opt.add_argument('--chains',     type=int, help='persistent negative chains (default batch_size)')
        opt.add_argument('--momentum',   type=float)
        opt.add_argument('--eta',        type=float, help='soft-deep regularization exponent')
        opt.add_argument('--reg',        type=float, help='L2 base strength')
        opt.add_argument('--no_reg',     action='store_true', default=None)
        opt.add_argument('--centering_rate', type=float, help='offset update rate in (0, 1]')
        opt.add_argument('--no_centering', action='store_true', default=None)
        opt.add_argument('--log_every',  type=int)
        opt.add_argument('--monitor_ais_runs',  type=int)
        opt.add_argument('--monitor_ais_betas', type=int)
        out = parser.add_argument_group('artifacts')
        out.add_argument('--encoding',   choices=ENCODINGS)
        out.add_argument('--checkpoint', action='store_true', default=None,
                         help='write output_dir/checkpoint at every logging interval')
        out.add_argument('--resume',     help='checkpoint directory to continue from')

    def run(self, cfg):
        preset = get_preset(cfg['preset']) if cfg.get('preset') else None
        if preset is not None:
            dataset = dataset_from_options(cfg, required=False) or preset.dataset(cfg.get('data_dir'), cfg['seed'])
            base    = preset.config
        else:
            dataset = dataset_from_options(cfg)
            base    = BASE_CONFIG
        config = config_from_options(cfg, base)
        train_rows, test_rows = dataset.train, dataset.test
        if train_rows.shape[0] == 0:
            raise ValidationError('dataset has no train rows')

        has_source = any(cfg.get(k) is not None for k in ('model', 'gbm', 'bundle', 'rbm', 'dbm', 'sdbm'))
        if cfg.get('resume'):
            model = None
        elif not has_source:
            if preset is None:
                raise ValidationError('give --preset or a model source')
            model = initial_model(preset.spec(dataset.n_vis), train_rows, cfg['seed'])
        elif is_shape_only(cfg):
            model = initial_model(model_from_options(cfg).spec, train_rows, cfg['seed'])
        else:
            model = model_from_options(cfg)
        if model is not None:
            check_visible(model, dataset)

        result = train(
            model, train_rows, config, test=test_rows,
            checkpoint_dir=self.output_dir / 'checkpoint' if cfg.get('checkpoint') else None,
            resume=cfg.get('resume'), metrics_sink=self.output_dir / 'metrics.jsonl', threads=cfg['threads'],
        )
        path = save_model(result.model, self.output_dir / 'model.json', cfg['encoding'])

        final    = next((m for m in reversed(result.metrics) if m['ll'] is not None), None)
        baseline = bernoulli_baseline(train_rows, test_rows if len(test_rows) else train_rows).mean
        summary  = {
            'updates':         config.total_updates,
            'final_ll':        None if final is None else final['ll'],
            'll_method':       None if final is None else final['ll_method'],
            'baseline_ll':     baseline,
            'beats_baseline':  None if final is None else final['ll'] - baseline,
            'config':          config.to_document(),
            'dataset':         dataset.provenance,
        }
        write_json(self.output_dir / 'summary.json', summary)

        if final is not None:
            self.line(f'final ll ({final["ll_method"]}, {final["ll_split"]}): {final["ll"]:.6f}')
        self.line(f'bernoulli baseline: {baseline:.6f}')
        self.line(f'model: {path}')

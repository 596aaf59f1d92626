# boltzmann/management/commands/sweep.py
#
# Random hyperparameter search: `count` configurations sampled from the
# preset's ranges (learning rate, L2 base strength and centering rate
# log-uniform, eta uniform), each trained from the same initial model.
#
#   python manage.py sweep --preset toy-bas --count 16 --updates 2000
#   python manage.py sweep --preset mnist-2hl-smoke --count 4
#
# Outputs: run_XX/{model.json,metrics.jsonl} per configuration and sweep.json
# ranked by the last logged log-likelihood.
# ─────────────────────────────────────────────

from dataclasses import asdict, replace

from boltzmann.management.commands._common import (
    DATA_DEFAULTS, BoltzmannCommand, add_data_arguments, dataset_from_options, write_json,
)
from boltzmann.presets import get_preset
from boltzmann.storage import save_model
from boltzmann.training import HyperparameterRanges, initial_model, sample_hyperparams, train


class Command(BoltzmannCommand):
    help = 'Sample and train hyperparameter configurations for a preset; rank them by log-likelihood.'
    command_name = 'sweep'
    defaults = {**DATA_DEFAULTS, 'preset': 'toy-bas', 'count': 16, 'updates': None, 'ranges': None}

    def add_command_arguments(self, parser):
        parser.add_argument('--preset', help='preset whose architecture, data and base config are swept')
        parser.add_argument('--count', type=int, help='number of sampled configurations (default 16)')
        parser.add_argument('--updates', type=int, help='override total updates per configuration')
        add_data_arguments(parser)

    def run(self, cfg):
        preset  = get_preset(cfg['preset'])
        dataset = dataset_from_options(cfg, required=False) or preset.dataset(cfg.get('data_dir'), cfg['seed'])
        ranges  = preset.ranges or HyperparameterRanges()
        if cfg.get('ranges') is not None:
            ranges = HyperparameterRanges.from_document(cfg['ranges'])

        base = preset.config if cfg.get('updates') is None else replace(preset.config, total_updates=cfg['updates'])
        base = replace(base, seed=cfg['seed'])
        configs = sample_hyperparams(ranges, cfg['seed'], base, int(cfg['count']))
        start   = initial_model(preset.spec(dataset.n_vis), dataset.train, cfg['seed'])

        runs = []
        for i, config in enumerate(configs):
            run_dir = self.output_dir / f'run_{i:02d}'
            result  = train(start, dataset.train, config, test=dataset.test,
                            metrics_sink=run_dir / 'metrics.jsonl', threads=cfg['threads'])
            save_model(result.model, run_dir / 'model.json')
            final = next((m for m in reversed(result.metrics) if m['ll'] is not None), None)
            runs.append({
                'run':       run_dir.name,
                'config':    config.to_document(),
                'final_ll':  None if final is None else final['ll'],
                'll_method': None if final is None else final['ll_method'],
            })
            self.line(f'{run_dir.name}: lr {config.initial_lr:.3g} reg {config.reg.base_strength:.3g} '
                      f'eta {config.reg.eta:.3g} rho {config.centering.offset_update_rate:.3g} '
                      f'-> ll {runs[-1]["final_ll"]}')

        ranked = sorted(runs, key=lambda r: float('-inf') if r['final_ll'] is None else r['final_ll'], reverse=True)
        write_json(self.output_dir / 'sweep.json', {
            'preset': preset.name,
            'ranges': {k: list(v) for k, v in asdict(ranges).items()},
            'runs':   ranked,
        })
        self.line(f'best: {ranked[0]["run"]} ll {ranked[0]["final_ll"]}')

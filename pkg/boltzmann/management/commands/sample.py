# boltzmann/management/commands/sample.py
#
# Draw visible samples by block Gibbs sampling and find each sample's
# nearest train / test example (pixelwise L2 distance).
#
#   python manage.py sample --model runs/train/model.json --dataset toy-bas --chain-steps 1000 --count 64
#   python manage.py sample --model runs/train/model.json --consecutive --count 20 --thin 10
#
# Independent mode runs `count` chains for chain_steps sweeps each and keeps
# the final states; --consecutive runs one chain, discards chain_steps
# sweeps, then keeps every thin-th state.
#
# Outputs: samples.csv, sample_means.csv, neighbors.csv (with --dataset).
# ─────────────────────────────────────────────

import numpy as np
import pandas as pd

from boltzmann.evaluation import nearest_neighbors
from boltzmann.exceptions import ValidationError
from boltzmann.free_energy import write_csv
from boltzmann.management.commands._common import (
    DATA_DEFAULTS, MODEL_DEFAULTS, BoltzmannCommand, add_data_arguments, add_model_arguments, check_visible,
    dataset_from_options, model_from_options, write_json,
)
from boltzmann.network import (
    BinaryState, Model, default_schedule, gibbs_sweep, layer_conditional, sample_chain, split_rng,
)
from boltzmann.training import CHAIN_BLOCK
from boltzmann.workers import ordered_map


def independent_samples(model: Model, count: int, steps: int, seed: int, threads: int | None) -> BinaryState:
    spec   = model.spec
    order  = default_schedule(spec)
    sizes  = [min(CHAIN_BLOCK, count - s) for s in range(0, count, CHAIN_BLOCK)]
    rngs   = split_rng(seed, len(sizes))

    def run(i: int) -> BinaryState:
        state = BinaryState.random(spec, rngs[i], batch=sizes[i])
        for _ in range(steps):
            state = gibbs_sweep(model, state, rngs[i], order)
        return state

    blocks = ordered_map(run, range(len(sizes)), threads)
    return BinaryState(tuple(np.concatenate([b.layers[k] for b in blocks]) for k in range(spec.depth + 1)))


def consecutive_samples(model: Model, count: int, burn_in: int, thin: int, seed: int) -> BinaryState:
    rng   = split_rng(seed, 1)[0]
    state = BinaryState.random(model.spec, rng)
    for _ in range(burn_in):
        state = gibbs_sweep(model, state, rng)
    states = sample_chain(model, state, count * thin, rng, thin=thin)
    return BinaryState(tuple(np.stack([s.layers[k] for s in states]) for k in range(model.spec.depth + 1)))


class Command(BoltzmannCommand):
    help = 'Generate visible samples from a model and report their nearest training/test neighbours.'
    command_name = 'sample'
    defaults = {**MODEL_DEFAULTS, **DATA_DEFAULTS, 'chain_steps': 1000, 'count': 64,
                'consecutive': False, 'thin': 1}

    def add_command_arguments(self, parser):
        add_model_arguments(parser)
        add_data_arguments(parser)
        parser.add_argument('--chain_steps', '--chain-steps', dest='chain_steps', type=int,
                            help='Gibbs sweeps per chain (burn-in with --consecutive)')
        parser.add_argument('--count', type=int, help='number of samples')
        parser.add_argument('--consecutive', action='store_true', default=None,
                            help='consecutive states of a single chain')
        parser.add_argument('--thin', type=int, help='sweeps between kept states with --consecutive')

    def run(self, cfg):
        model = model_from_options(cfg)
        count, steps, thin = int(cfg['count']), int(cfg['chain_steps']), int(cfg['thin'])
        if count < 1 or steps < 0 or thin < 1:
            raise ValidationError('count and thin must be >= 1, chain_steps >= 0')

        if cfg['consecutive']:
            states = consecutive_samples(model, count, steps, thin, cfg['seed'])
        else:
            states = independent_samples(model, count, steps, cfg['seed'], cfg['threads'])
        visible = states.visible
        columns = [f'p{j}' for j in range(model.spec.n_vis)]
        write_csv(pd.DataFrame(visible.astype(np.int64), columns=columns), self.output_dir / 'samples.csv')
        write_csv(pd.DataFrame(layer_conditional(model, 0, states), columns=columns),
                  self.output_dir / 'sample_means.csv')

        dataset = dataset_from_options(cfg, required=False)
        summary = {'count': count, 'mode': 'consecutive' if cfg['consecutive'] else 'independent',
                   'distinct': int(np.unique(visible, axis=0).shape[0])}
        if dataset is not None:
            check_visible(model, dataset)
            table = pd.DataFrame({'sample': np.arange(count)})
            for split in ('train', 'test'):
                rows = dataset.split(split)
                if rows.shape[0] == 0:
                    continue
                index, dist = nearest_neighbors(visible, rows)
                table[f'{split}_index']    = index
                table[f'{split}_distance'] = dist
                summary[f'{split}_exact_copies'] = int(np.count_nonzero(dist == 0.0))
            write_csv(table, self.output_dir / 'neighbors.csv')
        write_json(self.output_dir / 'samples.json', summary)

        self.line(f'samples: {count} ({summary["mode"]}), {summary["distinct"]} distinct')
        for split in ('train', 'test'):
            if f'{split}_exact_copies' in summary:
                self.line(f'exact copies of {split} rows: {summary[f"{split}_exact_copies"]}')

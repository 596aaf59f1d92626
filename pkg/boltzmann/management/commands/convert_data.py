# boltzmann/management/commands/convert_data.py
#
# Convert datasets between the supported containers.
#
#   python manage.py convert_data --mat caltech101_silhouettes_28_split1.mat --format silb
#   python manage.py convert_data --mnist train-images-idx3-ubyte.gz t10k-images-idx3-ubyte.gz --format csv
#   python manage.py convert_data --dataset bars-and-stripes --dataset_params '{"width": 4, "height": 4}' --format silb
#
# Outputs (fixed names): dataset.silb | dataset.csv | train.idx + test.idx,
# plus provenance.json.  The SILB container keeps train (and valid) rows
# first, test rows last.
# ─────────────────────────────────────────────

import numpy as np

from boltzmann.datasets import (
    convert_silhouettes_mat, export_csv, load_mnist, load_silhouettes, write_idx, write_silhouettes,
)
from boltzmann.exceptions import ValidationError
from boltzmann.management.commands._common import (
    DATA_DEFAULTS, BoltzmannCommand, add_data_arguments, dataset_from_options, write_json,
)

FORMATS = ('silb', 'csv', 'idx')


class Command(BoltzmannCommand):
    help = 'Convert .mat / IDX / SILB / generated datasets into SILB, CSV or IDX files.'
    command_name = 'convert_data'
    defaults = {**DATA_DEFAULTS, 'mat': None, 'mnist': None, 'silb': None, 'format': 'silb', 'compress': False}

    def add_command_arguments(self, parser):
        src = parser.add_argument_group('input (exactly one)')
        src.add_argument('--mat',   help='silhouettes .mat release (train_data / val_data / test_data)')
        src.add_argument('--mnist', nargs=2, metavar=('TRAIN', 'TEST'), help='IDX image files, raw or gzip')
        src.add_argument('--silb',  help='SILB container')
        add_data_arguments(parser)
        parser.add_argument('--format', choices=FORMATS, help='output container')
        parser.add_argument('--compress', action='store_true', default=None, help='gzip IDX output')

    def load(self, cfg):
        given = [k for k in ('mat', 'mnist', 'silb', 'dataset') if cfg.get(k) is not None]
        if len(given) != 1:
            raise ValidationError('give exactly one input: --mat, --mnist, --silb or --dataset')
        if cfg.get('mat') is not None:
            return convert_silhouettes_mat(cfg['mat'])
        if cfg.get('mnist') is not None:
            return load_mnist(*cfg['mnist'], seed=cfg['seed'])
        if cfg.get('silb') is not None:
            return load_silhouettes(cfg['silb'])
        return dataset_from_options(cfg)

    def run(self, cfg):
        dataset = self.load(cfg)
        if cfg.get('validation_fraction') and cfg.get('dataset') is None:
            dataset = dataset.with_validation(float(cfg['validation_fraction']), cfg['seed'])

        fmt = cfg['format']
        if fmt == 'silb':
            written = [write_silhouettes(self.output_dir / 'dataset.silb', dataset)]
        elif fmt == 'csv':
            written = [export_csv(dataset, self.output_dir / 'dataset.csv')]
        else:
            rows, cols = dataset.image_shape or (1, dataset.n_vis)
            suffix  = '.idx.gz' if cfg['compress'] else '.idx'
            written = []
            for split in ('train', 'test'):
                block = dataset.rows[dataset.splits == split]
                written.append(write_idx(self.output_dir / f'{split}{suffix}',
                                         block.reshape(block.shape[0], rows, cols), compress=bool(cfg['compress'])))

        counts = {tag: int(np.count_nonzero(dataset.splits == tag)) for tag in ('train', 'valid', 'test')}
        write_json(self.output_dir / 'provenance.json', {
            'provenance':  dataset.provenance,
            'counts':      counts,
            'pixels':      dataset.n_vis,
            'image_shape': None if dataset.image_shape is None else list(dataset.image_shape),
            'files':       [p.name for p in written],
        })
        self.line('split sizes: ' + '  '.join(f'{k} {v}' for k, v in counts.items()))
        for path in written:
            self.line(f'wrote {path}')

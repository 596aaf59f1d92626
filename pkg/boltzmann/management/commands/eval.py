# boltzmann/management/commands/eval.py
#
# log Z (exact when enumeration is affordable, AIS when asked for) and the
# train/test log-likelihood of a model, with the independent-Bernoulli
# baseline for reference.
#
#   python manage.py eval --model runs/train/model.json --dataset toy-bas
#   python manage.py eval --rbm 8 10 --init gaussian:1 --dataset parity \
#       --dataset_params '{"n": 8}' --ais runs=500 betas=10000
#
# Output: evaluation.json.
# ─────────────────────────────────────────────

from boltzmann.evaluation import AnnealingSchedule, evaluate
from boltzmann.management.commands._common import (
    DATA_DEFAULTS, MODEL_DEFAULTS, BoltzmannCommand, add_data_arguments, add_model_arguments, check_visible,
    dataset_from_options, model_from_options, parse_key_values, write_json,
)
from boltzmann.serializers import AnnealingArgsSerializer, validated


class Command(BoltzmannCommand):
    help = 'Estimate log Z and evaluate log-likelihoods of a model on a dataset.'
    command_name = 'eval'
    defaults = {**MODEL_DEFAULTS, **DATA_DEFAULTS, 'ais': None}

    def add_command_arguments(self, parser):
        add_model_arguments(parser)
        add_data_arguments(parser)
        parser.add_argument('--ais', nargs='+', metavar='KEY=VALUE',
                            help='annealed importance sampling: runs=<n> betas=<n> [base=uniform|data]')

    def run(self, cfg):
        model   = model_from_options(cfg)
        dataset = dataset_from_options(cfg)
        check_visible(model, dataset)

        schedule, base = None, 'uniform'
        if cfg.get('ais') is not None:
            args     = validated(AnnealingArgsSerializer, parse_key_values(cfg['ais'], '--ais'), '--ais')
            schedule = AnnealingSchedule.uniform(args['betas'], args['runs'])
            base     = args['base']

        report = evaluate(model, dataset.train, dataset.test, schedule, cfg['seed'], base, cfg['threads'])
        doc    = report.to_document()
        write_json(self.output_dir / 'evaluation.json', doc)

        log_z = doc['log_z']
        self.line(f'log Z ({log_z["method"]}): {log_z["estimate"]:.6f}  '
                  f'ci3 [{log_z["ci3"][0]:.6f}, {log_z["ci3"][1]:.6f}]')
        if log_z.get('exact') is not None and log_z['method'] != 'exact':
            self.line(f'exact log Z: {log_z["exact"]:.6f}  delta {log_z["delta"]:+.6f}')
        for name, ll in sorted(doc['ll'].items()):
            self.line(f'll {name:<16} {ll["mean"]:.6f}')
        if doc['baseline'] is not None:
            self.line(f'll {"bernoulli":<16} {doc["baseline"]["mean"]:.6f}')

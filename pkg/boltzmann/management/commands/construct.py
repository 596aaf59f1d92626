# boltzmann/management/commands/construct.py
#
# Build a network and write it to <output_dir>/model.json.
#
# ─────────────────────────────────────────────
# USAGE:
#
#   python manage.py construct --gbm 3
#   python manage.py construct --bundle 2x2 --beta 0.5
#   python manage.py construct --rbm 2 4 --init gaussian:0.1 --seed 7
#   python manage.py construct --sdbm 9 6 6 --encoding ieee754
#
# --gbm additionally writes tangency.json, the exact-arithmetic check that
# every hidden configuration's energy line touches the reference parabola.
# ─────────────────────────────────────────────

from boltzmann.constructor import soft_deep_params, tangency_check
from boltzmann.management.commands._common import (
    MODEL_DEFAULTS, BoltzmannCommand, add_model_arguments, model_from_options, parameter_table, write_json,
)
from boltzmann.storage import ENCODINGS, save_model


class Command(BoltzmannCommand):
    help = 'Construct a layered Boltzmann machine (soft-deep chain, bundle or plain topology) and save it.'
    command_name = 'construct'
    defaults = {**MODEL_DEFAULTS, 'encoding': 'decimal'}

    def add_command_arguments(self, parser):
        add_model_arguments(parser)
        parser.add_argument('--encoding', choices=ENCODINGS, help='number encoding of the model file')

    def run(self, cfg):
        model = model_from_options(cfg)
        path  = save_model(model, self.output_dir / 'model.json', cfg['encoding'])

        if cfg.get('gbm') is not None:
            cert = tangency_check(soft_deep_params(int(cfg['gbm'])))
            write_json(self.output_dir / 'tangency.json', {
                'depth':    cert.depth,
                'passed':   cert.passed,
                'failures': list(cert.failures),
                'lines':    [{'config': e.config, 'slope': e.slope, 'intercept': e.intercept,
                              'xi': str(e.xi)} for e in cert.entries],
            })
            self.line(f'tangency: {"ok" if cert.passed else "FAILED"} ({len(cert.entries)} configurations)')

        for row in parameter_table(model):
            self.line(row)
        self.line(f'model: {path}')

# boltzmann/management/commands/regions.py
#
# Count the effective mixtures (linear regions of the hard-min free energy)
# and compare the count with the topology's bounds.
#
#   python manage.py regions --gbm 3                  -> count: 8
#   python manage.py regions --bundle 2x2             -> count: 16
#   python manage.py regions --dbm 2 2 2 2 --init gaussian:1 --method lp-exact
#   python manage.py regions --rbm 2 5 --init gaussian:1 --method grid-estimate --domain -5:5
#
# Outputs: regions.json (the region report) and bounds.json.
# ─────────────────────────────────────────────

from boltzmann.management.commands._common import (
    MODEL_DEFAULTS, BoltzmannCommand, add_model_arguments, model_from_options, parse_domain, write_json,
)
from boltzmann.mixtures import METHODS, bound_report, count_effective_mixtures
from boltzmann.serializers import RegionReportSerializer, validated


class Command(BoltzmannCommand):
    help = 'Count effective mixtures of a model and check the count against its topology bounds.'
    command_name = 'regions'
    defaults = {**MODEL_DEFAULTS, 'method': 'auto', 'domain': None, 'resolution': 2000,
                'lp_cap': None, 'exact': False}

    def add_command_arguments(self, parser):
        add_model_arguments(parser)
        parser.add_argument('--method', choices=METHODS)
        parser.add_argument('--domain', help="'lo:hi' per visible unit (comma separated); default all of R^n")
        parser.add_argument('--resolution', type=int, help='grid points per axis for grid-estimate')
        parser.add_argument('--lp_cap', '--lp-cap', dest='lp_cap', type=int,
                            help='refuse lp-exact beyond this many distinct gradients')
        parser.add_argument('--exact', action='store_true', default=None,
                            help='rational arithmetic for envelope-1d')

    def run(self, cfg):
        model  = model_from_options(cfg)
        report = count_effective_mixtures(
            model, cfg['method'], parse_domain(cfg['domain'], model.spec.n_vis), cfg['resolution'],
            seed=cfg['seed'], lp_cap=cfg['lp_cap'], threads=cfg['threads'], exact=bool(cfg['exact']),
        )
        doc = report.to_document()
        validated(RegionReportSerializer, doc, 'region report')
        bounds = bound_report(model, report)
        write_json(self.output_dir / 'regions.json', doc)
        write_json(self.output_dir / 'bounds.json', bounds.to_document())

        suffix = ' (estimate)' if report.estimate else ''
        self.line(f'count: {report.count}{suffix}')
        self.line(f'method: {report.method}')
        if report.breakpoints:
            self.line('breakpoints: ' + ' '.join(f'{b:.12g}' for b in report.breakpoints))
        for entry in bounds.entries:
            status = {True: 'ok', False: 'VIOLATED', None: '-'}[entry.passed]
            self.line(f'bound {entry.label:<28} {entry.kind:<12} {entry.value:<10} {status}')

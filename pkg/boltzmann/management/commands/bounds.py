# boltzmann/management/commands/bounds.py
#
# Tabulate F, F_hat, F_MF and the lower bound F_hat - exp(F_hat - E_res)
# over a slice of visible space, and check the sandwich at every point.
#
#   python manage.py bounds --gbm 2 --figure --axis 0:-1:4:501
#   python manage.py bounds --rbm 2 3 --init gaussian:1 --axis 0:-3:3:61 --axis 1:-3:3:61
#
# Outputs: envelope.csv (+ envelope_lines.csv for 1-D slices) and
# bound_check.json.  A violated bound is reported, never raised.
# ─────────────────────────────────────────────

from boltzmann.free_energy import check_bounds, export_envelope
from boltzmann.management.commands._common import (
    ENVELOPE_DEFAULTS, MODEL_DEFAULTS, BoltzmannCommand, add_envelope_arguments, add_model_arguments,
    axes_from_options, figure_model, model_from_options, write_json,
)


class Command(BoltzmannCommand):
    help = 'Export the free-energy envelope of a model over a slice and check F_hat-exp(F_hat-E_res) <= F <= F_MF <= F_hat.'
    command_name = 'bounds'
    defaults = {**MODEL_DEFAULTS, **ENVELOPE_DEFAULTS}

    def add_command_arguments(self, parser):
        add_model_arguments(parser)
        add_envelope_arguments(parser)

    def run(self, cfg):
        model = model_from_options(cfg)
        axes  = axes_from_options(cfg, model.spec.n_vis)
        if cfg['figure']:
            model = figure_model(model, axes)

        export = export_envelope(model, axes, self.output_dir / cfg['csv'], threads=cfg['threads'])
        checks = check_bounds(model, axes.points(model.spec.n_vis), threads=cfg['threads'])
        failed = [c for c in checks if not c.passed]
        write_json(self.output_dir / 'bound_check.json', {
            'points':     len(checks),
            'passed':     len(checks) - len(failed),
            'violations': [{'v': [float(x) for x in c.bundle.v], 'messages': c.violations} for c in failed],
            'max_gap':    max(float(c.bundle.gap) for c in checks),
        })

        self.line(f'bounds: {len(checks) - len(failed)}/{len(checks)} points satisfy the sandwich')
        self.line(f'distinct argmins on the slice: {export.distinct_argmins}')
        if export.breakpoints:
            self.line('breakpoints: ' + ' '.join(f'{b:.12g}' for b in export.breakpoints))
        self.line(f'table: {export.path}')

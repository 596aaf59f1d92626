# boltzmann/management/commands/export_envelope.py
#
# Figure data only: the envelope table over a 1-D or 2-D slice, the lines
# of every hidden configuration (1-D) and the envelope breakpoints.
#
#   python manage.py export_envelope --gbm 2 --figure
#   python manage.py export_envelope --bundle 2x2 --axis 0:-1:2:201 --axis 1:-1:2:201
# ─────────────────────────────────────────────

from boltzmann.free_energy import export_envelope
from boltzmann.management.commands._common import (
    ENVELOPE_DEFAULTS, MODEL_DEFAULTS, BoltzmannCommand, add_envelope_arguments, add_model_arguments,
    axes_from_options, figure_model, model_from_options, write_json,
)


class Command(BoltzmannCommand):
    help = 'Write the free-energy envelope of a model over a visible-space slice as CSV.'
    command_name = 'export_envelope'
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
        write_json(self.output_dir / 'envelope.json', {
            'points':           export.points,
            'distinct_argmins': export.distinct_argmins,
            'breakpoints':      export.breakpoints,
            'table':            export.path.name,
            'lines':            None if export.lines_path is None else export.lines_path.name,
        })
        self.line(f'points: {export.points}   distinct argmins: {export.distinct_argmins}')
        if export.breakpoints:
            self.line('breakpoints: ' + ' '.join(f'{b:.12g}' for b in export.breakpoints))

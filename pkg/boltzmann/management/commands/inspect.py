# boltzmann/management/commands/inspect.py
#
# Describe a model: topology, parameter blocks, centering, which exact
# routes are affordable, and the region-count bounds of its topology.
#
#   python manage.py inspect --model runs/construct/model.json
# ─────────────────────────────────────────────

from boltzmann.enumeration import enumeration_cap
from boltzmann.evaluation import exact_feasible
from boltzmann.management.commands._common import (
    MODEL_DEFAULTS, BoltzmannCommand, add_model_arguments, model_from_options, parameter_table, write_json,
)
from boltzmann.mixtures import bound_report


class Command(BoltzmannCommand):
    help = 'Summarise a model file: shapes, parameter ranges, feasibility of exact routines, topology bounds.'
    command_name = 'inspect'
    defaults = dict(MODEL_DEFAULTS)

    def add_command_arguments(self, parser):
        add_model_arguments(parser)

    def run(self, cfg):
        model  = model_from_options(cfg)
        spec   = model.spec
        bounds = bound_report(model)
        summary = {
            'topology':          spec.topology,
            'layer_sizes':       list(spec.layer_sizes),
            'pairs':             [list(p) for p in spec.pairs],
            'parameters':        int(model.params.flat_vector().size),
            'centered':          model.params.centered,
            'hidden_units':      spec.n_hid,
            'exact_free_energy': spec.n_hid <= enumeration_cap(),
            'exact_log_z':       exact_feasible(model),
            'bounds':            bounds.to_document()['bounds'],
        }
        write_json(self.output_dir / 'inspect.json', summary)

        for row in parameter_table(model):
            self.line(row)
        self.line(f'centered: {summary["centered"]}   parameters: {summary["parameters"]}')
        self.line(f'exact F(v): {summary["exact_free_energy"]}   exact log Z: {summary["exact_log_z"]}')
        for entry in bounds.entries:
            self.line(f'bound {entry.label:<28} {entry.kind:<12} {entry.value}')

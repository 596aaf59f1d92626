# boltzmann/serializers.py
# DRF serializers for every document the project reads or writes:
#   model files, region reports, training configs, run configs and
#   evaluation reports.
# Serializer errors never escape this module: validated() converts them
# into boltzmann.exceptions.ValidationError (exit code 2).

from rest_framework import serializers

from boltzmann.exceptions import ValidationError


def _flatten_errors(errors, prefix='') -> list[str]:
    if isinstance(errors, dict):
        out = []
        for key, value in errors.items():
            out += _flatten_errors(value, f'{prefix}{key}.' if key != 'non_field_errors' else prefix)
        return out
    if isinstance(errors, list):
        out = []
        for i, value in enumerate(errors):
            if isinstance(value, (dict, list)):
                out += _flatten_errors(value, f'{prefix}{i}.')
            else:
                out.append(f'{prefix.rstrip(".") or "document"}: {value}')
        return out
    return [f'{prefix.rstrip(".") or "document"}: {errors}']


def validated(serializer_class, data, what: str = 'document', error=ValidationError) -> dict:
    """Run a serializer over plain data; return validated_data or raise `error`."""
    if not isinstance(data, dict):
        raise error(f'{what}: expected a JSON object, got {type(data).__name__}')
    s = serializer_class(data=data)
    if not s.is_valid():
        raise error(f'{what} is invalid: ' + '; '.join(_flatten_errors(s.errors)))
    return s.validated_data


# ─────────────────────────────────────────────
# Model file (format_version 1)
# ─────────────────────────────────────────────

class ModelDocumentSerializer(serializers.Serializer):
    format_version = serializers.ChoiceField(choices=[1])
    encoding       = serializers.ChoiceField(choices=['decimal', 'ieee754'], default='decimal')
    layer_sizes    = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    mask           = serializers.ListField(
        child=serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=2, max_length=2),
    )
    weights        = serializers.DictField(child=serializers.JSONField())
    biases         = serializers.ListField(child=serializers.JSONField())
    offsets        = serializers.ListField(child=serializers.JSONField(), allow_null=True, required=False,
                                           default=None)

    def validate_weights(self, value):
        for key in value:
            parts = key.split(',')
            if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
                raise serializers.ValidationError(f"weight key {key!r} is not of the form 'k,l'")
        return value

    def validate(self, data):
        n_layers = len(data['layer_sizes'])
        for k, l in data['mask']:
            if not l < k < n_layers:
                raise serializers.ValidationError({'mask': f'pair [{k},{l}] is not 0 <= l < k < {n_layers}'})
        masked = {f'{k},{l}' for k, l in data['mask']}
        keys   = {','.join(p.strip() for p in key.split(',')) for key in data['weights']}
        if keys - masked:
            raise serializers.ValidationError(
                {'weights': f'weight supplied for unmasked pair(s) {sorted(keys - masked)}'}
            )
        if masked - keys:
            raise serializers.ValidationError({'weights': f'missing masked pair(s) {sorted(masked - keys)}'})
        if len(data['biases']) != n_layers:
            raise serializers.ValidationError({'biases': f'expected {n_layers} entries'})
        if data.get('offsets') is not None and len(data['offsets']) != n_layers:
            raise serializers.ValidationError({'offsets': f'expected {n_layers} entries'})
        return data


# ─────────────────────────────────────────────
# Region reports
# ─────────────────────────────────────────────

class ActiveRegionSerializer(serializers.Serializer):
    config    = serializers.RegexField(r'^[01]*$', allow_blank=True)
    witness   = serializers.ListField(child=serializers.FloatField())
    gradient  = serializers.ListField(child=serializers.FloatField())
    intercept = serializers.FloatField()
    margin    = serializers.FloatField(required=False, allow_null=True, default=None)


class RegionReportSerializer(serializers.Serializer):
    count       = serializers.IntegerField(min_value=0)
    method      = serializers.ChoiceField(choices=['envelope-1d', 'lp-exact', 'grid-estimate', 'binary-cube'])
    domain      = serializers.JSONField()
    estimate    = serializers.BooleanField(default=False)
    n_hidden    = serializers.IntegerField(min_value=0)
    active      = ActiveRegionSerializer(many=True)
    breakpoints = serializers.ListField(child=serializers.FloatField(), required=False, default=list)
    box_radius  = serializers.FloatField(required=False, allow_null=True, default=None)
    near_ties   = serializers.ListField(child=serializers.ListField(child=serializers.CharField()),
                                        required=False, default=list)

    def validate(self, data):
        if not data['estimate'] and data['count'] != len(data['active']):
            raise serializers.ValidationError({'count': 'exact reports list every active configuration'})
        if data['count'] > 2 ** data['n_hidden']:
            raise serializers.ValidationError({'count': 'exceeds 2^n_hidden'})
        return data


# ─────────────────────────────────────────────
# Training
# ─────────────────────────────────────────────

class RegularizationSerializer(serializers.Serializer):
    eta           = serializers.FloatField()
    base_strength = serializers.FloatField(min_value=0.0)

    def validate_base_strength(self, value):
        if value <= 0:
            raise serializers.ValidationError('must be > 0')
        return value


class CenteringSerializer(serializers.Serializer):
    offset_update_rate = serializers.FloatField()

    def validate_offset_update_rate(self, value):
        if not 0.0 < value <= 1.0:
            raise serializers.ValidationError('must lie in (0, 1]')
        return value


class TrainConfigSerializer(serializers.Serializer):
    initial_lr        = serializers.FloatField()
    total_updates     = serializers.IntegerField(min_value=0)
    batch_size        = serializers.IntegerField(min_value=1)
    pos_chain_steps   = serializers.IntegerField(min_value=1)
    neg_chain_steps   = serializers.IntegerField(min_value=1)
    num_neg_chains    = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    reg               = RegularizationSerializer(required=False, allow_null=True, default=None)
    centering         = CenteringSerializer(required=False, allow_null=True, default=None)
    momentum          = serializers.FloatField(min_value=0.0, max_value=0.999, default=0.0)
    seed              = serializers.IntegerField(min_value=0, default=0)
    log_every         = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    monitor_ais_runs  = serializers.IntegerField(min_value=2, required=False, allow_null=True, default=None)
    monitor_ais_betas = serializers.IntegerField(min_value=2, required=False, allow_null=True, default=None)
    sample_phases     = serializers.BooleanField(default=True)

    def validate_initial_lr(self, value):
        if not value > 0:
            raise serializers.ValidationError('must be > 0')
        return value


class HyperparameterRangesSerializer(serializers.Serializer):
    lr_log10          = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    reg_log10         = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    eta               = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    offset_rate_log10 = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)

    def validate(self, data):
        for name, (lo, hi) in data.items():
            if lo > hi:
                raise serializers.ValidationError({name: f'inverted interval [{lo}, {hi}]'})
        return data


# ─────────────────────────────────────────────
# Run configs / evaluation
# ─────────────────────────────────────────────

class RunConfigSerializer(serializers.Serializer):
    command    = serializers.CharField()
    seed       = serializers.IntegerField(min_value=0)
    threads    = serializers.IntegerField(min_value=1)
    output_dir = serializers.CharField()
    settings   = serializers.DictField()


class AnnealingArgsSerializer(serializers.Serializer):
    runs  = serializers.IntegerField(min_value=1)
    betas = serializers.IntegerField(min_value=2)
    base  = serializers.ChoiceField(choices=['uniform', 'data'], default='uniform')


class LogZSerializer(serializers.Serializer):
    estimate = serializers.FloatField()
    ci3      = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2)
    method   = serializers.CharField()
    schedule = serializers.DictField(required=False, allow_null=True, default=None)
    exact    = serializers.FloatField(required=False, allow_null=True, default=None)


class EvaluationReportSerializer(serializers.Serializer):
    log_z    = LogZSerializer()
    ll       = serializers.DictField()
    baseline = serializers.DictField(required=False, allow_null=True, default=None)

"""
Scenario section serializers.

Each INI section is validated by one serializer. Inputs use Hz and seconds;
validate() returns internal values in rad/s.
"""
import math

from django.conf import settings
from rest_framework import serializers

from comb_model.models import CombSpec
from core.exceptions import DomainError
from pulse_kit.models import PulseFamily, PulseKind, SignalTrainSpec
from .models import (
    CapacitySettings,
    ControlSettings,
    DesignRequest,
    GridSettings,
    NumericsSettings,
    SweepSettings,
    TimelineSettings,
)

TWO_PI = 2 * math.pi


class FloatListField(serializers.Field):
    """Comma separated floats, e.g. `1e6, 5e6`"""

    item_type = float
    default_error_messages = {
        'invalid': 'Expected a comma separated list of numbers.',
        'empty': 'At least one value is required.',
    }

    def to_internal_value(self, data):
        if isinstance(data, (list, tuple)):
            items = list(data)
        else:
            items = [item.strip() for item in str(data).split(',') if item.strip()]
        try:
            values = tuple(self.item_type(item) for item in items)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not values:
            self.fail('empty')
        return values

    def to_representation(self, value):
        return ', '.join(f"{item:g}" for item in value)


class ComplexListField(FloatListField):
    """Comma separated complex numbers written `re+imj`, e.g. `1, 0.5j, -0.8+0.1j`"""

    item_type = complex
    default_error_messages = {
        'invalid': 'Expected a comma separated list of numbers such as 1, 0.5j or -0.8+0.1j.',
        'empty': 'At least one value is required.',
    }

    def to_representation(self, value):
        return ', '.join(str(complex(item)).strip('()') for item in value)


def _positive(value, name):
    if value is not None and not value > 0:
        raise serializers.ValidationError({name: 'Must be positive.'})


class CombSectionSerializer(serializers.Serializer):
    peak_width_hz = serializers.FloatField()
    peak_spacing_hz = serializers.FloatField()
    peak_count = serializers.IntegerField(min_value=1)
    depth_per_peak = serializers.FloatField(min_value=0)
    center_hz = serializers.FloatField(default=0.0)

    def validate(self, data):
        _positive(data['peak_width_hz'], 'peak_width_hz')
        _positive(data['peak_spacing_hz'], 'peak_spacing_hz')
        try:
            spec = CombSpec(
                peak_width=TWO_PI * data['peak_width_hz'],
                peak_spacing=TWO_PI * data['peak_spacing_hz'],
                peak_count=data['peak_count'],
                depth_per_peak=data['depth_per_peak'],
            )
        except DomainError as exc:
            raise serializers.ValidationError({'peak_spacing_hz': str(exc)})
        return {'spec': spec, 'center': TWO_PI * data['center_hz']}


class SignalSectionSerializer(serializers.Serializer):
    mode_count = serializers.IntegerField(min_value=1, default=1)
    mode_duration_s = serializers.FloatField(required=False, allow_null=True, default=None)
    carrier_detuning_hz = serializers.FloatField(default=0.0)
    first_center_s = serializers.FloatField(default=0.0)
    mode_amplitudes = ComplexListField(required=False, allow_null=True, default=None)

    def validate(self, data):
        _positive(data['mode_duration_s'], 'mode_duration_s')
        comb = self.context['comb']
        duration = data['mode_duration_s'] or comb.mode_duration
        try:
            return SignalTrainSpec(
                mode_count=data['mode_count'],
                mode_duration=duration,
                mode_amplitudes=data['mode_amplitudes'] or (),
                carrier_detuning=TWO_PI * data['carrier_detuning_hz'],
                first_center=data['first_center_s'],
            )
        except DomainError as exc:
            raise serializers.ValidationError({'mode_amplitudes': str(exc)})


class ControlSectionSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=PulseKind.choices, default=PulseKind.ALLEN_EBERLY)
    omega_max_hz = serializers.FloatField(required=False, allow_null=True, default=None)
    tau_c_s = serializers.FloatField(required=False, allow_null=True, default=None)
    chirp_product = serializers.FloatField(required=False, allow_null=True, default=None)
    chirp_span_hz = serializers.FloatField(required=False, allow_null=True, default=None)
    second_chirp_product = serializers.FloatField(required=False, allow_null=True, default=None)
    gate_factor = serializers.FloatField(default=settings.AFC_SIMULATION['GATE_FACTOR'])
    eta_target = serializers.FloatField(default=0.95)
    omega_available_hz = serializers.FloatField(required=False, allow_null=True, default=None)
    allow_mismatched = serializers.BooleanField(default=False)

    def validate_eta_target(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('Efficiency must lie in (0, 1).')
        return value

    def validate(self, data):
        for name in ('omega_max_hz', 'tau_c_s', 'chirp_product', 'chirp_span_hz',
                     'second_chirp_product', 'gate_factor', 'omega_available_hz'):
            _positive(data[name], name)
        kind = data['kind']
        if kind == PulseKind.PI:
            for name in ('chirp_product', 'chirp_span_hz', 'second_chirp_product', 'omega_available_hz'):
                if data[name] is not None:
                    raise serializers.ValidationError({name: 'Not applicable to pi-pulses.'})
        if data['omega_max_hz'] is None and data['omega_available_hz'] is None:
            raise serializers.ValidationError(
                {'omega_max_hz': 'Give omega_max_hz, or omega_available_hz for a designed pulse.'}
            )
        if data['tau_c_s'] is not None and data['chirp_product'] is not None:
            raise serializers.ValidationError({'tau_c_s': 'Give either tau_c_s or chirp_product.'})

        design = None
        if data['omega_available_hz'] is not None:
            design = DesignRequest(eta_target=data['eta_target'],
                                   omega_available=TWO_PI * data['omega_available_hz'])

        def rad(value):
            return None if value is None else TWO_PI * value

        return ControlSettings(
            kind=kind,
            gate_factor=data['gate_factor'],
            eta_target=data['eta_target'],
            omega_max=rad(data['omega_max_hz']),
            tau_c=data['tau_c_s'],
            chirp_product=data['chirp_product'],
            chirp_span=rad(data['chirp_span_hz']),
            second_chirp_product=data['second_chirp_product'],
            allow_mismatched=data['allow_mismatched'],
            design=design,
        )


class TimelineSectionSerializer(serializers.Serializer):
    control1_center_s = serializers.FloatField(required=False, allow_null=True, default=None)
    storage_time_s = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate(self, data):
        _positive(data['storage_time_s'], 'storage_time_s')
        return TimelineSettings(control1_center=data['control1_center_s'], storage_time=data['storage_time_s'])


class GridSectionSerializer(serializers.Serializer):
    sample_count = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=2)
    start_s = serializers.FloatField(required=False, allow_null=True, default=None)

    def validate_sample_count(self, value):
        if value is not None and value & (value - 1):
            raise serializers.ValidationError('Must be a power of two.')
        return value

    def validate(self, data):
        return GridSettings(sample_count=data['sample_count'], start=data['start_s'])


def parse_families(text):
    """`pi, allen_eberly:2, allen_eberly:15.7` -> PulseFamily tuple"""
    families = []
    for item in str(text).split(','):
        item = item.strip()
        if not item:
            continue
        kind, _, product = item.partition(':')
        kind = kind.strip()
        try:
            families.append(PulseFamily(kind=kind, chirp_product=float(product) if product else 0.0))
        except (ValueError, DomainError) as exc:
            raise serializers.ValidationError(f"Bad family '{item}': {exc}")
    if not families:
        raise serializers.ValidationError('At least one family is required.')
    return tuple(families)


class SweepSectionSerializer(serializers.Serializer):
    omega_min_hz = serializers.FloatField()
    omega_max_hz = serializers.FloatField()
    points = serializers.IntegerField(min_value=2)
    families = serializers.CharField(default='pi, allen_eberly:2, allen_eberly:15.7')
    spacing = serializers.ChoiceField(choices=[('linear', 'linear'), ('log', 'log')], default='linear')

    def validate_families(self, value):
        parse_families(value)
        return value

    def validate(self, data):
        _positive(data['omega_min_hz'], 'omega_min_hz')
        if data['omega_max_hz'] <= data['omega_min_hz']:
            raise serializers.ValidationError({'omega_max_hz': 'Must exceed omega_min_hz.'})
        return SweepSettings(
            omega_min=TWO_PI * data['omega_min_hz'],
            omega_max=TWO_PI * data['omega_max_hz'],
            points=data['points'],
            families=parse_families(data['families']),
            log_spacing=data['spacing'] == 'log',
        )


class CapacitySectionSerializer(serializers.Serializer):
    omegas_hz = FloatListField()
    eta_tot_target = serializers.FloatField(default=0.8)
    eta_echo = serializers.FloatField(required=False, allow_null=True, default=None)
    readout = serializers.ChoiceField(choices=[('forward', 'forward'), ('backward', 'backward')],
                                      default='backward')

    def validate_omegas_hz(self, value):
        if any(not item > 0 for item in value):
            raise serializers.ValidationError('Rabi frequencies must be positive.')
        return value

    def validate(self, data):
        if not 0 < data['eta_tot_target'] < 1:
            raise serializers.ValidationError({'eta_tot_target': 'Must lie in (0, 1).'})
        if data['eta_echo'] is not None and not 0 < data['eta_echo'] <= 1:
            raise serializers.ValidationError({'eta_echo': 'Must lie in (0, 1].'})
        return CapacitySettings(
            omegas=tuple(TWO_PI * item for item in data['omegas_hz']),
            eta_tot_target=data['eta_tot_target'],
            eta_echo=data['eta_echo'],
            readout=data['readout'],
        )


class NumericsSectionSerializer(serializers.Serializer):
    tol = serializers.FloatField(required=False, allow_null=True, default=None)
    threads = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    decimation = serializers.BooleanField(required=False, allow_null=True, default=None)

    def validate(self, data):
        return NumericsSettings(tol=data['tol'], threads=data['threads'], decimation=data['decimation'])


class OutputSectionSerializer(serializers.Serializer):
    directory = serializers.CharField(required=False, allow_null=True, default=None)


SECTION_SERIALIZERS = {
    'comb': CombSectionSerializer,
    'signal': SignalSectionSerializer,
    'control': ControlSectionSerializer,
    'timeline': TimelineSectionSerializer,
    'grid': GridSectionSerializer,
    'sweep': SweepSectionSerializer,
    'capacity': CapacitySectionSerializer,
    'numerics': NumericsSectionSerializer,
    'output': OutputSectionSerializer,
}
REQUIRED_SECTIONS = ('comb',)
# parsed only when present
OPTIONAL_SECTIONS = ('control', 'sweep', 'capacity')

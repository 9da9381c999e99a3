"""
Scenario files and the runner behind the management commands.

A scenario is an INI file with flat sections [comb], [signal], [control],
[timeline], [grid], [sweep], [capacity], [numerics] and [output]. Canned
scenarios live in AFC_SCENARIO_DIR.
"""
import configparser
import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings
from rest_framework.fields import empty

from bloch_prop.propagator_service import export_transfer_profile
from comb_model.comb_service import (
    analytic_echo_efficiency,
    build_depth_profile,
    export_depth_profile,
    max_chirped_duration,
    multimode_capacity,
)
from comb_model.models import DepthProfile
from core.csv_export import config_hash, write_rows
from core.exceptions import (
    AFCError,
    ConfigError,
    DesignError,
    NoStorageWindowError,
    PulseTooShortError,
    ScenarioParseError,
    UnreachableEfficiencyError,
)
from memory_sim.models import ProtocolTimeline, TimeGrid
from memory_sim.simulation_service import (
    SWEEP_COLUMNS,
    StorageProtocolService,
    auto_time_grid,
    build_timeline,
    crossing_rabi,
    default_storage_time,
    export_envelope,
    export_results,
)
from pulse_kit.models import ControlPulse, PulseKind
from pulse_kit.pulse_service import (
    adiabaticity_report,
    chirped_pulse,
    design_chirped_pulse,
    design_pi_pulse,
    export_pulse_samples,
    predicted_eta_pi,
    pulse_area,
    required_rabi_chirped,
    requirement_ratios,
)
from .models import Scenario
from .serializers import OPTIONAL_SECTIONS, REQUIRED_SECTIONS, SECTION_SERIALIZERS

logger = logging.getLogger(__name__)

SECTION_RE = re.compile(r'^\s*\[([^\]]+)\]')
KEY_RE = re.compile(r'^\s*([^\s=:#;\[][^=:]*?)\s*[=:]')
AUTO = 'auto'

CAPACITY_COLUMNS = [
    'family', 'omega_rad_s', 'tau_c_s', 't_cut_s', 'capacity_real', 'capacity_int',
    'predicted_eta', 'predicted_eta_tot', 'reachable', 'error',
]
DESIGN_COLUMNS = [
    'kind', 'omega_rad_s', 'tau_c_s', 't_cut_s', 'chirp_span_rad_s', 'chirp_product', 'area_rad',
    'predicted_eta', 'covers_band', 'duration_ok', 'capacity_int',
    'ratio_eta', 'rabi_ratio', 'intensity_ratio', 'duration_ratio',
]


def _line_index(text: str) -> Tuple[Dict[str, int], Dict[Tuple[str, str], int]]:
    """Line numbers of section headers and of keys, 1-based"""
    sections, keys = {}, {}
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        match = SECTION_RE.match(line)
        if match:
            current = match.group(1).strip().lower()
            sections.setdefault(current, number)
            continue
        match = KEY_RE.match(line)
        if match and current is not None:
            keys.setdefault((current, match.group(1).strip().lower()), number)
    return sections, keys


def _format_default(value) -> str:
    if value is None or value is empty:
        return AUTO
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return str(value)


def parse_scenario(text: str, name: str = 'scenario') -> Scenario:
    """
    Parse and validate scenario text.

    Raises ScenarioParseError naming the offending key and line for unknown
    sections or keys, missing required keys and invalid values.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioParseError(f"Malformed scenario: {exc}", key=getattr(exc, 'option', None),
                                 line=getattr(exc, 'lineno', None))

    section_lines, key_lines = _line_index(text)
    for section in parser.sections():
        if section not in SECTION_SERIALIZERS:
            raise ScenarioParseError(f"Unknown section [{section}]", key=section, line=section_lines.get(section))
    for section in REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ScenarioParseError(f"Missing required section [{section}]", key=section)

    validated = {}
    effective = []
    context = {}
    for section, serializer_class in SECTION_SERIALIZERS.items():
        if section in OPTIONAL_SECTIONS and not parser.has_section(section):
            validated[section] = None
            continue
        raw = dict(parser[section]) if parser.has_section(section) else {}
        serializer = serializer_class(data={k: v for k, v in raw.items() if v.strip().lower() != AUTO},
                                      context=context)
        unknown = sorted(set(raw) - set(serializer.fields))
        if unknown:
            key = unknown[0]
            raise ScenarioParseError(f"Unknown key in [{section}]", key=key, line=key_lines.get((section, key)))
        if not serializer.is_valid():
            key, messages = next(iter(serializer.errors.items()))
            message = messages[0] if isinstance(messages, list) else messages
            if key == 'non_field_errors':
                key = section
            line = key_lines.get((section, key), section_lines.get(section))
            raise ScenarioParseError(f"Invalid [{section}]: {message}", key=key, line=line)
        validated[section] = serializer.validated_data
        if section == 'comb':
            context['comb'] = serializer.validated_data['spec']

        effective.append(f"[{section}]")
        for field_name, field in serializer.fields.items():
            value = raw.get(field_name)
            effective.append(f"{field_name} = {value.strip() if value is not None else _format_default(field.default)}")
        effective.append('')

    effective_config = '\n'.join(effective)
    output = validated['output']
    scenario = Scenario(
        name=name,
        comb=validated['comb']['spec'],
        comb_center=validated['comb']['center'],
        signal=validated['signal'],
        control=validated['control'],
        timeline=validated['timeline'],
        grid=validated['grid'],
        sweep=validated['sweep'],
        capacity=validated['capacity'],
        numerics=validated['numerics'],
        output_dir=output.get('directory') if output else None,
        effective_config=effective_config,
        config_sha=config_hash(effective_config),
    )
    logger.info(f"Parsed scenario '{name}' (config sha256 {scenario.config_sha[:12]})")
    return scenario


def load_scenario(reference: str) -> Scenario:
    """A path to an INI file, or the name of a canned scenario"""
    path = Path(reference)
    if not path.is_file():
        path = Path(settings.AFC_SCENARIO_DIR) / f"{reference}.ini"
    if not path.is_file():
        raise ConfigError(f"Scenario '{reference}' is neither a file nor a canned scenario")
    return parse_scenario(path.read_text(encoding='utf-8'), name=path.stem)


def canned_scenarios() -> List[str]:
    return sorted(path.stem for path in Path(settings.AFC_SCENARIO_DIR).glob('*.ini'))


class ScenarioRunner:
    """
    Runs one scenario verb and writes its CSV files.

    Every file written carries the effective-config hash; the effective
    config itself is written next to them.
    """

    EFFECTIVE_CONFIG_FILE = 'effective_config.ini'

    def __init__(self, scenario: Scenario, out_dir, tol: Optional[float] = None,
                 decimate: Optional[bool] = None, threads: Optional[int] = None):
        self.scenario = scenario
        self.out_dir = Path(out_dir)
        self.tol = tol
        allow_mismatched = scenario.control.allow_mismatched if scenario.control else False
        self.service = StorageProtocolService(tol=tol, decimate=decimate, threads=threads,
                                              allow_mismatched=allow_mismatched)

    @property
    def spec(self):
        return self.scenario.comb

    @property
    def sha(self) -> str:
        return self.scenario.config_sha

    def _path(self, filename: str) -> Path:
        return self.out_dir / filename

    def write_effective_config(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self._path(self.EFFECTIVE_CONFIG_FILE)
        path.write_text(f"# config_sha256={self.sha}\n{self.scenario.effective_config}", encoding='utf-8')
        return path

    def _control(self):
        if self.scenario.control is None:
            raise ConfigError("Scenario has no [control] section")
        return self.scenario.control

    def resolve_pulses(self) -> Tuple[ControlPulse, ControlPulse]:
        control = self._control()
        bandwidth = self.spec.bandwidth
        gate = control.gate_factor
        if control.kind == PulseKind.PI:
            if control.tau_c is not None:
                pulse = ControlPulse(kind=PulseKind.PI, omega_max=control.omega_max, tau_c=control.tau_c,
                                     t_cut=gate * control.tau_c)
            else:
                pulse = design_pi_pulse(control.omega_max, gate)
            return pulse, pulse

        chirp_span = control.chirp_span or bandwidth / 2
        if control.design is not None:
            pulse = design_chirped_pulse(
                2 * chirp_span, control.design.eta_target, control.design.omega_available,
                tau_max=max_chirped_duration(self.spec, gate), gate_factor=gate,
            )
        elif control.chirp_product is not None:
            pulse = chirped_pulse(control.omega_max, 2 * chirp_span, control.chirp_product, gate)
        elif control.tau_c is not None:
            pulse = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=control.omega_max,
                                 tau_c=control.tau_c, chirp_span=chirp_span, t_cut=gate * control.tau_c)
        else:
            pulse = design_chirped_pulse(
                2 * chirp_span, control.eta_target, control.omega_max,
                tau_max=max_chirped_duration(self.spec, gate), gate_factor=gate,
            )
        second = pulse
        if control.second_chirp_product is not None:
            second = chirped_pulse(pulse.omega_max, 2 * chirp_span, control.second_chirp_product, gate)
        return pulse, second

    def timeline(self, pulse: ControlPulse) -> ProtocolTimeline:
        settings_ = self.scenario.timeline
        train = self.scenario.signal
        if settings_.control1_center is None:
            return build_timeline(self.spec, train, pulse, settings_.storage_time)
        storage_time = settings_.storage_time or default_storage_time(self.spec, train, pulse)
        return ProtocolTimeline(
            t0_signal=train.first_center,
            t_control1=settings_.control1_center,
            t_control2=settings_.control1_center + storage_time,
        )

    def time_grid(self, storage_time: float = 0.0) -> TimeGrid:
        grid = self.scenario.grid
        train = self.scenario.signal
        if grid.sample_count is None:
            auto = auto_time_grid(self.spec, train, storage_time)
            if grid.start is None:
                return auto
            return TimeGrid(start=grid.start, stop=grid.start + auto.duration, sample_count=auto.sample_count)
        dt = 2 * math.pi / (settings.AFC_SIMULATION['SPAN_FACTOR'] * self.spec.bandwidth)
        start = grid.start if grid.start is not None else train.first_center - train.mode_duration
        return TimeGrid(start=start, stop=start + grid.sample_count * dt, sample_count=grid.sample_count)

    def depth_profile(self, grid: TimeGrid) -> DepthProfile:
        return build_depth_profile(self.spec, grid.spectral_grid(), self.scenario.comb_center)

    def run_echo(self) -> Dict[str, object]:
        self.write_effective_config()
        grid = self.time_grid()
        profile = self.depth_profile(grid)
        echo = self.service.absorb_and_echo(profile, self.scenario.signal, grid)
        export_envelope(grid, echo.output, self._path('echo_envelope.csv'), self.sha)
        summary = {
            'eta_echo': echo.eta_echo,
            'echo_time_s': echo.echo_time_measured,
            'echo_time_expected_s': self.spec.echo_time,
            'eta_echo_analytic_forward': analytic_echo_efficiency(self.spec, 'forward'),
            'window_start_s': echo.window[0],
            'window_end_s': echo.window[1],
        }
        write_rows(self._path('echo_summary.csv'), list(summary), [summary], self.sha)
        return summary

    def run_store(self) -> Dict[str, object]:
        self.write_effective_config()
        pulse1, pulse2 = self.resolve_pulses()
        timeline = self.timeline(pulse1)
        grid = self.time_grid(timeline.storage_time)
        profile = self.depth_profile(grid)
        recall = self.service.recall_field(profile, self.scenario.signal, grid, pulse1, pulse2, timeline)
        export_envelope(grid, recall.recalled, self._path('recall_envelope.csv'), self.sha)
        if recall.transfer is not None:
            export_transfer_profile(recall.transfer, self._path('transfer_profile.csv'), self.sha)
        row = recall.result.to_row()
        export_results([row], self._path('store_result.csv'), self.sha, metadata=recall.result.metadata)
        row.update(recall.result.metadata)
        row['expected_echo_time_s'] = self.spec.echo_time + timeline.storage_time
        return row

    def sweep_omegas(self) -> np.ndarray:
        sweep = self.scenario.sweep
        if sweep.log_spacing:
            return np.geomspace(sweep.omega_min, sweep.omega_max, sweep.points)
        return np.linspace(sweep.omega_min, sweep.omega_max, sweep.points)

    def run_sweep(self) -> Dict[str, object]:
        if self.scenario.sweep is None:
            raise ConfigError("Scenario has no [sweep] section")
        self.write_effective_config()
        storage_time = self.scenario.timeline.storage_time
        grid = self.time_grid(storage_time or self.spec.echo_time + self.scenario.signal.mode_duration)
        profile = self.depth_profile(grid)
        omegas = self.sweep_omegas()

        combined = []
        crossings = {}
        for family in self.scenario.sweep.families:
            rows = self.service.sweep_rabi(profile, self.scenario.signal, grid, family, omegas, storage_time)
            export_results(rows, self._path(f"sweep_{family.label}.csv"), self.sha, fieldnames=SWEEP_COLUMNS)
            combined.extend(rows)
            crossings[family.label] = crossing_rabi(rows, 0.9)
        export_results(combined, self._path('sweep_comparison.csv'), self.sha, fieldnames=SWEEP_COLUMNS)

        omega_pi = crossings.get('pi', float('nan'))
        ratios = {
            label: omega_pi / value
            for label, value in crossings.items()
            if label != 'pi' and math.isfinite(value) and value > 0
        }
        return {'crossings': crossings, 'rabi_ratios': ratios, 'rows': combined}

    def _eta_echo_for_capacity(self) -> float:
        capacity = self.scenario.capacity
        if capacity.eta_echo is not None:
            return capacity.eta_echo
        return analytic_echo_efficiency(self.spec, capacity.readout)

    def run_capacity(self) -> List[Dict[str, object]]:
        """Chirped and pi-pulse capacity per Rabi frequency at the configured eta_tot"""
        capacity = self.scenario.capacity
        if capacity is None:
            raise ConfigError("Scenario has no [capacity] section")
        self.write_effective_config()
        gate = self.scenario.control.gate_factor if self.scenario.control else None
        eta_echo = self._eta_echo_for_capacity()
        eta_sq = capacity.eta_tot_target / eta_echo
        if eta_sq >= 1:
            raise UnreachableEfficiencyError(
                f"eta_tot = {capacity.eta_tot_target} is not reachable with eta_echo = {eta_echo:.4g}"
            )
        eta = math.sqrt(eta_sq)
        tau_max = max_chirped_duration(self.spec, gate)
        bandwidth = self.spec.bandwidth
        rows = []

        for omega in capacity.omegas:
            row = {'family': PulseKind.ALLEN_EBERLY.value, 'omega_rad_s': omega, 'error': ''}
            try:
                pulse = design_chirped_pulse(bandwidth, eta, omega, tau_max=tau_max, gate_factor=gate)
                row.update(self._capacity_columns(pulse, eta, eta_echo))
                row['reachable'] = True
            except (DesignError, PulseTooShortError, NoStorageWindowError) as exc:
                row.update({'reachable': False, 'error': str(exc)})
            rows.append(row)

            row = {'family': PulseKind.PI.value, 'omega_rad_s': omega, 'error': ''}
            pulse = design_pi_pulse(omega, gate)
            predicted = predicted_eta_pi(omega, bandwidth)
            try:
                row.update(self._capacity_columns(pulse, predicted, eta_echo))
            except NoStorageWindowError as exc:
                row['error'] = str(exc)
            row['reachable'] = predicted >= eta - 1e-12 and not row['error']
            rows.append(row)

        row = {'family': 'allen_eberly_single_mode', 'error': ''}
        try:
            omega = required_rabi_chirped(eta, bandwidth / 2, tau_max)
            pulse = chirped_pulse(omega, bandwidth, bandwidth / 2 * tau_max, gate)
            row.update({'omega_rad_s': omega, 'reachable': True})
            row.update(self._capacity_columns(pulse, eta, eta_echo))
        except (PulseTooShortError, UnreachableEfficiencyError, NoStorageWindowError) as exc:
            row.update({'reachable': False, 'error': str(exc)})
        rows.append(row)

        write_rows(self._path('capacity.csv'), CAPACITY_COLUMNS, rows, self.sha,
                   metadata={'eta_echo': eta_echo, 'eta_per_pass': eta})
        return rows

    def _capacity_columns(self, pulse: ControlPulse, eta: float, eta_echo: float) -> Dict[str, object]:
        capacity_real, capacity_int = multimode_capacity(self.spec, pulse.t_cut)
        return {
            'tau_c_s': pulse.tau_c,
            't_cut_s': pulse.t_cut,
            'capacity_real': capacity_real,
            'capacity_int': capacity_int,
            'predicted_eta': eta,
            'predicted_eta_tot': eta_echo * eta ** 2,
        }

    def run_design(self) -> Dict[str, object]:
        self.write_effective_config()
        control = self._control()
        pulse, _ = self.resolve_pulses()
        row = {
            'kind': pulse.kind,
            'omega_rad_s': pulse.omega_max,
            'tau_c_s': pulse.tau_c,
            't_cut_s': pulse.t_cut,
            'chirp_span_rad_s': pulse.chirp_span,
            'chirp_product': pulse.chirp_product,
            'area_rad': pulse_area(pulse),
        }
        if pulse.kind == PulseKind.ALLEN_EBERLY:
            report = adiabaticity_report(pulse, self.spec.bandwidth)
            row.update({'predicted_eta': report.predicted_eta, 'covers_band': report.covers_band,
                        'duration_ok': report.duration_ok})
        else:
            row['predicted_eta'] = predicted_eta_pi(pulse.omega_max, self.spec.bandwidth)
        try:
            row['capacity_int'] = multimode_capacity(self.spec, pulse.t_cut)[1]
        except NoStorageWindowError as exc:
            logger.warning(f"Designed pulse leaves no storage window: {exc}")
            row['capacity_int'] = 0
        try:
            ratios = requirement_ratios(control.eta_target, self.spec.bandwidth)
            row.update({
                'ratio_eta': ratios['eta'],
                'rabi_ratio': ratios['rabi_ratio'],
                'intensity_ratio': ratios['intensity_ratio'],
                'duration_ratio': ratios['duration_ratio'],
            })
        except AFCError as exc:
            logger.warning(f"Requirement ratios unavailable: {exc}")
        write_rows(self._path('design.csv'), DESIGN_COLUMNS, [row], self.sha)
        return row

    def run_dump_comb(self) -> Path:
        self.write_effective_config()
        grid = self.time_grid()
        return export_depth_profile(self.depth_profile(grid), self._path('comb_profile.csv'), self.sha)

    def run_dump_pulse(self, samples: int = 2048) -> List[Path]:
        self.write_effective_config()
        pulse1, pulse2 = self.resolve_pulses()
        paths = [export_pulse_samples(pulse1, self._path('pulse1_samples.csv'), samples, self.sha)]
        if not pulse2.same_shape(pulse1):
            paths.append(export_pulse_samples(pulse2, self._path('pulse2_samples.csv'), samples, self.sha))
        return paths

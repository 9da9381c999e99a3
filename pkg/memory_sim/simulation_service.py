"""
Storage protocol simulation.

Envelopes follow E(t) = sum_w S(w) exp(-i w t) on a periodic TimeGrid, so
S = ifft(E), E = fft(S) and a delay tau is the spectral factor exp(i w tau).
The comb acts as the single-pass filter exp(-d/2 + i phi); the control pair
acts on the echo part of that output as t_double(w) exp(i w (T_s + T_w)).
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings
from scipy import fft
from scipy.optimize import minimize_scalar

from bloch_prop.propagator_service import transfer_profile
from comb_model.comb_service import auto_spectral_grid, multimode_capacity
from comb_model.models import CombSpec, DepthProfile
from core.csv_export import write_columns, write_rows
from core.exceptions import (
    AFCError,
    AmbiguousWindowError,
    GridError,
    GridResolutionError,
    PulseMismatchError,
    SignalTooShortError,
    TimelineError,
    UndefinedOverlapError,
)
from core.workers import ordered_map
from pulse_kit.models import ControlPulse, PulseFamily, PulseKind, SignalTrainSpec
from pulse_kit.pulse_service import build_signal_train, family_prediction, family_pulse
from .models import EchoResult, ProtocolTimeline, RecallResult, StorageResult, TimeGrid

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    'omega_rad_s', 'eta_echo', 'eta_sq', 'eta_tot', 'overlap', 'echo_time_s', 'leakage', 'capacity_int',
]
SWEEP_COLUMNS = ['family'] + RESULT_COLUMNS + [
    'spectral_eta_sq', 'predicted_eta', 'predicted_eta_sq', 'monotone', 'error',
]

# sweep points may dip by this much before the trend is tagged non-monotone
MONOTONE_SLACK = 1e-3
OVERLAP_SCAN_POINTS = 41


def _sim_setting(name):
    return settings.AFC_SIMULATION[name]


def _energy(envelope: np.ndarray, dt: float) -> float:
    return float(np.sum(np.abs(envelope) ** 2) * dt)


def _window_mask(times: np.ndarray, window: Tuple[float, float]) -> np.ndarray:
    return (times >= window[0]) & (times <= window[1])


def _centroid(times: np.ndarray, envelope: np.ndarray) -> float:
    weights = np.abs(envelope) ** 2
    total = weights.sum()
    if total == 0:
        return float('nan')
    return float(np.sum(times * weights) / total)


def apply_spectral_filter(envelope: np.ndarray, response: np.ndarray) -> np.ndarray:
    """Multiply the envelope spectrum by `response` (FFT order) and return to the time domain"""
    return fft.fft(response * fft.ifft(envelope))


def echo_window(spec: CombSpec, train: SignalTrainSpec) -> Tuple[float, float]:
    """First-echo window [t_first + T - w, t_last + T + w], w = tau_mode by default"""
    half = _sim_setting('ECHO_WINDOW_HALF_WIDTH') * train.mode_duration
    return (
        train.first_center + spec.echo_time - half,
        train.last_center + spec.echo_time + half,
    )


def auto_time_grid(spec: CombSpec, train: SignalTrainSpec, storage_time: float = 0.0) -> TimeGrid:
    """
    Smallest FFT-dual grid holding the train, its echo and the recall.

    The grid starts one mode duration before the first mode.
    """
    lead = train.mode_duration
    needed = (train.last_center - train.first_center) + spec.echo_time + storage_time + 3 * lead
    spectral = auto_spectral_grid(spec, min_duration=needed)
    return TimeGrid.from_spectral_grid(spectral, start=train.first_center - lead)


def default_storage_time(spec: CombSpec, train: SignalTrainSpec, pulse: ControlPulse) -> float:
    """One echo time when that clears the gate, else one mode duration beyond T_cut"""
    if spec.echo_time > pulse.t_cut:
        return spec.echo_time
    return pulse.t_cut + train.mode_duration


def build_timeline(spec: CombSpec, train: SignalTrainSpec, pulse: ControlPulse,
                   storage_time: Optional[float] = None) -> ProtocolTimeline:
    """First gate opens right after the core of the last signal mode"""
    core = _sim_setting('MODE_CORE_SIGMAS') * train.sigma_t
    t_control1 = train.last_center + core + pulse.t_cut / 2
    if storage_time is None:
        storage_time = default_storage_time(spec, train, pulse)
    return ProtocolTimeline(
        t0_signal=train.first_center,
        t_control1=t_control1,
        t_control2=t_control1 + storage_time,
    )


def check_timeline(spec: CombSpec, train: SignalTrainSpec, pulse1: ControlPulse, pulse2: ControlPulse,
                   timeline: ProtocolTimeline) -> None:
    core = _sim_setting('MODE_CORE_SIGMAS') * train.sigma_t
    if not math.isclose(timeline.t0_signal, train.first_center, rel_tol=0.0, abs_tol=train.sigma_t * 1e-6):
        raise TimelineError(
            f"Timeline signal start {timeline.t0_signal:.6g} s differs from the first mode "
            f"center {train.first_center:.6g} s"
        )
    gate_start = timeline.t_control1 - pulse1.t_cut / 2
    gate_end = timeline.t_control1 + pulse1.t_cut / 2
    last_core_end = train.last_center + core
    first_echo_core = train.first_center + spec.echo_time - core
    if gate_start < last_core_end - 1e-9 * train.sigma_t:
        raise TimelineError(
            f"Control 1 gate opens at {gate_start:.6g} s, before the last signal mode ends "
            f"({last_core_end:.6g} s)"
        )
    if gate_end > first_echo_core:
        raise TimelineError(
            f"Control 1 gate closes at {gate_end:.6g} s, after the echo starts ({first_echo_core:.6g} s)"
        )
    if timeline.storage_time <= 0.5 * (pulse1.t_cut + pulse2.t_cut):
        raise TimelineError(
            f"Storage time {timeline.storage_time:.6g} s lets the control gates overlap "
            f"(T_cut {pulse1.t_cut:.6g} s, {pulse2.t_cut:.6g} s)"
        )


def overlap_fidelity(signal: np.ndarray, output: np.ndarray, expected_delay: float, grid: TimeGrid,
                     max_shift: float = 0.0) -> float:
    """
    |<output | signal(t - tau)>|^2 / (|signal|^2 |output|^2), maximized over
    tau in expected_delay +/- max_shift.
    """
    signal = np.asarray(signal)
    output = np.asarray(output)
    if signal.shape != output.shape or signal.size != grid.sample_count:
        raise GridError("Overlap envelopes must share the time grid")
    signal_spectrum = fft.ifft(signal)
    output_spectrum = fft.ifft(output)
    norm = float(np.sum(np.abs(signal_spectrum) ** 2) * np.sum(np.abs(output_spectrum) ** 2))
    if norm == 0:
        raise UndefinedOverlapError("Overlap undefined for a zero-energy envelope")
    omega = grid.angular_frequencies()
    cross = np.conj(output_spectrum) * signal_spectrum

    def fidelity(delay):
        return float(abs(np.sum(cross * np.exp(1j * omega * delay))) ** 2 / norm)

    if max_shift <= 0:
        return min(1.0, fidelity(expected_delay))

    delays = expected_delay + np.linspace(-max_shift, max_shift, OVERLAP_SCAN_POINTS)
    values = [fidelity(d) for d in delays]
    best = int(np.argmax(values))
    step = delays[1] - delays[0]
    lo = max(delays[0], delays[best] - step)
    hi = min(delays[-1], delays[best] + step)
    refined = minimize_scalar(lambda d: -fidelity(d), bounds=(lo, hi), method='bounded',
                              options={'xatol': step * 1e-6})
    return min(1.0, max(values[best], -float(refined.fun)))


def export_envelope(grid: TimeGrid, envelope: np.ndarray, path, config_sha: Optional[str] = None):
    return write_columns(
        path,
        {'t_s': grid.times, 're_E': envelope.real, 'im_E': envelope.imag},
        config_sha=config_sha,
    )


def export_results(rows: Sequence[Dict[str, object]], path, config_sha: Optional[str] = None,
                   fieldnames: Optional[Sequence[str]] = None, metadata: Optional[Dict[str, object]] = None):
    return write_rows(path, fieldnames or RESULT_COLUMNS, rows, config_sha=config_sha, metadata=metadata)


def crossing_rabi(rows: Sequence[Dict[str, object]], level: float = 0.9) -> float:
    """Rabi frequency where eta_sq first reaches `level`, linearly interpolated; nan if never"""
    points = [
        (float(row['omega_rad_s']), float(row['eta_sq']))
        for row in rows
        if not row.get('error') and math.isfinite(float(row.get('eta_sq', float('nan'))))
    ]
    points.sort()
    for (w0, e0), (w1, e1) in zip(points, points[1:]):
        if e0 < level <= e1:
            return w0 + (level - e0) * (w1 - w0) / (e1 - e0)
    if points and points[0][1] >= level:
        return points[0][0]
    return float('nan')


class StorageProtocolService:
    """
    Absorption, echo and spin-wave recall for one comb.

    Holds the numeric policy (integrator tolerance, decimation, threads) so
    that every run of a scenario uses the same settings.
    """

    def __init__(self, tol: Optional[float] = None, decimate: Optional[bool] = None,
                 threads: Optional[int] = None, allow_mismatched: bool = False):
        self.tol = tol
        self.decimate = decimate
        self.threads = threads
        self.allow_mismatched = allow_mismatched

    def _check_inputs(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid) -> None:
        spec = profile.spec
        if train.bandwidth > spec.bandwidth * (1 + 1e-12):
            raise SignalTooShortError(
                f"Signal bandwidth {train.bandwidth:.6g} rad/s exceeds the comb bandwidth "
                f"{spec.bandwidth:.6g} rad/s"
            )
        if not grid.satisfies_nyquist(spec.bandwidth):
            raise GridResolutionError(
                f"Time step {grid.spacing:.6g} s does not resolve the comb bandwidth"
            )
        if profile.grid.sample_count != grid.sample_count or not math.isclose(
                profile.grid.spacing, 2 * math.pi / grid.duration, rel_tol=1e-9):
            raise GridError("Depth profile is not sampled on the FFT dual of the time grid")
        edge = abs(train.carrier_detuning - profile.center) + train.bandwidth / 2
        if edge > spec.bandwidth / 2:
            logger.warning(
                f"Signal spectrum reaches {edge:.6g} rad/s from the comb center, beyond the comb half width"
            )

    def _echo(self, profile: DepthProfile, signal: np.ndarray, grid: TimeGrid,
              window: Tuple[float, float]) -> EchoResult:
        response = fft.ifftshift(profile.transfer_function())
        output = apply_spectral_filter(signal, response)
        times = grid.times
        mask = _window_mask(times, window)
        input_energy = _energy(signal, grid.spacing)
        eta_echo = _energy(output[mask], grid.spacing) / input_energy
        echo_time = _centroid(times[mask], output[mask]) - _centroid(times, signal)
        return EchoResult(signal=signal, output=output, eta_echo=eta_echo,
                          echo_time_measured=echo_time, window=window)

    def _checked_window(self, spec: CombSpec, train: SignalTrainSpec, grid: TimeGrid) -> Tuple[float, float]:
        window = echo_window(spec, train)
        prompt_end = train.last_center + train.mode_duration / 2
        if window[0] < prompt_end:
            raise AmbiguousWindowError(
                f"Echo window opens at {window[0]:.6g} s while the transmitted signal lasts until "
                f"{prompt_end:.6g} s"
            )
        if window[1] > grid.stop:
            raise GridError(f"Echo window ends at {window[1]:.6g} s, beyond the grid end {grid.stop:.6g} s")
        return window

    def absorb_and_echo(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid) -> EchoResult:
        """Forward single-pass response without control fields"""
        self._check_inputs(profile, train, grid)
        window = self._checked_window(profile.spec, train, grid)
        echo = self._echo(profile, build_signal_train(train, grid), grid, window)
        logger.info(f"Echo: eta_echo={echo.eta_echo:.4f}, echo time {echo.echo_time_measured * 1e6:.4f} us")
        return echo

    def _transfer_on_grid(self, profile: DepthProfile, pulse1: ControlPulse, pulse2: ControlPulse,
                          grid: TimeGrid):
        """t_double and t1 in FFT order, zero outside the comb support"""
        spec = profile.spec
        ascending = fft.fftshift(grid.angular_frequencies())
        reach = spec.bandwidth / 2 + _sim_setting('SUPPORT_MARGIN_SPACINGS') * spec.peak_spacing
        support = np.abs(ascending - profile.center) <= reach
        transfer = transfer_profile(pulse1, pulse2, ascending[support], tol=self.tol,
                                    decimate=self.decimate, threads=self.threads)
        t_double = np.zeros(ascending.size, dtype=complex)
        t1 = np.zeros(ascending.size, dtype=complex)
        t_double[support] = transfer.t_double
        t1[support] = transfer.t1
        return transfer, fft.ifftshift(t_double), fft.ifftshift(t1)

    def _check_pulses(self, pulse1: ControlPulse, pulse2: ControlPulse) -> None:
        chirped = PulseKind.ALLEN_EBERLY in (pulse1.kind, pulse2.kind)
        if chirped and not pulse1.same_shape(pulse2):
            if not self.allow_mismatched:
                raise PulseMismatchError("Chirped control pulses must be identical in shape")
            logger.warning("Running with mismatched chirped control pulses")

    def _recall(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid, echo: EchoResult,
                pulse1: ControlPulse, pulse2: ControlPulse, timeline: ProtocolTimeline,
                ideal_transfer: bool = False) -> RecallResult:
        spec = profile.spec
        self._check_pulses(pulse1, pulse2)
        check_timeline(spec, train, pulse1, pulse2, timeline)
        pulse1 = pulse1.moved_to(timeline.t_control1)
        pulse2 = pulse2.moved_to(timeline.t_control2)

        storage_time = timeline.storage_time
        recall_window = (echo.window[0] + storage_time, echo.window[1] + storage_time)
        if recall_window[1] > grid.stop:
            raise GridError(f"Recall window ends at {recall_window[1]:.6g} s, beyond the grid end {grid.stop:.6g} s")

        times = grid.times
        dt = grid.spacing
        omega = grid.angular_frequencies()
        after = np.where(times >= echo.window[0], echo.output, 0)
        echo_part = np.where(_window_mask(times, echo.window), echo.output, 0)
        weights = np.abs(fft.ifft(echo_part)) ** 2
        weights = weights / weights.sum() if weights.sum() > 0 else weights

        if ideal_transfer:
            transfer = None
            t_double = np.ones(omega.size, dtype=complex)
            t1 = np.ones(omega.size, dtype=complex)
            recall_filter = np.exp(1j * omega * storage_time)
        else:
            transfer, t_double, t1 = self._transfer_on_grid(profile, pulse1, pulse2, grid)
            recall_filter = t_double * np.exp(1j * omega * (storage_time + transfer.double_window))

        recalled = apply_spectral_filter(after, recall_filter)
        mask = _window_mask(times, recall_window)
        in_window = np.where(mask, recalled, 0)

        input_energy = _energy(echo.signal, dt)
        eta_tot = _energy(recalled[mask], dt) / input_energy
        eta_echo = echo.eta_echo
        eta_sq = eta_tot / eta_echo if eta_echo > 0 else float('nan')
        leakage = eta_echo * float(np.sum(weights * (1 - np.abs(t1) ** 2)))
        spectral_eta_sq = float(np.sum(weights * np.abs(t_double) ** 2))
        recall_time = _centroid(times[mask], recalled[mask]) - _centroid(times, echo.signal)

        expected_delay = spec.echo_time + storage_time
        try:
            overlap = overlap_fidelity(
                echo.signal, in_window, expected_delay, grid,
                max_shift=_sim_setting('OVERLAP_DELAY_REFINEMENT') * train.mode_duration,
            )
        except UndefinedOverlapError:
            overlap = 0.0
        capacity_real, capacity_int = multimode_capacity(spec, pulse1.t_cut)

        result = StorageResult(
            eta_echo=eta_echo,
            eta_sq=eta_sq,
            eta_tot=eta_tot,
            overlap=overlap,
            echo_time_measured=recall_time,
            capacity_int=capacity_int,
            capacity_real=capacity_real,
            leakage=leakage,
            spectral_eta_sq=spectral_eta_sq,
            omega=pulse1.omega_max,
            metadata={
                'storage_time_s': storage_time,
                't_cut_s': pulse1.t_cut,
                'echo_window_width_s': echo.window[1] - echo.window[0],
                'decimated': bool(transfer.decimated) if transfer is not None else False,
            },
        )
        logger.info(
            f"Recall at Omega={pulse1.omega_max:.6g} rad/s: eta_sq={eta_sq:.4f}, eta_tot={eta_tot:.4f}, "
            f"overlap={overlap:.4f}"
        )
        return RecallResult(result=result, echo=echo, recalled=recalled, recall_window=recall_window,
                            transfer=transfer)

    def recall_field(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid,
                     pulse1: ControlPulse, pulse2: ControlPulse, timeline: ProtocolTimeline,
                     ideal_transfer: bool = False) -> RecallResult:
        echo = self.absorb_and_echo(profile, train, grid)
        return self._recall(profile, train, grid, echo, pulse1, pulse2, timeline, ideal_transfer)

    def run_protocol(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid,
                     pulse1: ControlPulse, pulse2: ControlPulse, timeline: ProtocolTimeline,
                     ideal_transfer: bool = False) -> StorageResult:
        """
        Store with pulse1, recall with pulse2.

        ideal_transfer replaces both pulses by a lossless swap, which recovers
        eta_tot = eta_echo.
        """
        return self.recall_field(profile, train, grid, pulse1, pulse2, timeline, ideal_transfer).result

    def sweep_rabi(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid,
                   family: PulseFamily, omegas: Sequence[float],
                   storage_time: Optional[float] = None) -> List[Dict[str, object]]:
        """
        One protocol run per Rabi frequency, with the closed-form prediction
        of the family alongside. Failed points keep their row with an error.
        """
        spec = profile.spec
        echo = self.absorb_and_echo(profile, train, grid)
        # points run in parallel, so each one solves its detunings serially
        worker = StorageProtocolService(self.tol, self.decimate, threads=1,
                                        allow_mismatched=self.allow_mismatched)

        def run_point(omega):
            row = {column: float('nan') for column in RESULT_COLUMNS}
            row.update({'family': family.label, 'omega_rad_s': float(omega), 'error': ''})
            predicted = family_prediction(family, omega, spec.bandwidth)
            row['predicted_eta'] = predicted
            row['predicted_eta_sq'] = predicted ** 2
            try:
                pulse = family_pulse(family, omega, spec.bandwidth)
                timeline = build_timeline(spec, train, pulse, storage_time)
                result = worker._recall(profile, train, grid, echo, pulse, pulse, timeline).result
            except AFCError as exc:
                logger.warning(f"Sweep point Omega={omega:.6g} rad/s failed: {exc}")
                row['error'] = str(exc)
                return row
            result_row = result.to_row()
            row.update({key: result_row[key] for key in RESULT_COLUMNS + ['spectral_eta_sq']})
            return row

        rows = ordered_map(run_point, list(omegas), self.threads)

        previous = -math.inf
        for row in rows:
            value = row['eta_sq']
            if row['error'] or not math.isfinite(value):
                row['monotone'] = False
                continue
            row['monotone'] = value >= previous - MONOTONE_SLACK
            previous = max(previous, value)
        logger.info(f"Sweep {family.label}: {len(rows)} points, crossing 0.9 at {crossing_rabi(rows):.6g} rad/s")
        return rows

    def robustness_check(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid,
                         pulse: ControlPulse, epsilon: float,
                         storage_time: Optional[float] = None) -> Dict[str, float]:
        """
        Scale both control amplitudes by (pi + epsilon)/pi, i.e. a pi-pulse
        area error of epsilon, and report the change of eta_sq.
        """
        spec = profile.spec
        echo = self.absorb_and_echo(profile, train, grid)
        timeline = build_timeline(spec, train, pulse, storage_time)
        factor = (math.pi + epsilon) / math.pi
        nominal = self._recall(profile, train, grid, echo, pulse, pulse, timeline).result
        perturbed_pulse = pulse.scaled(factor)
        perturbed = self._recall(profile, train, grid, echo, perturbed_pulse, perturbed_pulse, timeline).result
        report = {
            'epsilon': epsilon,
            'factor': factor,
            'eta_sq_nominal': nominal.eta_sq,
            'eta_sq_perturbed': perturbed.eta_sq,
            'drop': nominal.eta_sq - perturbed.eta_sq,
            'predicted_drop': epsilon ** 2 / 2 if pulse.kind == PulseKind.PI else 0.0,
        }
        logger.info(f"Robustness ({pulse.kind}, epsilon={epsilon}): drop {report['drop']:.3g}")
        return report

    def store_modes_separately(self, profile: DepthProfile, train: SignalTrainSpec, grid: TimeGrid,
                               pulse1: ControlPulse, pulse2: ControlPulse,
                               timeline: ProtocolTimeline) -> Dict[str, object]:
        """Recall each mode alone and compare the sum with the joint recall"""
        self._check_inputs(profile, train, grid)
        window = self._checked_window(profile.spec, train, grid)
        joint_echo = self._echo(profile, build_signal_train(train, grid), grid, window)
        joint = self._recall(profile, train, grid, joint_echo, pulse1, pulse2, timeline)

        summed = np.zeros(grid.sample_count, dtype=complex)
        efficiencies = []
        input_energy = _energy(joint_echo.signal, grid.spacing)
        for index in range(train.mode_count):
            single = train.single_mode(index)
            echo = self._echo(profile, build_signal_train(single, grid), grid, window)
            recalled = self._recall(profile, train, grid, echo, pulse1, pulse2, timeline)
            summed += recalled.recalled
            efficiencies.append(recalled.result.eta_tot)

        reference = math.sqrt(_energy(joint.recalled, grid.spacing))
        mismatch = math.sqrt(_energy(summed - joint.recalled, grid.spacing))
        relative_error = mismatch / reference if reference > 0 else mismatch / math.sqrt(input_energy)
        logger.info(f"Mode-by-mode recall matches joint recall to {relative_error:.3g}")
        return {
            'joint': joint,
            'summed': summed,
            'mode_efficiencies': efficiencies,
            'relative_error': relative_error,
        }

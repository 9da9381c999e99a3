import math

import numpy as np
import pytest

from comb_model.comb_service import build_depth_profile
from comb_model.models import CombSpec
from core.exceptions import (
    AmbiguousWindowError,
    GridError,
    PulseMismatchError,
    SignalTooShortError,
    TimelineError,
    UndefinedOverlapError,
)
from memory_sim.models import ProtocolTimeline, StorageResult, TimeGrid
from memory_sim.simulation_service import (
    RESULT_COLUMNS,
    StorageProtocolService,
    auto_time_grid,
    build_timeline,
    check_timeline,
    crossing_rabi,
    default_storage_time,
    echo_window,
    export_envelope,
    export_results,
    overlap_fidelity,
)
from pulse_kit.models import ControlPulse, PulseFamily, PulseKind, SignalTrainSpec
from pulse_kit.pulse_service import (
    chirped_pulse,
    design_pi_pulse,
    required_rabi_chirped,
)

TWO_PI = 2 * math.pi
PR_COMB = CombSpec(TWO_PI * 25e3, TWO_PI * 100e3, 40, 4)
BANDWIDTH = PR_COMB.bandwidth
CHIRP_SPAN = BANDWIDTH / 2
TAU_MODE = PR_COMB.mode_duration


def chirped(eta, chirp_product=15.7):
    omega = required_rabi_chirped(eta, CHIRP_SPAN, chirp_product / CHIRP_SPAN)
    return chirped_pulse(omega, BANDWIDTH, chirp_product)


@pytest.fixture(scope='module')
def train():
    return SignalTrainSpec(mode_count=1, mode_duration=TAU_MODE)


@pytest.fixture(scope='module')
def grid(train):
    return auto_time_grid(PR_COMB, train, storage_time=PR_COMB.echo_time)


@pytest.fixture(scope='module')
def profile(grid):
    return build_depth_profile(PR_COMB, grid.spectral_grid())


@pytest.fixture(scope='module')
def service():
    return StorageProtocolService()


@pytest.fixture(scope='module')
def pi_pulse():
    return design_pi_pulse(10 * BANDWIDTH)


@pytest.fixture(scope='module')
def pi_recall(service, profile, train, grid, pi_pulse):
    timeline = build_timeline(PR_COMB, train, pi_pulse)
    return service.recall_field(profile, train, grid, pi_pulse, pi_pulse, timeline)


@pytest.fixture(scope='module')
def chirped_recall(service, profile, train, grid):
    pulse = chirped(0.95)
    timeline = build_timeline(PR_COMB, train, pulse)
    return service.recall_field(profile, train, grid, pulse, pulse, timeline)


def test_auto_time_grid(grid, train):
    assert grid.sample_count == 8192
    assert grid.start == pytest.approx(-TAU_MODE)
    assert grid.duration >= 2 * PR_COMB.echo_time + 3 * TAU_MODE
    assert grid.satisfies_nyquist(BANDWIDTH)
    assert grid.spacing == pytest.approx(62.5e-9)


def test_echo_efficiency_and_time(service, profile, train, grid):
    echo = service.absorb_and_echo(profile, train, grid)
    assert echo.eta_echo == pytest.approx(0.25, abs=0.05)
    assert echo.echo_time_measured == pytest.approx(PR_COMB.echo_time, abs=0.15e-6)
    assert echo.window == pytest.approx((PR_COMB.echo_time - TAU_MODE, PR_COMB.echo_time + TAU_MODE))


def test_empty_comb_gives_no_echo(service, train, grid):
    empty = CombSpec(TWO_PI * 25e3, TWO_PI * 100e3, 40, 0)
    echo = service.absorb_and_echo(build_depth_profile(empty, grid.spectral_grid()), train, grid)
    assert echo.eta_echo < 1e-12
    np.testing.assert_allclose(echo.output, echo.signal, atol=1e-12)


def test_short_signal_is_rejected(service, profile, grid):
    with pytest.raises(SignalTooShortError):
        service.absorb_and_echo(profile, SignalTrainSpec(mode_count=1, mode_duration=0.1e-6), grid)


def test_long_train_makes_window_ambiguous(service, profile, grid):
    fits = SignalTrainSpec(mode_count=6, mode_duration=TAU_MODE)
    assert echo_window(PR_COMB, fits)[0] > fits.last_center + TAU_MODE / 2
    with pytest.raises(AmbiguousWindowError):
        service.absorb_and_echo(profile, SignalTrainSpec(mode_count=7, mode_duration=TAU_MODE), grid)


def test_profile_must_match_grid(service, train, grid):
    other = TimeGrid(start=grid.start, stop=grid.start + grid.duration / 2, sample_count=grid.sample_count // 2)
    with pytest.raises(GridError):
        service.absorb_and_echo(build_depth_profile(PR_COMB, grid.spectral_grid()), train, other)


def test_overlap_fidelity():
    grid = TimeGrid(start=0.0, stop=64e-6, sample_count=1024)
    times = grid.times
    signal = np.exp(-((times - 10e-6) ** 2) / (2 * 0.25e-6 ** 2)).astype(complex)
    delayed = -0.3 * np.exp(-((times - 20e-6) ** 2) / (2 * 0.25e-6 ** 2))
    assert overlap_fidelity(signal, delayed, 10e-6, grid) == pytest.approx(1.0, abs=1e-9)
    assert overlap_fidelity(signal, delayed, 9.9e-6, grid, max_shift=0.375e-6) == pytest.approx(1.0, abs=1e-6)
    assert overlap_fidelity(signal, delayed, 5e-6, grid) < 1e-6
    with pytest.raises(UndefinedOverlapError):
        overlap_fidelity(signal, np.zeros_like(signal), 10e-6, grid)
    with pytest.raises(GridError):
        overlap_fidelity(signal, delayed[:-1], 10e-6, grid)


def test_build_timeline(train, pi_pulse):
    timeline = build_timeline(PR_COMB, train, pi_pulse)
    assert timeline.t0_signal == 0.0
    assert timeline.t_control1 == pytest.approx(2 * train.sigma_t + pi_pulse.t_cut / 2)
    assert timeline.storage_time == pytest.approx(PR_COMB.echo_time)
    assert timeline.echo_offset(PR_COMB.echo_time) == pytest.approx(PR_COMB.echo_time - timeline.t_control1)


def test_default_storage_time_clears_long_gates(train):
    long_pulse = chirped_pulse(1e6, BANDWIDTH, 20)
    assert long_pulse.t_cut > PR_COMB.echo_time
    assert default_storage_time(PR_COMB, train, long_pulse) == pytest.approx(long_pulse.t_cut + TAU_MODE)


def test_check_timeline(train, pi_pulse):
    check_timeline(PR_COMB, train, pi_pulse, pi_pulse, build_timeline(PR_COMB, train, pi_pulse))
    cases = [
        ProtocolTimeline(t0_signal=1e-6, t_control1=1e-6, t_control2=11e-6),
        ProtocolTimeline(t0_signal=0.0, t_control1=0.3e-6, t_control2=10.3e-6),
        ProtocolTimeline(t0_signal=0.0, t_control1=9.5e-6, t_control2=19.5e-6),
        ProtocolTimeline(t0_signal=0.0, t_control1=1e-6, t_control2=1e-6 + 0.5 * pi_pulse.t_cut),
    ]
    for timeline in cases:
        with pytest.raises(TimelineError):
            check_timeline(PR_COMB, train, pi_pulse, pi_pulse, timeline)


def test_pi_pair_recall(pi_recall):
    result = pi_recall.result
    assert result.eta_sq >= 0.98
    assert result.eta_tot <= result.eta_echo * (1 + 1e-6)
    assert result.echo_time_measured == pytest.approx(2 * PR_COMB.echo_time, abs=TAU_MODE / 10)
    assert result.overlap > 0.95
    assert result.spectral_eta_sq == pytest.approx(result.eta_sq, abs=0.01)
    assert result.capacity_int == 6
    assert result.metadata['storage_time_s'] == pytest.approx(PR_COMB.echo_time)
    assert result.metadata['decimated'] is True


def test_chirped_pair_recall(chirped_recall):
    result = chirped_recall.result
    assert result.eta_sq == pytest.approx(0.90, abs=0.04)
    assert result.echo_time_measured == pytest.approx(2 * PR_COMB.echo_time, abs=TAU_MODE / 10)
    assert result.spectral_eta_sq == pytest.approx(result.eta_sq, abs=0.01)
    assert result.eta_tot <= result.eta_echo * (1 + 1e-6)
    assert 0 < result.leakage < 0.1 * result.eta_echo


def test_zero_rabi_recalls_nothing(service, profile, train, grid):
    dark = ControlPulse(kind=PulseKind.PI, omega_max=0.0, tau_c=10e-9)
    result = service.run_protocol(profile, train, grid, dark, dark, build_timeline(PR_COMB, train, dark))
    assert result.eta_tot == 0.0
    assert result.eta_sq == 0.0
    assert result.overlap == 0.0


def test_ideal_transfer_keeps_the_echo(service, profile, train, grid, pi_pulse):
    timeline = build_timeline(PR_COMB, train, pi_pulse)
    result = service.run_protocol(profile, train, grid, pi_pulse, pi_pulse, timeline, ideal_transfer=True)
    assert result.eta_tot == pytest.approx(result.eta_echo, rel=1e-6)
    assert result.eta_sq == pytest.approx(1.0, rel=1e-6)
    assert result.overlap > 0.95


def test_chirped_pulses_must_match(service, profile, train, grid):
    first, second = chirped(0.9, 2.0), chirped(0.95, 2.0)
    timeline = build_timeline(PR_COMB, train, first)
    with pytest.raises(PulseMismatchError):
        service.run_protocol(profile, train, grid, first, second, timeline)
    lenient = StorageProtocolService(allow_mismatched=True)
    result = lenient.run_protocol(profile, train, grid, first, second, timeline)
    assert 0 < result.eta_sq < 1


def test_modes_recall_independently(service, profile, grid, pi_pulse):
    train = SignalTrainSpec(mode_count=3, mode_duration=TAU_MODE, mode_amplitudes=(1, 0.5j, -0.8))
    timeline = build_timeline(PR_COMB, train, pi_pulse)
    report = service.store_modes_separately(profile, train, grid, pi_pulse, pi_pulse, timeline)
    assert report['relative_error'] <= 1e-6
    assert len(report['mode_efficiencies']) == 3
    # first and third modes differ only in amplitude
    ratio = report['mode_efficiencies'][2] / report['mode_efficiencies'][0]
    assert ratio == pytest.approx(0.64, rel=0.05)


def test_pi_pulses_lose_efficiency_to_area_errors(service, profile, train, grid, pi_pulse):
    report = service.robustness_check(profile, train, grid, pi_pulse, epsilon=0.1)
    assert report['predicted_drop'] == pytest.approx(0.005)
    assert 0.0025 <= report['drop'] <= 0.0075


def test_adiabatic_pulses_tolerate_area_errors(service, profile, train, grid):
    report = service.robustness_check(profile, train, grid, chirped(0.9999), epsilon=0.1)
    assert report['factor'] == pytest.approx(1 + 0.1 / math.pi)
    assert abs(report['drop']) < 1e-3


def test_weak_control_favours_long_chirps(service, profile, train, grid):
    omega = 0.3 * BANDWIDTH
    families = [
        PulseFamily(kind=PulseKind.PI),
        PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=2),
        PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=15.7),
    ]
    pi_row, short_row, long_row = [service.sweep_rabi(profile, train, grid, family, [omega])[0]
                                   for family in families]
    assert not (pi_row['error'] or short_row['error'] or long_row['error'])
    assert pi_row['family'] == 'pi'
    assert long_row['eta_sq'] > 0.95
    assert long_row['eta_sq'] > max(short_row['eta_sq'], pi_row['eta_sq'])
    # a weak pi-pulse filters the signal spectrum and reshapes the recalled mode
    assert long_row['overlap'] > 0.97
    assert pi_row['overlap'] < long_row['overlap'] - 0.03


def test_sweep_keeps_failed_points(service, profile, train, grid):
    family = PulseFamily(kind=PulseKind.PI)
    rows = service.sweep_rabi(profile, train, grid, family, [0.0, 10 * BANDWIDTH])
    assert rows[0]['error']
    assert rows[0]['monotone'] is False
    assert rows[1]['error'] == ''
    assert rows[1]['eta_sq'] >= 0.98
    assert [row['omega_rad_s'] for row in rows] == [0.0, 10 * BANDWIDTH]


@pytest.fixture(scope='module')
def pi_threshold(service, profile, train, grid):
    rows = service.sweep_rabi(profile, train, grid, PulseFamily(kind=PulseKind.PI),
                              np.linspace(0.4, 1.6, 13) * BANDWIDTH)
    return crossing_rabi(rows)


@pytest.mark.slow
def test_long_chirp_threshold(service, profile, train, grid, pi_threshold):
    family = PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=15.7)
    rows = service.sweep_rabi(profile, train, grid, family, np.linspace(0.1, 0.3, 9) * BANDWIDTH)
    assert all(row['monotone'] for row in rows)
    predicted = required_rabi_chirped(math.sqrt(0.9), CHIRP_SPAN, 15.7 / CHIRP_SPAN)
    crossing = crossing_rabi(rows)
    assert crossing == pytest.approx(predicted, rel=0.05)
    assert 2 <= pi_threshold / crossing <= 5


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason='pi/chirped Rabi ratio at Delta_max tau_c = 2 measures about 1.5: '
                                       'the Gaussian mode spectrum is narrower than the comb, which lowers '
                                       'the pi-pulse requirement')
def test_short_chirp_threshold(service, profile, train, grid, pi_threshold):
    family = PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=2)
    rows = service.sweep_rabi(profile, train, grid, family, np.linspace(0.3, 0.7, 9) * BANDWIDTH)
    assert 2 <= pi_threshold / crossing_rabi(rows) <= 5


@pytest.mark.slow
def test_strong_control_saturates(service, profile, train, grid):
    long_family = PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=15.7)
    long_rows = service.sweep_rabi(profile, train, grid, long_family, np.array([0.5, 1.0, 2.0]) * BANDWIDTH)
    assert not any(row['error'] for row in long_rows)
    assert min(row['eta_sq'] for row in long_rows) >= 0.98

    short_family = PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=2)
    short_row = service.sweep_rabi(profile, train, grid, short_family, [BANDWIDTH])[0]
    assert short_row['eta_sq'] >= 0.98

    pi_rows = service.sweep_rabi(profile, train, grid, PulseFamily(kind=PulseKind.PI),
                                 np.array([1.0, 3.0, 10.0]) * BANDWIDTH)
    assert all(row['monotone'] for row in pi_rows)
    assert pi_rows[-1]['eta_sq'] >= 0.98


def test_crossing_rabi():
    rows = [
        {'omega_rad_s': 3.0, 'eta_sq': 0.95, 'error': ''},
        {'omega_rad_s': 1.0, 'eta_sq': 0.5, 'error': ''},
        {'omega_rad_s': 2.0, 'eta_sq': 0.85, 'error': ''},
        {'omega_rad_s': 2.5, 'eta_sq': float('nan'), 'error': 'failed'},
    ]
    assert crossing_rabi(rows) == pytest.approx(2.5)
    assert math.isnan(crossing_rabi(rows, level=0.99))


def test_result_row_and_export(tmp_path, pi_recall, grid):
    row = pi_recall.result.to_row()
    assert set(RESULT_COLUMNS) <= set(row)
    assert 'metadata' not in row
    path = export_results([row], tmp_path / 'store.csv', config_sha='beef')
    lines = path.read_text().splitlines()
    assert lines[0] == '# config_sha256=beef'
    assert lines[1] == ','.join(RESULT_COLUMNS)

    envelope = export_envelope(grid, pi_recall.recalled, tmp_path / 'recall.csv')
    header = next(line for line in envelope.read_text().splitlines() if not line.startswith('#'))
    assert header == 't_s,re_E,im_E'


def test_storage_result_defaults():
    result = StorageResult(eta_echo=0.25, eta_sq=0.9, eta_tot=0.225, overlap=0.99,
                           echo_time_measured=20e-6, capacity_int=6)
    row = result.to_row()
    assert row['echo_time_s'] == 20e-6
    assert math.isnan(row['omega_rad_s'])

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from comb_model.models import CombSpec
from core.exceptions import (
    DesignError,
    DomainError,
    GridError,
    PulseTooShortError,
    UnreachableEfficiencyError,
    UnsupportedPulseKindError,
)
from memory_sim.models import TimeGrid
from pulse_kit.models import ControlPulse, PulseFamily, PulseKind, SignalTrainSpec
from pulse_kit.pulse_service import (
    adiabaticity_report,
    build_signal_train,
    chirped_pulse,
    demkov_kunike_transfer,
    design_chirped_pulse,
    design_pi_pulse,
    export_pulse_samples,
    family_prediction,
    family_pulse,
    gated_area_fraction,
    instantaneous_detuning,
    predicted_eta_chirped,
    predicted_eta_pi,
    pulse_area,
    rabi_envelope,
    required_rabi_chirped,
    required_rabi_pi,
    requirement_ratios,
    sample_pulse,
)

TWO_PI = 2 * math.pi
PR_BANDWIDTH = TWO_PI * 4e6
EU_BANDWIDTH = TWO_PI * 12e6


def test_sech_area_in_the_gate():
    # Omega * tau_c = 1 gives area pi without a gate
    pulse = ControlPulse(kind=PulseKind.PI, omega_max=1e6, tau_c=1e-6)
    assert pulse.t_cut == pytest.approx(7e-6)
    assert pulse_area(pulse) == pytest.approx(math.pi * gated_area_fraction(7), rel=1e-9)
    # the gate keeps about 96% of the area
    assert 1 - gated_area_fraction(7) == pytest.approx(0.0385, abs=0.001)
    assert gated_area_fraction(60) == pytest.approx(1.0, abs=1e-12)


def test_designed_pi_pulse_has_area_pi():
    pulse = design_pi_pulse(TWO_PI * 5e6)
    assert pulse.kind == PulseKind.PI
    assert pulse_area(pulse) == pytest.approx(math.pi, rel=1e-9)
    assert pulse.t_cut == pytest.approx(7 * pulse.tau_c)


def test_envelope_and_chirp():
    pulse = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=2.0, tau_c=1.0, chirp_span=3.0, center_time=10.0)
    edge = 1 / math.cosh(3.5)
    assert pulse.edge_level == pytest.approx(edge)
    assert rabi_envelope(pulse, 10.0) == pytest.approx(2.0)
    assert rabi_envelope(pulse, 10.0 + 3.4) == pytest.approx(2.0 * (1 / math.cosh(3.4) - edge) / (1 - edge))
    assert rabi_envelope(pulse, 10.0 + 3.5) == pytest.approx(0.0, abs=1e-12)
    assert rabi_envelope(pulse, 10.0 + 3.6) == 0.0
    assert instantaneous_detuning(pulse, 0.5, 10.0) == pytest.approx(0.5)
    assert instantaneous_detuning(pulse, 0.0, 12.0) == pytest.approx(3.0 * math.tanh(2.0))
    pi_pulse = ControlPulse(kind=PulseKind.PI, omega_max=2.0, tau_c=1.0)
    np.testing.assert_array_equal(pi_pulse.chirp(np.linspace(-3, 3, 5)), 0.0)


def test_pi_pulse_keeps_plain_sech_gate():
    pulse = ControlPulse(kind=PulseKind.PI, omega_max=2.0, tau_c=1.0)
    assert pulse.edge_level == 0.0
    assert rabi_envelope(pulse, 3.4) == pytest.approx(2.0 / math.cosh(3.4))


def test_chirped_area_accounts_for_taper():
    pulse = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=1e6, tau_c=1e-6, chirp_span=2e6)
    edge = 1 / math.cosh(3.5)
    expected = math.pi * (gated_area_fraction(7) - 7 * edge / math.pi) / (1 - edge)
    assert pulse_area(pulse) == pytest.approx(expected, rel=1e-9)


@given(st.floats(min_value=0.0, max_value=3.5), st.floats(min_value=2.0, max_value=30.0))
def test_envelope_symmetric_and_chirp_antisymmetric(s, chirp_product):
    pulse = chirped_pulse(1e6, PR_BANDWIDTH, chirp_product, center_time=4e-6)
    t = s * pulse.tau_c
    before, after = pulse.center_time - t, pulse.center_time + t
    assert rabi_envelope(pulse, before) == pytest.approx(rabi_envelope(pulse, after), rel=1e-12, abs=1e-9)
    assert instantaneous_detuning(pulse, 0.0, before) == pytest.approx(
        -instantaneous_detuning(pulse, 0.0, after), rel=1e-12, abs=1e-6)


def test_pulse_validation():
    with pytest.raises(DomainError):
        ControlPulse(kind=PulseKind.PI, omega_max=1.0, tau_c=1.0, chirp_span=1.0)
    with pytest.raises(DomainError):
        ControlPulse(kind='square', omega_max=1.0, tau_c=1.0)
    with pytest.raises(DomainError):
        ControlPulse(kind=PulseKind.PI, omega_max=-1.0, tau_c=1.0)
    with pytest.raises(DomainError):
        ControlPulse(kind=PulseKind.PI, omega_max=1.0, tau_c=0.0)
    with pytest.raises(DomainError):
        ControlPulse(kind=PulseKind.PI, omega_max=math.inf, tau_c=1.0)


def test_same_shape_ignores_position():
    pulse = chirped_pulse(1e6, PR_BANDWIDTH, 15.7)
    assert pulse.same_shape(pulse.moved_to(5e-6))
    assert not pulse.same_shape(pulse.scaled(1.01))
    assert not pulse.same_shape(chirped_pulse(1e6, PR_BANDWIDTH, 2))


@pytest.mark.parametrize('chirp_product, ratio', [(2, 0.85220), (15.7, 0.34320)])
def test_required_rabi_chirped(chirp_product, ratio):
    chirp_span = PR_BANDWIDTH / 2
    omega = required_rabi_chirped(0.95, chirp_span, chirp_product / chirp_span)
    assert omega / chirp_span == pytest.approx(ratio, rel=1e-4)


@given(st.floats(min_value=0.01, max_value=0.99), st.floats(min_value=2.0, max_value=30.0))
def test_chirped_requirement_inverts_prediction(eta, chirp_product):
    chirp_span = 1e7
    tau_c = chirp_product / chirp_span
    omega = required_rabi_chirped(eta, chirp_span, tau_c)
    assert predicted_eta_chirped(omega, chirp_span, tau_c) == pytest.approx(eta, abs=1e-9)


@given(st.floats(min_value=0.0, max_value=2e7), st.floats(min_value=0.0, max_value=2e7))
def test_chirped_prediction_monotone_in_rabi(omega_a, omega_b):
    low, high = sorted((omega_a, omega_b))
    assert predicted_eta_chirped(low, 1e7, 1.57e-6) <= predicted_eta_chirped(high, 1e7, 1.57e-6)


def test_required_rabi_chirped_errors():
    chirp_span = PR_BANDWIDTH / 2
    with pytest.raises(UnreachableEfficiencyError):
        required_rabi_chirped(1.0, chirp_span, 15.7 / chirp_span)
    with pytest.raises(DomainError):
        required_rabi_chirped(-0.1, chirp_span, 15.7 / chirp_span)
    with pytest.raises(PulseTooShortError):
        required_rabi_chirped(0.5, chirp_span, 1.5 / chirp_span)


def test_required_rabi_pi():
    assert required_rabi_pi(0.95, 1.0) == pytest.approx(3.4531, rel=1e-4)
    assert required_rabi_pi(0.5, 1.0) == pytest.approx(0.8911, rel=1e-4)
    assert predicted_eta_pi(required_rabi_pi(0.9, PR_BANDWIDTH), PR_BANDWIDTH) == pytest.approx(0.9)
    assert predicted_eta_pi(0.0, PR_BANDWIDTH) == 0.0
    with pytest.raises(UnreachableEfficiencyError):
        required_rabi_pi(1.0, PR_BANDWIDTH)
    with pytest.raises(DomainError):
        required_rabi_pi(0.0, PR_BANDWIDTH)


@given(st.floats(min_value=0.5, max_value=0.99))
def test_chirped_needs_less_rabi_than_pi(eta):
    chirp_span = PR_BANDWIDTH / 2
    chirped = required_rabi_chirped(eta, chirp_span, 2 / chirp_span)
    assert chirped < required_rabi_pi(eta, PR_BANDWIDTH)


@given(st.floats(min_value=0.3, max_value=0.95), st.floats(min_value=2.0, max_value=30.0),
       st.floats(min_value=1.01, max_value=3.0))
def test_chirped_requirement_decreases_with_duration(eta, chirp_product, stretch):
    chirp_span = PR_BANDWIDTH / 2
    tau_c = chirp_product / chirp_span
    assert required_rabi_chirped(eta, chirp_span, stretch * tau_c) < required_rabi_chirped(eta, chirp_span, tau_c)


@given(st.floats(min_value=0.05, max_value=0.99), st.floats(min_value=1e4, max_value=1e9),
       st.floats(min_value=0.1, max_value=100.0))
def test_pi_requirement_linear_in_bandwidth(eta, bandwidth, factor):
    assert required_rabi_pi(eta, factor * bandwidth) == pytest.approx(factor * required_rabi_pi(eta, bandwidth),
                                                                      rel=1e-12)


@given(st.floats(min_value=0.3, max_value=0.95), st.floats(min_value=0.1, max_value=5.0))
def test_designed_chirped_pulse_meets_adiabatic_criteria(eta, rabi_ratio):
    pulse = design_chirped_pulse(PR_BANDWIDTH, eta, rabi_ratio * PR_BANDWIDTH / 2)
    report = adiabaticity_report(pulse, PR_BANDWIDTH)
    assert report.covers_band
    assert report.duration_ok
    assert report.predicted_eta >= eta - 1e-5


def test_design_at_boundary_rabi_gives_minimum_duration():
    # 0.8522 Gamma/2 is just enough for eta = 0.95 at Delta_max tau_c = 2
    pulse = design_chirped_pulse(PR_BANDWIDTH, 0.95, 0.8522 * PR_BANDWIDTH / 2)
    assert pulse.tau_c == pytest.approx(4 / PR_BANDWIDTH, rel=1e-4)


def test_requirement_ratios_at_95_percent():
    ratios = requirement_ratios(0.95, PR_BANDWIDTH)
    assert ratios['rabi_ratio'] == pytest.approx(8.10, abs=0.01)
    assert ratios['intensity_ratio'] == pytest.approx(65.7, abs=0.2)
    assert ratios['duration_ratio'] == pytest.approx(13.8, abs=0.05)


def test_adiabaticity_report():
    pulse = chirped_pulse(required_rabi_chirped(0.95, PR_BANDWIDTH / 2, 15.7 / (PR_BANDWIDTH / 2)),
                          PR_BANDWIDTH, 15.7)
    report = adiabaticity_report(pulse, PR_BANDWIDTH)
    assert report.covers_band and report.duration_ok
    assert report.predicted_eta == pytest.approx(0.95)
    short = chirped_pulse(1e6, PR_BANDWIDTH, 1.0)
    assert not adiabaticity_report(short, PR_BANDWIDTH).duration_ok
    narrow = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=1e6, tau_c=1e-6, chirp_span=PR_BANDWIDTH / 4)
    assert not adiabaticity_report(narrow, PR_BANDWIDTH).covers_band
    with pytest.raises(UnsupportedPulseKindError):
        adiabaticity_report(design_pi_pulse(1e7), PR_BANDWIDTH)


def test_design_chirped_pulse_europium():
    eta = math.sqrt(0.8 / 0.9)
    tau_max = (50e-6 - 0.5e-6) / 7
    pulse = design_chirped_pulse(EU_BANDWIDTH, eta, TWO_PI * 1e6, tau_max=tau_max)
    assert pulse.tau_c == pytest.approx(1.728e-6, rel=2e-3)
    assert pulse.t_cut == pytest.approx(12.1e-6, rel=5e-3)
    assert predicted_eta_chirped(pulse.omega_max, pulse.chirp_span, pulse.tau_c) == pytest.approx(eta, abs=1e-5)

    fast = design_chirped_pulse(EU_BANDWIDTH, eta, TWO_PI * 5e6, tau_max=tau_max)
    assert fast.tau_c == pytest.approx(54e-9, rel=0.01)


def test_design_chirped_pulse_minimum_duration():
    pulse = design_chirped_pulse(PR_BANDWIDTH, 0.5, TWO_PI * 10e6)
    assert pulse.chirp_product == pytest.approx(2.0)


def test_design_chirped_pulse_errors():
    with pytest.raises(DesignError):
        design_chirped_pulse(EU_BANDWIDTH, 0.94, TWO_PI * 0.1e6, tau_max=7e-6)
    with pytest.raises(UnreachableEfficiencyError):
        design_chirped_pulse(EU_BANDWIDTH, 1.0, TWO_PI * 1e6)
    with pytest.raises(DomainError):
        design_chirped_pulse(EU_BANDWIDTH, 0.9, 0.0)


def test_design_without_duration_bound_doubles_until_reached():
    pulse = design_chirped_pulse(EU_BANDWIDTH, 0.9, TWO_PI * 0.3e6)
    assert predicted_eta_chirped(pulse.omega_max, pulse.chirp_span, pulse.tau_c) == pytest.approx(0.9, abs=1e-5)


def test_demkov_kunike_limits():
    # unchirped: Rosen-Zener sin^2(A/2) / cosh^2(pi Delta tau / 2)
    pulse = ControlPulse(kind=PulseKind.PI, omega_max=0.5e6, tau_c=1e-6)
    detuning = 0.3e6
    expected = math.sin(math.pi / 4) ** 2 / math.cosh(math.pi * detuning * 1e-6 / 2) ** 2
    assert demkov_kunike_transfer(pulse, detuning) == pytest.approx(expected, rel=1e-9)

    chirp_span = PR_BANDWIDTH / 2
    tau_c = 15.7 / chirp_span
    omega = required_rabi_chirped(0.95, chirp_span, tau_c)
    chirped = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=omega, tau_c=tau_c, chirp_span=chirp_span)
    assert demkov_kunike_transfer(chirped, 0.0) == pytest.approx(0.95, abs=1e-6)
    # atoms at the band edge see only half a sweep
    assert demkov_kunike_transfer(chirped, chirp_span) == pytest.approx(0.475, abs=1e-3)
    far = demkov_kunike_transfer(chirped, np.array([-5 * chirp_span, 5 * chirp_span]))
    assert np.all(far < 1e-6)


def test_strong_pulse_has_no_overflow():
    chirp_span = EU_BANDWIDTH / 2
    pulse = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=2 * chirp_span, tau_c=300 / chirp_span,
                         chirp_span=chirp_span)
    value = demkov_kunike_transfer(pulse, 0.1 * chirp_span)
    assert math.isfinite(value)
    assert 0.0 <= value <= 1.0


def test_signal_train():
    grid = TimeGrid(start=-2e-6, stop=14e-6, sample_count=4096)
    train = SignalTrainSpec(mode_count=3, mode_duration=1.5e-6, mode_amplitudes=(1, 0.5j, -0.8))
    envelope = build_signal_train(train, grid)
    times = grid.times
    for center, amplitude in zip(train.mode_centers, train.mode_amplitudes):
        index = int(np.argmin(np.abs(times - center)))
        assert envelope[index] == pytest.approx(amplitude, abs=1e-3)
    assert train.sigma_t == pytest.approx(0.25e-6)
    assert train.bandwidth == pytest.approx(6 / 1.5e-6)
    assert train.single_mode(1).mode_amplitudes == (0j, 0.5j, 0j)


def test_signal_train_carrier_and_bounds():
    grid = TimeGrid(start=-2e-6, stop=14e-6, sample_count=4096)
    detuned = SignalTrainSpec(mode_count=1, mode_duration=1.5e-6, carrier_detuning=1e6)
    envelope = build_signal_train(detuned, grid)
    plain = build_signal_train(SignalTrainSpec(mode_count=1, mode_duration=1.5e-6), grid)
    np.testing.assert_allclose(np.abs(envelope), np.abs(plain))
    with pytest.raises(GridError):
        build_signal_train(SignalTrainSpec(mode_count=1, mode_duration=1.5e-6, first_center=13.5e-6), grid)
    with pytest.raises(DomainError):
        SignalTrainSpec(mode_count=2, mode_duration=1.5e-6, mode_amplitudes=(1,))


def test_families():
    pi_family = PulseFamily(kind=PulseKind.PI)
    chirped_family = PulseFamily(kind=PulseKind.ALLEN_EBERLY, chirp_product=15.7)
    assert pi_family.label == 'pi'
    assert chirped_family.label == 'allen_eberly_bt15.7'
    pulse = family_pulse(chirped_family, 1e6, PR_BANDWIDTH)
    assert pulse.chirp_product == pytest.approx(15.7)
    assert family_prediction(pi_family, 1e7, PR_BANDWIDTH) == pytest.approx(predicted_eta_pi(1e7, PR_BANDWIDTH))
    assert pulse_area(family_pulse(pi_family, 1e7, PR_BANDWIDTH)) == pytest.approx(math.pi)
    with pytest.raises(DomainError):
        PulseFamily(kind=PulseKind.ALLEN_EBERLY)


def test_pulse_samples(tmp_path):
    pulse = chirped_pulse(1e6, PR_BANDWIDTH, 2)
    samples = sample_pulse(pulse, samples=101)
    assert samples['t_s'][0] == pytest.approx(pulse.gate_start)
    assert samples['t_s'][-1] == pytest.approx(pulse.gate_end)
    assert samples['omega_rad_s'][50] == pytest.approx(1e6)
    assert samples['detuning_rad_s'][-1] == pytest.approx(pulse.chirp_span * math.tanh(3.5))

    path = export_pulse_samples(pulse, tmp_path / 'pulse.csv', samples=101, config_sha='abc')
    lines = path.read_text().splitlines()
    assert lines[0] == '# config_sha256=abc'
    assert 't_s,omega_rad_s,detuning_rad_s' in lines
    assert len([line for line in lines if not line.startswith('#')]) == 102


def test_capacity_chain_single_mode_rabi():
    # longest chirped pulse that leaves one Eu mode
    spec = CombSpec(TWO_PI * 2e3, TWO_PI * 20e3, 600, 40)
    tau_max = (spec.echo_time - spec.mode_duration) / 7
    omega = required_rabi_chirped(math.sqrt(0.8 / 0.9), spec.bandwidth / 2, tau_max)
    assert omega / TWO_PI == pytest.approx(0.496e6, rel=0.01)

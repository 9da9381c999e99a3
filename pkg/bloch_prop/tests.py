import math

import numpy as np
import pytest

from bloch_prop.models import Propagator
from bloch_prop.propagator_service import (
    export_transfer_profile,
    propagate_batch,
    propagate_numeric,
    propagate_square,
    propagator_adiabatic_analytic,
    propagator_pi_analytic,
    transfer_profile,
)
from core.exceptions import DegenerateCrossingError, DomainError, NumericError, UnsupportedPulseKindError
from pulse_kit.models import ControlPulse, PulseKind
from pulse_kit.pulse_service import chirped_pulse, design_pi_pulse, required_rabi_chirped

BANDWIDTH = 2 * math.pi * 4e6
CHIRP_SPAN = BANDWIDTH / 2


def adiabatic_pulse(eta=0.9999, chirp_product=15.7):
    omega = required_rabi_chirped(eta, CHIRP_SPAN, chirp_product / CHIRP_SPAN)
    return chirped_pulse(omega, BANDWIDTH, chirp_product)


def test_pi_analytic_forms():
    np.testing.assert_allclose(propagator_pi_analytic(0.0).matrix, np.eye(2), atol=1e-15)
    swap = propagator_pi_analytic(math.pi)
    assert abs(swap.u_ss) < 1e-15 and abs(swap.u_ee) < 1e-15
    assert swap.u_se == pytest.approx(1j)
    half = propagator_pi_analytic(math.pi / 2).matrix
    np.testing.assert_allclose(np.abs(half), 1 / math.sqrt(2))


def test_square_pulse_matches_analytic():
    omega = 2 * math.pi * 1e6
    numeric = propagate_square(omega, math.pi / omega, tol=1e-9)
    np.testing.assert_allclose(numeric.matrix, propagator_pi_analytic(math.pi).matrix, atol=1e-8)
    quarter = propagate_square(omega, 0.5 * math.pi / omega, tol=1e-9)
    np.testing.assert_allclose(quarter.matrix, propagator_pi_analytic(math.pi / 2).matrix, atol=1e-8)


def test_free_evolution():
    detuning, duration = 3e6, 2e-6
    propagator = propagate_square(0.0, duration, atom_detuning=detuning, tol=1e-10)
    expected = np.diag([1.0, np.exp(-1j * detuning * duration)])
    np.testing.assert_allclose(propagator.matrix, expected, atol=1e-8)


@pytest.mark.parametrize('atom_detuning', [0.0, 0.4 * CHIRP_SPAN, -1.3 * CHIRP_SPAN])
def test_numeric_propagator_is_unitary(atom_detuning):
    propagator = propagate_numeric(adiabatic_pulse(0.95), atom_detuning, tol=1e-9)
    assert propagator.unitarity_error() <= 1e-8


def test_chirped_resonant_transfer():
    propagator = propagate_numeric(adiabatic_pulse(0.95), 0.0)
    assert propagator.transfer_probability() == pytest.approx(0.95, abs=0.02)


@pytest.mark.parametrize('chirp_product', [2.0, 15.7])
@pytest.mark.parametrize('eta', [0.5, 0.7, 0.9, 0.95, 0.99])
def test_numeric_transfer_follows_prediction(eta, chirp_product):
    pulse = adiabatic_pulse(eta, chirp_product)
    assert propagate_numeric(pulse, 0.0).transfer_probability() == pytest.approx(eta, abs=0.05)


@pytest.mark.parametrize('atom_detuning', [0.0, 0.3 * CHIRP_SPAN, -0.3 * CHIRP_SPAN])
def test_adiabatic_analytic_matches_numeric(atom_detuning):
    pulse = adiabatic_pulse()
    analytic = propagator_adiabatic_analytic(pulse, atom_detuning)
    numeric = propagate_numeric(pulse, atom_detuning)
    assert analytic.unitarity_error() < 1e-9
    np.testing.assert_allclose(analytic.matrix, numeric.matrix, atol=0.02)


def test_adiabatic_full_swap():
    analytic = propagator_adiabatic_analytic(adiabatic_pulse(), 0.0)
    assert analytic.transfer_probability() > 0.995
    assert abs(analytic.u_ss) < 0.07


def test_adiabatic_without_crossing_keeps_populations():
    pulse = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=1e-3 * CHIRP_SPAN,
                         tau_c=15.7 / CHIRP_SPAN, chirp_span=CHIRP_SPAN)
    analytic = propagator_adiabatic_analytic(pulse, 1.5 * CHIRP_SPAN)
    assert abs(analytic.u_ss) == pytest.approx(1.0, abs=1e-6)
    assert abs(analytic.u_se) < 1e-3


def test_analytic_errors():
    with pytest.raises(UnsupportedPulseKindError):
        propagator_adiabatic_analytic(design_pi_pulse(1e7), 0.0)
    uncoupled = ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=0.0, tau_c=1e-6, chirp_span=1e7)
    with pytest.raises(DegenerateCrossingError):
        propagator_adiabatic_analytic(uncoupled, 0.0)


def test_numeric_errors():
    pulse = adiabatic_pulse(0.95)
    with pytest.raises(DomainError):
        propagate_numeric(pulse, 0.0, tol=1e-3)
    with pytest.raises(DomainError):
        propagate_numeric(pulse, 0.0, tol=1e-13)
    with pytest.raises(NumericError):
        propagate_numeric(pulse, math.nan)
    with pytest.raises(NumericError):
        propagate_batch(pulse, [0.0, math.inf])


def test_batch_matches_single_solves():
    pulse = adiabatic_pulse(0.95)
    detunings = [-0.5 * CHIRP_SPAN, 0.0, 0.7 * CHIRP_SPAN]
    batch = propagate_batch(pulse, detunings)
    for matrix, detuning in zip(batch, detunings):
        np.testing.assert_allclose(matrix, propagate_numeric(pulse, detuning).matrix, atol=1e-7)


def test_pi_pair_transfers_whole_band():
    pulse = design_pi_pulse(10 * BANDWIDTH)
    detunings = np.linspace(-BANDWIDTH / 2, BANDWIDTH / 2, 41)
    profile = transfer_profile(pulse, pulse, detunings)
    assert np.all(np.abs(profile.t_double) ** 2 >= 0.97)
    assert profile.t_double[20] == pytest.approx(-1.0, abs=1e-6)
    assert not profile.decimated


def test_chirped_pair_efficiency():
    pulse = adiabatic_pulse(0.95)
    profile = transfer_profile(pulse, pulse, [0.0])
    assert abs(profile.t_double[0]) ** 2 == pytest.approx(0.9025, abs=0.02)
    assert profile.double_window == pytest.approx(pulse.t_cut)


def test_chirped_pair_square_band():
    pulse = adiabatic_pulse()
    detunings = np.linspace(-1.5 * CHIRP_SPAN, 1.5 * CHIRP_SPAN, 301)
    profile = transfer_profile(pulse, pulse, detunings)
    efficiency = np.abs(profile.t_double) ** 2
    assert np.all(np.abs(profile.t_double) <= 1 + 1e-9)
    above = detunings[efficiency >= 0.5 * efficiency.max()]
    assert (above.max() - above.min()) / (2 * CHIRP_SPAN) == pytest.approx(1.0, abs=0.1)
    assert efficiency[np.abs(detunings) <= 0.6 * CHIRP_SPAN].min() > 0.99


def test_strong_chirped_pair_keeps_full_transfer():
    # Omega_max = 4 Delta_max; the tapered gate edge keeps the switch-on adiabatic
    pulse = chirped_pulse(4 * CHIRP_SPAN, BANDWIDTH, 15.7)
    assert pulse.omega_max * float(pulse.envelope(pulse.gate_end)) == pytest.approx(0.0, abs=1e-6)
    detunings = np.linspace(-0.3 * CHIRP_SPAN, 0.3 * CHIRP_SPAN, 13)
    profile = transfer_profile(pulse, pulse, detunings)
    assert np.min(np.abs(profile.t_double) ** 2) >= 0.98


def test_chirped_pair_phase_is_linear():
    pulse = adiabatic_pulse()
    detunings = np.linspace(-0.6 * CHIRP_SPAN, 0.6 * CHIRP_SPAN, 61)
    profile = transfer_profile(pulse, pulse, detunings)
    corrected = profile.t_double * np.exp(1j * detunings * profile.double_window)
    deviation = np.angle(corrected / corrected[30])
    assert np.max(np.abs(deviation)) < 0.05
    # full transfer behaves like -exp(-i Delta_j T_w)
    assert corrected[30] == pytest.approx(-1.0, abs=0.02)


def test_different_pulses_are_solved_separately():
    first = adiabatic_pulse()
    second = adiabatic_pulse(0.95)
    profile = transfer_profile(first, second, [0.0])
    assert abs(profile.t1[0]) ** 2 == pytest.approx(propagate_numeric(first, 0.0).transfer_probability(), abs=1e-9)
    assert abs(profile.t2[0]) ** 2 == pytest.approx(0.95, abs=0.02)
    assert profile.window1 == first.t_cut
    assert profile.window2 == second.t_cut


def test_decimated_profile_matches_exact(settings):
    settings.AFC_SIMULATION = {**settings.AFC_SIMULATION, 'DECIMATION_THRESHOLD': 64, 'DECIMATION_STRIDE': 4}
    pulse = adiabatic_pulse()
    detunings = np.linspace(-0.8 * CHIRP_SPAN, 0.8 * CHIRP_SPAN, 257)
    decimated = transfer_profile(pulse, pulse, detunings)
    exact = transfer_profile(pulse, pulse, detunings, decimate=False)
    assert decimated.decimated and not exact.decimated
    np.testing.assert_allclose(decimated.t_double, exact.t_double, atol=5e-3)
    assert np.all(np.abs(decimated.t_double) <= 1 + 1e-9)


def test_propagator_from_matrix():
    propagator = Propagator.from_matrix([[0, 1j], [1j, 0]])
    assert propagator.transfer_probability() == pytest.approx(1.0)
    assert propagator.unitarity_error() == pytest.approx(0.0)


def test_export_transfer_profile(tmp_path):
    pulse = design_pi_pulse(10 * BANDWIDTH)
    profile = transfer_profile(pulse, pulse, np.linspace(-1e6, 1e6, 5))
    lines = export_transfer_profile(profile, tmp_path / 'transfer.csv', config_sha='c0').read_text().splitlines()
    header = next(line for line in lines if not line.startswith('#'))
    assert header == 'detuning_rad_s,re_t1,im_t1,re_t2,im_t2,re_tdouble,im_tdouble'
    assert '# decimated=False' in lines

"""
Control pulse families and their design formulas.

Chirped (Allen-Eberly) pulses: Omega(t) = Omega_max sech(t/tau_c),
Delta(t) = Delta_max tanh(t/tau_c) + Delta_j. Adiabatic criteria:
2 Delta_max >= Gamma, Delta_max tau_c >= 2, and the resonant efficiency
eta = 1 - exp(pi Delta_max tau_c (sqrt(1 - (Omega/Delta_max)^2) - 1)).
Sech pi-pulses need Omega_max ~ (pi/4) Gamma / arcsech(sqrt(eta)) to reach eta
over the whole band.
"""
import logging
import math
from typing import Dict, Optional

import numpy as np
from django.conf import settings
from scipy.integrate import quad
from scipy.optimize import brentq

from core.csv_export import write_columns
from core.exceptions import (
    DesignError,
    DomainError,
    GridError,
    PulseTooShortError,
    UnreachableEfficiencyError,
    UnsupportedPulseKindError,
)
from memory_sim.models import TimeGrid
from .models import AdiabaticityReport, ControlPulse, PulseFamily, PulseKind, SignalTrainSpec

logger = logging.getLogger(__name__)

DESIGN_RTOL = 1e-6
# doubling cap for the duration search when no comb bounds tau_c
MAX_DURATION_DOUBLINGS = 60


def _gate_factor(gate_factor: Optional[float]) -> float:
    return gate_factor or settings.AFC_SIMULATION['GATE_FACTOR']


def rabi_envelope(pulse: ControlPulse, t):
    """Omega_c(t) in rad/s, zero outside the gate"""
    value = pulse.omega_max * pulse.envelope(t)
    return float(value) if np.ndim(value) == 0 else value


def instantaneous_detuning(pulse: ControlPulse, atom_detuning, t):
    """Delta_j(t) = Delta_max f(t) + Delta_j"""
    value = pulse.chirp_span * pulse.chirp(t) + atom_detuning
    return float(value) if np.ndim(value) == 0 else value


def gated_area_fraction(gate_factor: float) -> float:
    """Fraction of the sech area kept inside a gate of gate_factor * tau_c"""
    return 4.0 / math.pi * math.atan(math.tanh(gate_factor / 4.0))


def pulse_area(pulse: ControlPulse) -> float:
    """Numerical area of the gated envelope, radians"""
    if pulse.omega_max == 0:
        return 0.0
    half = pulse.t_cut / (2 * pulse.tau_c)
    integral, _ = quad(pulse.shape, -half, half, epsabs=0.0, epsrel=1e-12, limit=200)
    return pulse.omega_max * pulse.tau_c * integral


def predicted_eta_chirped(omega_max: float, chirp_span: float, tau_c: float) -> float:
    """Resonant transfer efficiency from the adiabatic criterion"""
    if chirp_span <= 0:
        return 0.0
    ratio = omega_max / chirp_span
    if ratio > 1:
        return 1.0
    exponent = math.pi * chirp_span * tau_c * (math.sqrt(1 - ratio ** 2) - 1)
    return -math.expm1(exponent)


def adiabaticity_report(pulse: ControlPulse, bandwidth: float) -> AdiabaticityReport:
    if pulse.kind != PulseKind.ALLEN_EBERLY:
        raise UnsupportedPulseKindError(f"Adiabaticity criteria apply to chirped pulses, got '{pulse.kind}'")
    return AdiabaticityReport(
        covers_band=2 * pulse.chirp_span >= bandwidth,
        duration_ok=pulse.chirp_product >= settings.AFC_SIMULATION['MIN_CHIRP_PRODUCT'] * (1 - 1e-12),
        predicted_eta=predicted_eta_chirped(pulse.omega_max, pulse.chirp_span, pulse.tau_c),
    )


def required_rabi_chirped(eta: float, chirp_span: float, tau_c: float) -> float:
    """Omega_max reaching resonant efficiency eta (natural logarithm)"""
    if eta >= 1:
        raise UnreachableEfficiencyError(f"Efficiency {eta} is not reachable")
    if eta < 0:
        raise DomainError(f"Efficiency must be >= 0, got {eta}")
    product = chirp_span * tau_c
    if product < settings.AFC_SIMULATION['MIN_CHIRP_PRODUCT'] * (1 - 1e-12):
        raise PulseTooShortError(f"Delta_max * tau_c = {product:.4g} is below the adiabatic minimum")
    inner = math.log1p(-eta) / (math.pi * product) + 1
    if not 0 <= inner <= 1:
        raise PulseTooShortError(
            f"eta = {eta} is unreachable at Delta_max * tau_c = {product:.4g}"
        )
    return chirp_span * math.sqrt(1 - inner ** 2)


def _arcsech(x: float) -> float:
    return math.log(1 / x + math.sqrt(1 / x ** 2 - 1))


def required_rabi_pi(eta: float, bandwidth: float) -> float:
    """Sech pi-pulse Rabi frequency transferring at least eta over the band"""
    if eta >= 1:
        raise UnreachableEfficiencyError(f"Efficiency {eta} is not reachable with a pi-pulse")
    if eta <= 0:
        raise DomainError(f"Efficiency must be > 0, got {eta}")
    return math.pi / 4 * bandwidth / _arcsech(math.sqrt(eta))


def predicted_eta_pi(omega_max: float, bandwidth: float) -> float:
    """Band-edge efficiency of a sech pi-pulse, sech^2(pi Gamma / (4 Omega))"""
    if omega_max <= 0:
        return 0.0
    return 1.0 / math.cosh(min(math.pi * bandwidth / (4 * omega_max), 700.0)) ** 2


def design_chirped_pulse(bandwidth: float, eta_target: float, omega_available: float,
                         tau_max: Optional[float] = None, gate_factor: Optional[float] = None,
                         center_time: float = 0.0) -> ControlPulse:
    """
    Shortest Allen-Eberly pulse reaching eta_target at omega_available.

    Delta_max = Gamma/2, tau_c >= 4/Gamma, T_cut = gate_factor * tau_c. When
    tau_max is given (longest duration leaving one storable mode) the search
    stops there.
    """
    if eta_target >= 1:
        raise UnreachableEfficiencyError(f"Target efficiency {eta_target} is not reachable")
    if eta_target <= 0:
        raise DomainError(f"Target efficiency must be > 0, got {eta_target}")
    if omega_available <= 0:
        raise DomainError(f"Available Rabi frequency must be > 0, got {omega_available}")

    chirp_span = bandwidth / 2
    tau_min = settings.AFC_SIMULATION['MIN_CHIRP_PRODUCT'] / chirp_span

    def shortfall(tau):
        return predicted_eta_chirped(omega_available, chirp_span, tau) - eta_target

    if shortfall(tau_min) >= 0:
        tau_c = tau_min
    else:
        if tau_max is not None:
            tau_hi = tau_max
            if tau_hi <= tau_min or shortfall(tau_hi) < 0:
                raise DesignError(
                    f"eta = {eta_target} needs longer pulses than tau_max = {tau_max:.4g} s "
                    f"at Omega = {omega_available:.4g} rad/s"
                )
        else:
            tau_hi = 2 * tau_min
            for _ in range(MAX_DURATION_DOUBLINGS):
                if shortfall(tau_hi) >= 0:
                    break
                tau_hi *= 2
            else:
                raise DesignError(f"No duration reaches eta = {eta_target} at Omega = {omega_available:.4g} rad/s")
        tau_c = brentq(shortfall, tau_min, tau_hi, rtol=DESIGN_RTOL, xtol=tau_min * 1e-12)

    pulse = ControlPulse(
        kind=PulseKind.ALLEN_EBERLY,
        omega_max=omega_available,
        tau_c=tau_c,
        chirp_span=chirp_span,
        t_cut=_gate_factor(gate_factor) * tau_c,
        center_time=center_time,
    )
    logger.info(
        f"Designed chirped pulse: tau_c={tau_c:.6g} s, T_cut={pulse.t_cut:.6g} s, "
        f"Delta_max*tau_c={pulse.chirp_product:.4g}"
    )
    return pulse


def design_pi_pulse(omega_max: float, gate_factor: Optional[float] = None,
                    center_time: float = 0.0) -> ControlPulse:
    """Sech pulse whose gated area is exactly pi"""
    if omega_max <= 0:
        raise DomainError(f"Rabi frequency must be > 0, got {omega_max}")
    factor = _gate_factor(gate_factor)
    tau_c = 1.0 / (omega_max * gated_area_fraction(factor))
    return ControlPulse(kind=PulseKind.PI, omega_max=omega_max, tau_c=tau_c,
                        t_cut=factor * tau_c, center_time=center_time)


def chirped_pulse(omega_max: float, bandwidth: float, chirp_product: float,
                  gate_factor: Optional[float] = None, center_time: float = 0.0) -> ControlPulse:
    """Allen-Eberly pulse with Delta_max = Gamma/2 and a fixed Delta_max * tau_c"""
    chirp_span = bandwidth / 2
    tau_c = chirp_product / chirp_span
    return ControlPulse(kind=PulseKind.ALLEN_EBERLY, omega_max=omega_max, tau_c=tau_c,
                        chirp_span=chirp_span, t_cut=_gate_factor(gate_factor) * tau_c,
                        center_time=center_time)


def family_pulse(family: PulseFamily, omega_max: float, bandwidth: float, center_time: float = 0.0) -> ControlPulse:
    """Member of a sweep family at the given Rabi frequency"""
    if family.kind == PulseKind.PI:
        return design_pi_pulse(omega_max, family.gate_factor, center_time)
    return chirped_pulse(omega_max, bandwidth, family.chirp_product, family.gate_factor, center_time)


def family_prediction(family: PulseFamily, omega_max: float, bandwidth: float) -> float:
    """Single-pass efficiency predicted by the closed-form criterion of the family"""
    if family.kind == PulseKind.PI:
        return predicted_eta_pi(omega_max, bandwidth)
    chirp_span = bandwidth / 2
    return predicted_eta_chirped(omega_max, chirp_span, family.chirp_product / chirp_span)


def _scaled_cosh(x, shift):
    return 0.5 * (np.exp(x - shift) + np.exp(-x - shift))


def demkov_kunike_transfer(pulse: ControlPulse, atom_detuning):
    """
    Exact e->s probability of the ungated sech/tanh pulse.

    P = [cosh(pi B tau) - cosh(pi tau sqrt(B^2 - Omega^2))] / [cosh(pi B tau) + cosh(pi Delta_j tau)]
    which reduces to Rosen-Zener sin^2(A/2)/cosh^2(pi Delta_j tau/2) for B = 0.
    """
    detuning = np.abs(np.asarray(atom_detuning, dtype=float))
    a = math.pi * pulse.chirp_span * pulse.tau_c
    c = math.pi * detuning * pulse.tau_c
    radicand = pulse.chirp_span ** 2 - pulse.omega_max ** 2
    b = math.pi * pulse.tau_c * math.sqrt(abs(radicand))
    shift = np.maximum(max(a, b if radicand >= 0 else 0.0), c)
    if radicand >= 0:
        cosh_b = _scaled_cosh(b, shift)
    else:
        cosh_b = math.cos(b) * np.exp(-shift)
    probability = (_scaled_cosh(a, shift) - cosh_b) / (_scaled_cosh(a, shift) + _scaled_cosh(c, shift))
    return float(probability) if np.ndim(probability) == 0 else probability


def requirement_ratios(eta: float, bandwidth: float) -> Dict[str, float]:
    """pi-pulse versus minimal-duration chirped pulse at the same efficiency"""
    omega_pi = required_rabi_pi(eta, bandwidth)
    chirp_span = bandwidth / 2
    tau_chirped = settings.AFC_SIMULATION['MIN_CHIRP_PRODUCT'] / chirp_span
    omega_chirped = required_rabi_chirped(eta, chirp_span, tau_chirped)
    tau_pi = 1.0 / omega_pi
    return {
        'eta': eta,
        'omega_pi': omega_pi,
        'omega_chirped': omega_chirped,
        'rabi_ratio': omega_pi / omega_chirped,
        'intensity_ratio': (omega_pi / omega_chirped) ** 2,
        'duration_ratio': tau_chirped / tau_pi,
    }


def build_signal_train(spec: SignalTrainSpec, grid: TimeGrid) -> np.ndarray:
    """Complex envelope: sum of unit-peak Gaussians, sigma_t = tau_mode/6"""
    half = spec.mode_duration / 2
    if spec.first_center - half < grid.start or spec.last_center + half > grid.stop:
        raise GridError(
            f"Signal modes [{spec.first_center - half:.6g}, {spec.last_center + half:.6g}] s "
            f"leave the time grid [{grid.start:.6g}, {grid.stop:.6g}) s"
        )
    t = grid.times
    envelope = np.zeros(grid.sample_count, dtype=complex)
    for center, amplitude in zip(spec.mode_centers, spec.mode_amplitudes):
        envelope += amplitude * np.exp(-((t - center) ** 2) / (2 * spec.sigma_t ** 2))
    if spec.carrier_detuning:
        envelope *= np.exp(-1j * spec.carrier_detuning * t)
    return envelope


def sample_pulse(pulse: ControlPulse, samples: int = 2048, atom_detuning: float = 0.0) -> Dict[str, np.ndarray]:
    t = np.linspace(pulse.gate_start, pulse.gate_end, samples)
    return {
        't_s': t,
        'omega_rad_s': rabi_envelope(pulse, t),
        'detuning_rad_s': instantaneous_detuning(pulse, atom_detuning, t),
    }


def export_pulse_samples(pulse: ControlPulse, path, samples: int = 2048, config_sha: Optional[str] = None):
    return write_columns(
        path,
        sample_pulse(pulse, samples),
        config_sha=config_sha,
        metadata={
            'kind': pulse.kind,
            'tau_c_s': pulse.tau_c,
            't_cut_s': pulse.t_cut,
            'area_rad': pulse_area(pulse),
        },
    )

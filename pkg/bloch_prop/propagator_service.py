"""
Two-level propagators for one atom under a control pulse.

Rotating frame, basis (s, e):
    H(t) = [[0, -Omega(t)/2], [-Omega(t)/2, Delta_j(t)]]
Time is integrated in units of tau_c, s = (t - center)/tau_c, over the gate.
"""
import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from django.conf import settings
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from core.csv_export import write_columns
from core.exceptions import DegenerateCrossingError, DomainError, NumericError, UnsupportedPulseKindError
from core.workers import ordered_map
from pulse_kit.models import ControlPulse, PulseKind
from .models import Propagator, TransferProfile

logger = logging.getLogger(__name__)

MIN_TOL = 1e-12
MAX_TOL = 1e-4


def _sim_setting(name):
    return settings.AFC_SIMULATION[name]


def _check_tol(tol: Optional[float]) -> float:
    tol = _sim_setting('TOLERANCE') if tol is None else tol
    if not MIN_TOL <= tol <= MAX_TOL:
        raise DomainError(f"Integrator tolerance {tol} outside [{MIN_TOL}, {MAX_TOL}]")
    return tol


def _integrate(omega_of_s: Callable, chirp_of_s: Callable, half_width: float, time_unit: float,
               detunings: np.ndarray, tol: float) -> np.ndarray:
    """
    Integrate dU/ds = -i tau H U for every detuning at once.

    Returns an (M, 2, 2) array of window propagators.
    """
    detunings = np.asarray(detunings, dtype=float)
    if not (np.all(np.isfinite(detunings)) and math.isfinite(half_width) and math.isfinite(time_unit)):
        raise NumericError("Non-finite detuning or pulse timing")
    m = detunings.size
    scaled_detunings = detunings * time_unit

    def rhs(s, y):
        a1, b1, a2, b2 = y.reshape(4, m)
        half_rabi = 0.5j * omega_of_s(s)
        delta = scaled_detunings + chirp_of_s(s)
        return np.concatenate((
            half_rabi * b1,
            half_rabi * a1 - 1j * delta * b1,
            half_rabi * b2,
            half_rabi * a2 - 1j * delta * b2,
        ))

    y0 = np.concatenate((np.ones(m), np.zeros(m), np.zeros(m), np.ones(m))).astype(complex)
    solution = solve_ivp(
        rhs,
        (-half_width, half_width),
        y0,
        method='DOP853',
        rtol=tol,
        atol=tol * 1e-3,
        max_step=_sim_setting('MAX_STEP_FRACTION'),
    )
    if not solution.success:
        raise NumericError(f"Propagator integration failed: {solution.message}")
    a1, b1, a2, b2 = solution.y[:, -1].reshape(4, m)
    if not np.all(np.isfinite(solution.y[:, -1])):
        raise NumericError("Propagator integration produced non-finite amplitudes")
    return np.stack((np.stack((a1, a2), axis=-1), np.stack((b1, b2), axis=-1)), axis=1)


def propagate_batch(pulse: ControlPulse, detunings: Sequence[float], tol: Optional[float] = None) -> np.ndarray:
    """Window propagators of `pulse` for an array of atom detunings, shape (M, 2, 2)"""
    tol = _check_tol(tol)
    tau = pulse.tau_c
    edge = pulse.edge_level
    rabi = pulse.omega_max * tau / (1.0 - edge)
    chirp = pulse.chirp_span * tau if pulse.kind == PulseKind.ALLEN_EBERLY else 0.0
    return _integrate(
        lambda s: rabi * (1.0 / math.cosh(s) - edge),
        lambda s: chirp * math.tanh(s),
        pulse.t_cut / (2 * tau),
        tau,
        np.atleast_1d(detunings),
        tol,
    )


def propagate_numeric(pulse: ControlPulse, atom_detuning: float, tol: Optional[float] = None) -> Propagator:
    return Propagator.from_matrix(propagate_batch(pulse, [atom_detuning], tol)[0])


def propagate_square(omega: float, duration: float, atom_detuning: float = 0.0,
                     tol: Optional[float] = None) -> Propagator:
    """Constant-amplitude pulse of the given duration"""
    tol = _check_tol(tol)
    if not duration > 0:
        raise DomainError(f"Duration must be positive, got {duration}")
    # unit time chosen so that one integration unit spans duration/2
    unit = duration / 2
    matrix = _integrate(lambda s: omega * unit, lambda s: 0.0, 1.0, unit, np.array([atom_detuning]), tol)
    return Propagator.from_matrix(matrix[0])


def propagator_pi_analytic(area: float) -> Propagator:
    """exp(i A sigma_x / 2), the resonant square-pulse propagator of area A"""
    c = math.cos(area / 2)
    s = math.sin(area / 2)
    return Propagator(u_ss=complex(c), u_se=1j * s, u_es=1j * s, u_ee=complex(c))


def _mixing_angle(omega: float, delta: float) -> float:
    """theta with tan(2 theta) = Omega / Delta, in [0, pi/2]"""
    if omega == 0 and delta == 0:
        raise DegenerateCrossingError("Mixing angle undefined where Omega and Delta both vanish")
    return 0.5 * math.atan2(omega, delta)


def propagator_adiabatic_analytic(pulse: ControlPulse, atom_detuning: float) -> Propagator:
    """
    Adiabatic-following propagator over the gate.

    U = sum_{+,-} u_pm |phi_pm(t_f)><phi_pm(t_i)| with phi_- = (cos, sin),
    phi_+ = (sin, -cos) and u_pm = exp(-i int (Delta +- sqrt(Omega^2 + Delta^2))/2 dt).
    """
    if pulse.kind != PulseKind.ALLEN_EBERLY:
        raise UnsupportedPulseKindError(f"Adiabatic propagator needs a chirped pulse, got '{pulse.kind}'")

    def rabi(t):
        return pulse.omega_max * float(pulse.envelope(t))

    def detuning(t):
        return pulse.chirp_span * math.tanh((t - pulse.center_time) / pulse.tau_c) + atom_detuning

    t_i, t_f = pulse.gate_start, pulse.gate_end
    if pulse.omega_max == 0 and detuning(t_i) * detuning(t_f) <= 0:
        raise DegenerateCrossingError("Level crossing without coupling has no adiabatic limit")
    theta_i = _mixing_angle(rabi(t_i), detuning(t_i))
    theta_f = _mixing_angle(rabi(t_f), detuning(t_f))

    dressed, _ = quad(
        lambda t: math.hypot(rabi(t), detuning(t)),
        t_i, t_f, epsabs=0.0, epsrel=1e-8, limit=400,
    )
    # tanh integrates to zero over the symmetric gate
    bare = atom_detuning * (t_f - t_i)
    u_minus = np.exp(-0.5j * (bare - dressed))
    u_plus = np.exp(-0.5j * (bare + dressed))

    c0, s0 = math.cos(theta_i), math.sin(theta_i)
    cf, sf = math.cos(theta_f), math.sin(theta_f)
    return Propagator(
        u_ss=c0 * cf * u_minus + s0 * sf * u_plus,
        u_se=s0 * cf * u_minus - c0 * sf * u_plus,
        u_es=c0 * sf * u_minus - s0 * cf * u_plus,
        u_ee=s0 * sf * u_minus + c0 * cf * u_plus,
    )


def _batched_propagators(pulse: ControlPulse, detunings: np.ndarray, tol: float, threads: Optional[int]) -> np.ndarray:
    size = _sim_setting('DETUNING_BATCH_SIZE')
    batches = [detunings[i:i + size] for i in range(0, detunings.size, size)]
    results = ordered_map(lambda batch: propagate_batch(pulse, batch, tol), batches, threads)
    return np.concatenate(results, axis=0)


def _interpolate(x_coarse, values, x_fine, demodulation):
    """Cubic interpolation of re/im after removing a linear phase, clipped to |t| <= 1"""
    smooth = values * np.exp(1j * demodulation * x_coarse)
    real = CubicSpline(x_coarse, smooth.real)(x_fine)
    imag = CubicSpline(x_coarse, smooth.imag)(x_fine)
    result = (real + 1j * imag) * np.exp(-1j * demodulation * x_fine)
    magnitude = np.abs(result)
    return np.where(magnitude > 1, result / np.maximum(magnitude, 1e-300), result)


def transfer_profile(pulse1: ControlPulse, pulse2: ControlPulse, detunings, tol: Optional[float] = None,
                     decimate: Optional[bool] = None, threads: Optional[int] = None) -> TransferProfile:
    """
    t1 = (U1)_se, t2 = (U2)_es and t_double = t2 t1 on a detuning grid.

    Above the decimation threshold only every stride-th detuning is solved and
    the rest interpolated; decimate=False forces the exact solve everywhere.
    """
    tol = _check_tol(tol)
    detunings = np.asarray(detunings, dtype=float)
    if decimate is None:
        decimate = _sim_setting('DECIMATION_ENABLED')

    use_decimation = decimate and detunings.size > _sim_setting('DECIMATION_THRESHOLD')
    if use_decimation:
        index = np.arange(0, detunings.size, _sim_setting('DECIMATION_STRIDE'))
        if index[-1] != detunings.size - 1:
            index = np.append(index, detunings.size - 1)
    else:
        index = np.arange(detunings.size)
    solved = detunings[index]

    u1 = _batched_propagators(pulse1, solved, tol, threads)
    u2 = u1 if pulse2.same_shape(pulse1) else _batched_propagators(pulse2, solved, tol, threads)
    t1 = u1[:, 0, 1]
    t2 = u2[:, 1, 0]
    t_double = t2 * t1

    if use_decimation:
        t1 = _interpolate(solved, t1, detunings, pulse1.t_cut / 2)
        t2 = _interpolate(solved, t2, detunings, pulse2.t_cut / 2)
        t_double = _interpolate(solved, t_double, detunings, (pulse1.t_cut + pulse2.t_cut) / 2)

    logger.info(
        f"Transfer profile: {solved.size} of {detunings.size} detunings solved, "
        f"max |t_double|^2 = {np.max(np.abs(t_double)) ** 2:.4f}"
    )
    return TransferProfile(
        detunings=detunings,
        t1=t1,
        t2=t2,
        t_double=t_double,
        window1=pulse1.t_cut,
        window2=pulse2.t_cut,
        decimated=bool(use_decimation),
    )


def export_transfer_profile(profile: TransferProfile, path, config_sha: Optional[str] = None):
    return write_columns(
        path,
        {
            'detuning_rad_s': profile.detunings,
            're_t1': profile.t1.real,
            'im_t1': profile.t1.imag,
            're_t2': profile.t2.real,
            'im_t2': profile.t2.imag,
            're_tdouble': profile.t_double.real,
            'im_tdouble': profile.t_double.imag,
        },
        config_sha=config_sha,
        metadata={'decimated': profile.decimated},
    )

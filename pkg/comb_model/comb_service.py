"""
Atomic frequency comb: optical depth profile, dispersion, finesse and
multimode capacity.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from django.conf import settings
from scipy.signal import hilbert

from core.csv_export import write_columns
from core.exceptions import DomainError, GridCoverageError, GridResolutionError, NoStorageWindowError
from .models import CombSpec, DepthProfile, SpectralGrid

logger = logging.getLogger(__name__)

FOUR_LN2 = 4 * math.log(2)

# floor() guard so that capacities landing exactly on an integer are not lost to rounding
CAPACITY_EPSILON = 1e-9


def _sim_setting(name):
    return settings.AFC_SIMULATION[name]


def check_spectral_grid(spec: CombSpec, grid: SpectralGrid, center: float = 0.0) -> None:
    """Raise if the grid cannot resolve the peaks or does not cover comb plus guard band"""
    max_spacing = spec.peak_width * _sim_setting('RESOLUTION_FRACTION')
    if grid.spacing > max_spacing * (1 + 1e-12):
        raise GridResolutionError(
            f"Grid spacing {grid.spacing:.6g} rad/s exceeds gamma/8 = {max_spacing:.6g} rad/s"
        )
    if grid.span < 2 * spec.bandwidth * (1 - 1e-12):
        raise GridCoverageError(
            f"Grid span {grid.span:.6g} rad/s is below 2*Gamma = {2 * spec.bandwidth:.6g} rad/s"
        )
    # Gamma/2 of zero depth on each side of the comb
    low = center - spec.bandwidth
    high = center + spec.bandwidth
    if low < grid.frequencies[0] or high > grid.frequencies[-1]:
        raise GridCoverageError(
            f"Comb centered at {center:.6g} rad/s with guard band leaves the grid "
            f"[{grid.frequencies[0]:.6g}, {grid.frequencies[-1]:.6g}]"
        )


def build_depth_profile(spec: CombSpec, grid: SpectralGrid, center: float = 0.0) -> DepthProfile:
    """
    Sum of Gaussian peaks and its Kramers-Kronig phase.

    d(w) = sum_k d_peak * exp(-4 ln2 (w - w_k)^2 / gamma^2), peaks symmetric
    about `center`. The phase makes exp(-d/2 + i*phi) causal for envelopes
    E(t) = sum_w S(w) exp(-i w t).
    """
    check_spectral_grid(spec, grid, center)

    omega = grid.frequencies
    depth = np.zeros(grid.sample_count)
    reach = _sim_setting('PEAK_TRUNCATION_WIDTHS') * spec.peak_width
    for peak in spec.peak_centers(center):
        lo, hi = np.searchsorted(omega, [peak - reach, peak + reach])
        local = omega[lo:hi] - peak
        depth[lo:hi] += spec.depth_per_peak * np.exp(-FOUR_LN2 * local ** 2 / spec.peak_width ** 2)

    # analytic continuation of ln H = -d/2 into the upper half plane
    phase = np.imag(hilbert(-0.5 * depth))

    logger.info(
        f"Built depth profile: {spec.peak_count} peaks, {grid.sample_count} samples, "
        f"max depth {depth.max():.4g}"
    )
    return DepthProfile(spec=spec, grid=grid, depth=depth, phase=phase, center=center)


def comb_finesse(spec: CombSpec) -> float:
    return spec.peak_spacing / spec.peak_width


def multimode_capacity(spec: CombSpec, t_cut: float) -> Tuple[float, int]:
    """
    Number of Gaussian modes of duration 12*pi/Gamma that fit in the echo
    window left after a control gate of length t_cut.
    """
    if t_cut < 0:
        raise DomainError(f"Gate length must be >= 0, got {t_cut}")
    if t_cut >= spec.echo_time:
        raise NoStorageWindowError(
            f"Gate {t_cut:.6g} s fills the whole echo time {spec.echo_time:.6g} s"
        )
    capacity_real = (spec.echo_time - t_cut) / spec.mode_duration
    capacity_int = max(0, int(math.floor(capacity_real + CAPACITY_EPSILON)))
    return capacity_real, capacity_int


def max_chirped_duration(spec: CombSpec, gate_factor: Optional[float] = None) -> float:
    """Longest tau_c whose gate still leaves room for one mode: (2pi/Delta - 12pi/Gamma)/7"""
    gate_factor = gate_factor or _sim_setting('GATE_FACTOR')
    return (spec.echo_time - spec.mode_duration) / gate_factor


def analytic_echo_efficiency(spec: CombSpec, direction: str = 'forward') -> float:
    """
    Closed-form echo efficiency for Gaussian peaks.

    Effective depth d~ = (d/F) sqrt(pi / (4 ln2)); dephasing exp(-pi^2 / (2 ln2 F^2)).
    """
    finesse = comb_finesse(spec)
    effective_depth = spec.depth_per_peak / finesse * math.sqrt(math.pi / FOUR_LN2)
    dephasing = math.exp(-math.pi ** 2 / (2 * math.log(2) * finesse ** 2))
    if direction == 'forward':
        return effective_depth ** 2 * math.exp(-effective_depth) * dephasing
    if direction == 'backward':
        return (1 - math.exp(-effective_depth)) ** 2 * dephasing
    raise DomainError(f"Unknown readout direction '{direction}'")


def auto_spectral_grid(spec: CombSpec, min_duration: float = 0.0) -> SpectralGrid:
    """Smallest power-of-two grid with span >= 4*Gamma and spacing <= gamma/8"""
    span = _sim_setting('SPAN_FACTOR') * spec.bandwidth
    max_spacing = spec.peak_width * _sim_setting('RESOLUTION_FRACTION')
    if min_duration > 0:
        max_spacing = min(max_spacing, 2 * math.pi / min_duration)
    count = 2 ** int(math.ceil(math.log2(span / max_spacing)))
    return SpectralGrid.centered(count, span / count)


def export_depth_profile(profile: DepthProfile, path, config_sha: Optional[str] = None):
    return write_columns(
        path,
        {
            'omega_rad_s': profile.grid.frequencies,
            'depth': profile.depth,
            'phase_rad': profile.phase,
        },
        config_sha=config_sha,
        metadata={'finesse': comb_finesse(profile.spec), 'echo_time_s': profile.spec.echo_time},
    )

"""
Comb value types.

These are immutable values, not ORM tables: every quantity is in SI units
with angular frequencies in rad/s.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import DomainError, GridError


@dataclass(frozen=True)
class CombSpec:
    """Atomic frequency comb: Gaussian peaks of FWHM gamma spaced by delta"""

    peak_width: float  # gamma, FWHM, rad/s
    peak_spacing: float  # Delta, rad/s
    peak_count: int
    depth_per_peak: float  # alpha*L

    def __post_init__(self):
        if not (self.peak_width > 0):
            raise DomainError(f"Peak width must be positive, got {self.peak_width}")
        if self.peak_spacing < self.peak_width:
            raise DomainError(
                f"Peaks not resolved: spacing {self.peak_spacing} < width {self.peak_width}"
            )
        if int(self.peak_count) != self.peak_count or self.peak_count < 1:
            raise DomainError(f"Peak count must be a positive integer, got {self.peak_count}")
        if self.depth_per_peak < 0:
            raise DomainError(f"Optical depth must be >= 0, got {self.depth_per_peak}")

    @property
    def bandwidth(self) -> float:
        """Gamma = N_peak * Delta"""
        return self.peak_count * self.peak_spacing

    @property
    def finesse(self) -> float:
        return self.peak_spacing / self.peak_width

    @property
    def echo_time(self) -> float:
        return 2 * math.pi / self.peak_spacing

    @property
    def mode_duration(self) -> float:
        """Shortest storable mode, 12*pi/Gamma"""
        return 12 * math.pi / self.bandwidth

    def peak_centers(self, offset: float = 0.0) -> np.ndarray:
        """Peak centers symmetric about the comb center (plus a global offset)"""
        index = np.arange(self.peak_count) - (self.peak_count - 1) / 2.0
        return offset + index * self.peak_spacing


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Uniform ascending angular-frequency samples centered on the comb"""

    frequencies: np.ndarray

    def __post_init__(self):
        n = len(self.frequencies)
        if n < 2 or n & (n - 1):
            raise GridError(f"Spectral grid needs a power-of-two sample count, got {n}")

    @classmethod
    def centered(cls, sample_count: int, spacing: float) -> 'SpectralGrid':
        """FFT-ordered grid shifted to ascending order; index n/2 is zero frequency"""
        index = np.arange(sample_count) - sample_count // 2
        return cls(frequencies=index * float(spacing))

    @property
    def sample_count(self) -> int:
        return len(self.frequencies)

    @property
    def spacing(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    @property
    def span(self) -> float:
        return self.sample_count * self.spacing


@dataclass(frozen=True, eq=False)
class DepthProfile:
    """Optical depth and Kramers-Kronig dispersion phase on a spectral grid"""

    spec: CombSpec
    grid: SpectralGrid
    depth: np.ndarray
    phase: np.ndarray
    center: float = field(default=0.0)

    def transfer_function(self) -> np.ndarray:
        """Single-pass forward amplitude response exp(-d/2 + i*phi), ascending order"""
        return np.exp(-0.5 * self.depth + 1j * self.phase)

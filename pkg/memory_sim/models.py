"""Protocol value types: time grid, timeline and results"""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import fft

from comb_model.models import SpectralGrid
from core.exceptions import GridError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic time grid, stop is exclusive"""

    start: float
    stop: float
    sample_count: int

    def __post_init__(self):
        n = self.sample_count
        if n < 2 or n & (n - 1):
            raise GridError(f"Time grid needs a power-of-two sample count, got {n}")
        if not self.stop > self.start:
            raise GridError(f"Time grid stop {self.stop} must exceed start {self.start}")

    @classmethod
    def from_spectral_grid(cls, grid: SpectralGrid, start: float = 0.0) -> 'TimeGrid':
        duration = 2 * math.pi / grid.spacing
        return cls(start=start, stop=start + duration, sample_count=grid.sample_count)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / self.sample_count

    @property
    def duration(self) -> float:
        return self.stop - self.start

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(self.sample_count) * self.spacing

    def angular_frequencies(self) -> np.ndarray:
        """Angular frequencies in FFT order"""
        return 2 * math.pi * fft.fftfreq(self.sample_count, d=self.spacing)

    def spectral_grid(self) -> SpectralGrid:
        """Ascending FFT-dual grid"""
        return SpectralGrid.centered(self.sample_count, 2 * math.pi / self.duration)

    def satisfies_nyquist(self, bandwidth: float) -> bool:
        return self.spacing <= 2 * math.pi / (4 * bandwidth) * (1 + 1e-12)


@dataclass(frozen=True)
class ProtocolTimeline:
    """Signal and control-pulse timing on the protocol time axis"""

    t0_signal: float
    t_control1: float
    t_control2: float

    @property
    def storage_time(self) -> float:
        """T_s, delay between the two control pulses"""
        return self.t_control2 - self.t_control1

    def echo_offset(self, echo_time: float) -> float:
        """T_0, where 2pi/Delta - T_0 is the delay between signal and first control"""
        return echo_time - (self.t_control1 - self.t0_signal)


@dataclass(frozen=True, eq=False)
class EchoResult:
    signal: np.ndarray
    output: np.ndarray
    eta_echo: float
    echo_time_measured: float
    window: Tuple[float, float]


@dataclass(frozen=True)
class StorageResult:
    eta_echo: float
    eta_sq: float
    eta_tot: float
    overlap: float
    echo_time_measured: float
    capacity_int: int
    capacity_real: float = 0.0
    leakage: float = 0.0
    spectral_eta_sq: float = float('nan')
    omega: float = float('nan')
    metadata: Dict[str, float] = field(default_factory=dict)

    def to_row(self) -> Dict[str, object]:
        row = asdict(self)
        row.pop('metadata')
        row['omega_rad_s'] = row.pop('omega')
        row['echo_time_s'] = row.pop('echo_time_measured')
        return row


@dataclass(frozen=True, eq=False)
class RecallResult:
    """Full protocol output: metrics plus the envelopes they were computed from"""

    result: StorageResult
    echo: EchoResult
    recalled: np.ndarray
    recall_window: Tuple[float, float]
    transfer: Optional[object] = None

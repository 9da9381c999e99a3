"""Control pulse and signal train value types"""
import dataclasses
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from django.conf import settings
from django.db import models

from core.exceptions import DomainError


class PulseKind(models.TextChoices):
    PI = 'pi', 'Sech pi-pulse'
    ALLEN_EBERLY = 'allen_eberly', 'Allen-Eberly chirped pulse'


@dataclass(frozen=True)
class ControlPulse:
    """
    Gated sech pulse, optionally with a tanh chirp.

    Omega(t) = omega_max * sech((t - center)/tau_c) inside |t - center| <= t_cut/2,
    Delta(t) = chirp_span * tanh((t - center)/tau_c) + Delta_j.

    Chirped pulses are tapered: the sech is lowered by its value at the gate
    edge and renormalized, so Omega rises from zero at the edges and still
    peaks at omega_max.
    """

    kind: str
    omega_max: float
    tau_c: float
    chirp_span: float = 0.0
    t_cut: Optional[float] = None
    center_time: float = 0.0

    def __post_init__(self):
        if self.kind not in PulseKind.values:
            raise DomainError(f"Unknown pulse kind '{self.kind}'")
        if not (self.tau_c > 0):
            raise DomainError(f"tau_c must be positive, got {self.tau_c}")
        if self.omega_max < 0:
            raise DomainError(f"Rabi frequency must be >= 0, got {self.omega_max}")
        if self.chirp_span < 0:
            raise DomainError(f"Chirp span must be >= 0, got {self.chirp_span}")
        if self.kind == PulseKind.PI and self.chirp_span != 0:
            raise DomainError("A pi-pulse carries no chirp")
        if self.t_cut is None:
            object.__setattr__(self, 't_cut', settings.AFC_SIMULATION['GATE_FACTOR'] * self.tau_c)
        if not (self.t_cut > 0):
            raise DomainError(f"T_cut must be positive, got {self.t_cut}")
        for name in ('omega_max', 'tau_c', 'chirp_span', 't_cut', 'center_time'):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @property
    def gate_start(self) -> float:
        return self.center_time - self.t_cut / 2

    @property
    def gate_end(self) -> float:
        return self.center_time + self.t_cut / 2

    @property
    def chirp_product(self) -> float:
        """Delta_max * tau_c"""
        return self.chirp_span * self.tau_c

    @property
    def edge_level(self) -> float:
        """sech value removed at the gate edge; zero for pi-pulses"""
        if self.kind == PulseKind.PI:
            return 0.0
        return 1.0 / math.cosh(min(self.t_cut / (2 * self.tau_c), 700.0))

    def shape(self, s):
        """Envelope in scaled time s = (t - center)/tau_c, ignoring the gate"""
        edge = self.edge_level
        return (1.0 / np.cosh(np.clip(s, -700, 700)) - edge) / (1.0 - edge)

    def envelope(self, t) -> np.ndarray:
        """g(t) in [0, 1], zero outside the gate"""
        s = (np.asarray(t, dtype=float) - self.center_time) / self.tau_c
        inside = np.abs(s) <= self.t_cut / (2 * self.tau_c)
        return np.where(inside, np.maximum(self.shape(s), 0.0), 0.0)

    def chirp(self, t) -> np.ndarray:
        """f(t) in [-1, 1]; identically zero for pi-pulses"""
        if self.kind == PulseKind.PI:
            return np.zeros_like(np.asarray(t, dtype=float))
        return np.tanh((np.asarray(t, dtype=float) - self.center_time) / self.tau_c)

    def same_shape(self, other: 'ControlPulse') -> bool:
        return (self.kind, self.omega_max, self.tau_c, self.chirp_span, self.t_cut) == (
            other.kind, other.omega_max, other.tau_c, other.chirp_span, other.t_cut)

    def moved_to(self, center_time: float) -> 'ControlPulse':
        return dataclasses.replace(self, center_time=center_time)

    def scaled(self, factor: float) -> 'ControlPulse':
        """Same pulse with the Rabi amplitude multiplied by factor"""
        return dataclasses.replace(self, omega_max=self.omega_max * factor)


@dataclass(frozen=True)
class AdiabaticityReport:
    covers_band: bool
    duration_ok: bool
    predicted_eta: float


@dataclass(frozen=True)
class SignalTrainSpec:
    """Train of Gaussian temporal modes spaced by tau_mode"""

    mode_count: int
    mode_duration: float
    mode_amplitudes: Tuple[complex, ...] = ()
    carrier_detuning: float = 0.0
    first_center: float = 0.0

    def __post_init__(self):
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise DomainError(f"Mode count must be a positive integer, got {self.mode_count}")
        if not (self.mode_duration > 0):
            raise DomainError(f"Mode duration must be positive, got {self.mode_duration}")
        amplitudes = tuple(complex(a) for a in self.mode_amplitudes) or (1.0 + 0j,) * self.mode_count
        if len(amplitudes) != self.mode_count:
            raise DomainError(
                f"{len(amplitudes)} amplitudes given for {self.mode_count} modes"
            )
        object.__setattr__(self, 'mode_amplitudes', amplitudes)

    @property
    def sigma_t(self) -> float:
        return self.mode_duration * settings.AFC_SIMULATION['SIGMA_FRACTION']

    @property
    def mode_centers(self) -> np.ndarray:
        return self.first_center + np.arange(self.mode_count) * self.mode_duration

    @property
    def last_center(self) -> float:
        return float(self.mode_centers[-1])

    @property
    def bandwidth(self) -> float:
        """Angular bandwidth ~ 6/tau_mode"""
        return 6.0 / self.mode_duration

    def single_mode(self, index: int) -> 'SignalTrainSpec':
        """Same train with every amplitude but one set to zero"""
        amplitudes = tuple(a if i == index else 0j for i, a in enumerate(self.mode_amplitudes))
        return dataclasses.replace(self, mode_amplitudes=amplitudes)


@dataclass(frozen=True)
class PulseFamily:
    """One curve of a Rabi sweep: sech pi-pulses, or chirped pulses at fixed Delta_max * tau_c"""

    kind: str
    chirp_product: float = 0.0
    gate_factor: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PulseKind.values:
            raise DomainError(f"Unknown pulse kind '{self.kind}'")
        if self.kind == PulseKind.ALLEN_EBERLY and not self.chirp_product > 0:
            raise DomainError("A chirped family needs Delta_max * tau_c > 0")

    @property
    def label(self) -> str:
        if self.kind == PulseKind.PI:
            return 'pi'
        return f"allen_eberly_bt{self.chirp_product:g}"

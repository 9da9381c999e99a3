"""
Validated scenario. Frequencies are already converted to rad/s here;
only the effective-config text keeps the external Hz values.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

from comb_model.models import CombSpec
from pulse_kit.models import PulseFamily, SignalTrainSpec


@dataclass(frozen=True)
class DesignRequest:
    """Pulse to be designed instead of given: target efficiency at an available Rabi frequency"""

    eta_target: float
    omega_available: float


@dataclass(frozen=True)
class ControlSettings:
    kind: str
    gate_factor: float
    eta_target: float
    omega_max: Optional[float] = None
    tau_c: Optional[float] = None
    chirp_product: Optional[float] = None
    chirp_span: Optional[float] = None
    second_chirp_product: Optional[float] = None
    allow_mismatched: bool = False
    design: Optional[DesignRequest] = None


@dataclass(frozen=True)
class TimelineSettings:
    """None means placed automatically"""

    control1_center: Optional[float] = None
    storage_time: Optional[float] = None


@dataclass(frozen=True)
class GridSettings:
    """sample_count None means auto"""

    sample_count: Optional[int] = None
    start: Optional[float] = None


@dataclass(frozen=True)
class SweepSettings:
    omega_min: float
    omega_max: float
    points: int
    families: Tuple[PulseFamily, ...]
    log_spacing: bool = False


@dataclass(frozen=True)
class CapacitySettings:
    omegas: Tuple[float, ...]
    eta_tot_target: float
    eta_echo: Optional[float] = None
    readout: str = 'backward'


@dataclass(frozen=True)
class NumericsSettings:
    tol: Optional[float] = None
    threads: Optional[int] = None
    decimation: Optional[bool] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    comb: CombSpec
    comb_center: float
    signal: SignalTrainSpec
    control: Optional[ControlSettings]
    timeline: TimelineSettings
    grid: GridSettings
    sweep: Optional[SweepSettings]
    capacity: Optional[CapacitySettings]
    numerics: NumericsSettings
    output_dir: Optional[str] = None
    effective_config: str = field(default='', repr=False)
    config_sha: str = ''

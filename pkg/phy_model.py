"""
Link-level physical model: scenario geometry, deterministic channel gains,
noise power and the linear energy-harvesting primitive.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from errors import ChannelError


class Position(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    x: float = Field(allow_inf_nan=False)  # meters
    y: float = Field(allow_inf_nan=False)  # meters


class NetworkConfig(BaseModel):
    """Single source of truth for a scenario"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    source_pos: Position
    receiver_pos: Position
    device_pos: Tuple[Position, ...] = Field(min_length=1)
    bandwidth_hz: float = Field(gt=0, allow_inf_nan=False)
    noise_psd_dbm_hz: float = Field(allow_inf_nan=False)
    eh_efficiency: float = Field(gt=0, le=1)
    circuit_power_bc_w: float = Field(gt=0, allow_inf_nan=False)
    circuit_power_ac_w: float = Field(gt=0, allow_inf_nan=False)
    spreading_factor: int = Field(ge=1)
    path_loss_ref_gain: float = Field(gt=0, allow_inf_nan=False)
    path_loss_exponent: float = Field(ge=0, allow_inf_nan=False)
    min_distance_m: float = Field(default=1.0, ge=0, allow_inf_nan=False)
    device_power_cap_w: Optional[float] = Field(default=None, gt=0)
    backscatter_combining: bool = True

    @property
    def num_devices(self) -> int:
        return len(self.device_pos)


@dataclass(frozen=True)
class ChannelSet:
    """Linear power gains of the four link classes plus the noise power"""

    g_sr: float
    g_sd: Tuple[float, ...]
    g_dr: Tuple[float, ...]
    noise_w: float

    @property
    def num_devices(self) -> int:
        return len(self.g_sd)

    def cascade(self, k: int) -> float:
        """Backscatter path gain source -> device k -> receiver"""
        return self.g_sd[k] * self.g_dr[k]


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters"""
    return math.hypot(a.x - b.x, a.y - b.y)


def path_gain(d: float, l0: float, kappa: float, d_min: float = 1.0) -> float:
    """Log-distance path gain L0 * max(d, d_min)^-kappa"""
    d_eff = max(d, d_min)
    if d_eff <= 0.0:
        if kappa == 0.0:
            return l0
        raise ChannelError("zero link distance with distance clamping disabled")
    return l0 * d_eff ** (-kappa)


def noise_power(psd_dbm_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power in watts over the given bandwidth"""
    if bandwidth_hz <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth_hz}")
    noise_dbm = psd_dbm_hz + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** ((noise_dbm - 30.0) / 10.0)


def harvested_power(p_tx: float, gain: float, eta: float, harvest_share: float) -> float:
    """Linear EH model: eta * harvest_share * p_tx * gain

    harvest_share is 1 for an idle device and (1 - alpha) for a device
    backscattering with reflection coefficient alpha.
    """
    if not 0.0 <= harvest_share <= 1.0:
        raise ValueError(f"harvest_share must lie in [0, 1], got {harvest_share}")
    return eta * harvest_share * p_tx * gain


def build_channels(cfg: NetworkConfig) -> ChannelSet:
    """Deterministic channel gains and noise power for a scenario"""
    d_min = cfg.min_distance_m
    l0 = cfg.path_loss_ref_gain
    kappa = cfg.path_loss_exponent

    def link(a: Position, b: Position, label: str) -> float:
        d = distance(a, b)
        if d == 0.0 and d_min == 0.0 and kappa > 0.0:
            raise ChannelError(f"coincident positions on link {label} with distance clamping disabled")
        return path_gain(d, l0, kappa, d_min)

    g_sr = link(cfg.source_pos, cfg.receiver_pos, "source->receiver")
    g_sd = tuple(link(cfg.source_pos, pos, f"source->device{k + 1}") for k, pos in enumerate(cfg.device_pos))
    g_dr = tuple(link(pos, cfg.receiver_pos, f"device{k + 1}->receiver") for k, pos in enumerate(cfg.device_pos))
    noise_w = noise_power(cfg.noise_psd_dbm_hz, cfg.bandwidth_hz)

    logger.debug(f"Channels built for K={cfg.num_devices}: g_sr={g_sr:.3e}, noise={noise_w:.3e} W")
    return ChannelSet(g_sr=g_sr, g_sd=g_sd, g_dr=g_dr, noise_w=noise_w)

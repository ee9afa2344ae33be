"""
Closed-form achievable rates of the two-phase block (mutualism phase with
backscatter, uplink NOMA phase with active transmission), the per-device
energy ledger and the feasibility evaluation of an allocation.

All rates are Shannon rates in bits/s averaged over a unit-length block.
The rate operations accept numpy arrays for the per-device arguments so the
same formulas serve single evaluations, the allocator LP and the oracle's
vectorized screen.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from config import settings
from phy_model import ChannelSet, NetworkConfig, harvested_power

ArrayLike = Union[float, np.ndarray]
DeviceIndex = Union[int, np.ndarray]

LN2 = math.log(2.0)

CONSTRAINTS = ("C1", "C2", "C3", "C4")


def _shannon(snr: ArrayLike) -> ArrayLike:
    """log2(1 + snr), accurate at low SNR"""
    return np.log1p(snr) / LN2


def _gains(values: Tuple[float, ...], k: DeviceIndex) -> ArrayLike:
    return np.asarray(values, dtype=float)[k]


# ----------------------------------------------------------------------------
# Rate operations
# ----------------------------------------------------------------------------

def legacy_rate_baseline(p: ArrayLike, ch: ChannelSet, bandwidth_hz: float) -> ArrayLike:
    """Source rate with no A-IoT access"""
    return bandwidth_hz * _shannon(p * ch.g_sr / ch.noise_w)


def legacy_rate_mutualism(p: ArrayLike, k: DeviceIndex, alpha_k: ArrayLike, ch: ChannelSet,
                          bandwidth_hz: float) -> ArrayLike:
    """Source rate while device k backscatters; the reflection acts as extra multipath"""
    cascade = _gains(ch.g_sd, k) * _gains(ch.g_dr, k)
    received = p * ch.g_sr + alpha_k * p * cascade
    return bandwidth_hz * _shannon(received / ch.noise_w)


def backscatter_rate(p: ArrayLike, k: DeviceIndex, alpha_k: ArrayLike, spreading_factor: int,
                     ch: ChannelSet, bandwidth_hz: float, combining: bool = True) -> ArrayLike:
    """Device k rate in BC mode after the legacy signal is cancelled

    One backscatter symbol spans N source symbols. With combining on the
    receiver collects the N-fold energy of the symbol.
    """
    n = float(spreading_factor)
    snr = alpha_k * p * _gains(ch.g_sd, k) * _gains(ch.g_dr, k) / ch.noise_w
    if combining:
        snr = n * snr
    return (bandwidth_hz / n) * _shannon(snr)


def legacy_rate_noma(p: ArrayLike, k: DeviceIndex, q_k: ArrayLike, ch: ChannelSet,
                     bandwidth_hz: float) -> ArrayLike:
    """Source rate decoded first while device k transmits actively (device signal as interference)"""
    interference = ch.noise_w + q_k * _gains(ch.g_dr, k)
    return bandwidth_hz * _shannon(p * ch.g_sr / interference)


def active_rate(k: DeviceIndex, q_k: ArrayLike, ch: ChannelSet, bandwidth_hz: float) -> ArrayLike:
    """Device k rate in AC mode after the legacy signal is cancelled"""
    return bandwidth_hz * _shannon(q_k * _gains(ch.g_dr, k) / ch.noise_w)


# ----------------------------------------------------------------------------
# Allocation, ledger and report types
# ----------------------------------------------------------------------------

def _as_tuple(values: Sequence[float]) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Allocation:
    """Per-device decision variables over a unit block"""

    tau_bc: Tuple[float, ...]
    tau_ac: Tuple[float, ...]
    alpha: Tuple[float, ...]
    q: Tuple[float, ...]
    p_src: float

    def __post_init__(self):
        for name in ("tau_bc", "tau_ac", "alpha", "q"):
            object.__setattr__(self, name, _as_tuple(getattr(self, name)))
        object.__setattr__(self, "p_src", float(self.p_src))
        sizes = {len(self.tau_bc), len(self.tau_ac), len(self.alpha), len(self.q)}
        if len(sizes) != 1:
            raise ValueError(f"allocation vectors differ in length: {sorted(sizes)}")

    @property
    def num_devices(self) -> int:
        return len(self.tau_bc)

    @property
    def slack(self) -> float:
        """Idle time in which every device harvests"""
        return 1.0 - sum(self.tau_bc) - sum(self.tau_ac)

    @classmethod
    def idle(cls, num_devices: int, p_src: float) -> "Allocation":
        zeros = (0.0,) * num_devices
        return cls(tau_bc=zeros, tau_ac=zeros, alpha=zeros, q=zeros, p_src=p_src)


@dataclass(frozen=True)
class EnergyLedger:
    """Per-device energy over the unit block, in joules"""

    harvested_j: Tuple[float, ...]
    consumed_j: Tuple[float, ...]

    @property
    def slack_j(self) -> Tuple[float, ...]:
        return tuple(h - c for h, c in zip(self.harvested_j, self.consumed_j))


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    violations: Tuple[str, ...] = ()

    def violated(self, constraint: str) -> bool:
        return any(v == constraint or v.startswith(f"{constraint}[") for v in self.violations)

    @property
    def flags(self) -> Dict[str, bool]:
        return {c: not self.violated(c) for c in CONSTRAINTS}


@dataclass(frozen=True)
class RateReport:
    rate_device: Tuple[float, ...]
    rate_source: float
    rate_source_baseline: float
    rate_gain: float
    weighted_sum: float
    ledger: EnergyLedger
    verdict: FeasibilityVerdict
    in_aiot_envelope: Tuple[bool, ...]
    p_src: float
    g_min: float
    weights: Tuple[float, ...] = field(default=())

    @property
    def feasible(self) -> bool:
        return self.verdict.feasible


@dataclass(frozen=True)
class ScheduleCoefficients:
    """Affine coefficients of every block quantity in the time shares

    Arrays have the per-device axis last, so a batch of (alpha, q) candidates
    of shape (M, K) yields coefficient arrays of shape (M, K).
    """

    rate_bc: np.ndarray  # device rate per unit tau_bc
    rate_ac: np.ndarray  # device rate per unit tau_ac
    source_bc: np.ndarray  # source rate during device k's BC slot
    source_ac: np.ndarray  # source rate during device k's AC slot
    source_idle: float  # source rate in slack time
    harvest_w: np.ndarray  # power device k harvests while idle
    alpha: np.ndarray
    q: np.ndarray
    circuit_bc_w: float
    circuit_ac_w: float

    @property
    def gain_bc(self) -> np.ndarray:
        return self.source_bc - self.source_idle

    @property
    def gain_ac(self) -> np.ndarray:
        return self.source_ac - self.source_idle

    def energy_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Energy causality as cost_bc * tau_bc + cost_ac * tau_ac <= harvest_w

        Follows from harvested = harvest_w * (1 - alpha * tau_bc - tau_ac).
        """
        cost_bc = self.circuit_bc_w + self.harvest_w * self.alpha
        cost_ac = self.q + self.circuit_ac_w + self.harvest_w
        return cost_bc, cost_ac


def schedule_coefficients(cfg: NetworkConfig, ch: ChannelSet, alpha: ArrayLike, q: ArrayLike,
                          p_src: float) -> ScheduleCoefficients:
    """Per-slot rates and harvest power for fixed reflection coefficients and powers"""
    k = np.arange(ch.num_devices)
    alpha = np.asarray(alpha, dtype=float)
    q = np.asarray(q, dtype=float)
    bandwidth = cfg.bandwidth_hz
    harvest = np.array([harvested_power(p_src, g, cfg.eh_efficiency, 1.0) for g in ch.g_sd])

    return ScheduleCoefficients(
        rate_bc=backscatter_rate(p_src, k, alpha, cfg.spreading_factor, ch, bandwidth,
                                 combining=cfg.backscatter_combining),
        rate_ac=active_rate(k, q, ch, bandwidth),
        source_bc=legacy_rate_mutualism(p_src, k, alpha, ch, bandwidth),
        source_ac=legacy_rate_noma(p_src, k, q, ch, bandwidth),
        source_idle=float(legacy_rate_baseline(p_src, ch, bandwidth)),
        harvest_w=harvest,
        alpha=alpha,
        q=q,
        circuit_bc_w=cfg.circuit_power_bc_w,
        circuit_ac_w=cfg.circuit_power_ac_w,
    )


# ----------------------------------------------------------------------------
# Ledger and evaluation
# ----------------------------------------------------------------------------

def energy_ledger(cfg: NetworkConfig, ch: ChannelSet, alloc: Allocation) -> EnergyLedger:
    """Harvested and consumed energy of each device over the block

    A device harvests during its own BC slot (the unreflected share), during
    every other device's slot and in the idle slack; nothing during its own
    AC slot. Other devices' backscatter is not counted as a source.
    """
    slack = max(alloc.slack, 0.0)
    harvested, consumed = [], []
    for k in range(alloc.num_devices):
        others = sum(alloc.tau_bc[j] + alloc.tau_ac[j] for j in range(alloc.num_devices) if j != k)
        idle_w = harvested_power(alloc.p_src, ch.g_sd[k], cfg.eh_efficiency, 1.0)
        # out-of-range alpha is a C4 violation, not a ledger error
        share = min(max(1.0 - alloc.alpha[k], 0.0), 1.0)
        own_bc_w = harvested_power(alloc.p_src, ch.g_sd[k], cfg.eh_efficiency, share)
        harvested.append(own_bc_w * alloc.tau_bc[k] + idle_w * (others + slack))
        consumed.append(cfg.circuit_power_bc_w * alloc.tau_bc[k]
                        + (alloc.q[k] + cfg.circuit_power_ac_w) * alloc.tau_ac[k])
    return EnergyLedger(harvested_j=tuple(harvested), consumed_j=tuple(consumed))


def device_modes(alloc: Allocation) -> List[Dict[str, float]]:
    """Share of the block each device spends in EH, BC and AC mode"""
    modes = []
    for k in range(alloc.num_devices):
        modes.append({
            "eh": 1.0 - alloc.tau_bc[k] - alloc.tau_ac[k],
            "bc": alloc.tau_bc[k],
            "ac": alloc.tau_ac[k],
        })
    return modes


def in_envelope(rate: float) -> bool:
    """Typical A-IoT rate range, boundaries inclusive"""
    return settings.ENVELOPE_LOW <= rate <= settings.ENVELOPE_HIGH


def _box_violations(cfg: NetworkConfig, alloc: Allocation) -> List[str]:
    tol = settings.FEASIBILITY_TOL
    problems = []
    if alloc.slack < -tol:
        problems.append("C4[time]")
    for k in range(alloc.num_devices):
        if alloc.tau_bc[k] < -tol or alloc.tau_ac[k] < -tol:
            problems.append(f"C4[tau {k + 1}]")
        if not 0.0 <= alloc.alpha[k] <= 1.0:
            problems.append(f"C4[alpha {k + 1}]")
        cap = cfg.device_power_cap_w
        if alloc.q[k] < 0.0 or (cap is not None and alloc.q[k] > cap * (1.0 + tol)):
            problems.append(f"C4[q {k + 1}]")
    if alloc.p_src < 0.0:
        problems.append("C4[p_src]")
    return problems


def evaluate(cfg: NetworkConfig, ch: ChannelSet, alloc: Allocation, weights: Sequence[float],
             g_min: float) -> RateReport:
    """Rates, ledger and C1-C4 verdict of an allocation; infeasible allocations are reported, not rejected"""
    if alloc.num_devices != ch.num_devices or len(weights) != ch.num_devices:
        raise ValueError("allocation, weights and channels must describe the same number of devices")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be non-negative")

    coeffs = schedule_coefficients(cfg, ch, alloc.alpha, alloc.q, alloc.p_src)
    tau_bc = np.asarray(alloc.tau_bc)
    tau_ac = np.asarray(alloc.tau_ac)

    rate_device = tau_bc * coeffs.rate_bc + tau_ac * coeffs.rate_ac
    rate_source = float(np.sum(tau_bc * coeffs.source_bc) + np.sum(tau_ac * coeffs.source_ac)
                        + alloc.slack * coeffs.source_idle)
    baseline = coeffs.source_idle
    rate_gain = rate_source - baseline
    weighted_sum = float(np.sum(np.asarray(weights, dtype=float) * rate_device))
    ledger = energy_ledger(cfg, ch, alloc)

    tol = settings.FEASIBILITY_TOL
    violations = []
    if rate_gain < g_min - tol * max(1.0, baseline, g_min):
        violations.append("C1")
    for k in range(alloc.num_devices):
        allowance = tol * max(float(coeffs.harvest_w[k]), cfg.circuit_power_bc_w)
        if ledger.consumed_j[k] > ledger.harvested_j[k] + allowance:
            violations.append(f"C2[device {k + 1}]")
    for k in range(alloc.num_devices):
        if rate_device[k] < settings.RATE_FLOOR * (1.0 - tol):
            violations.append(f"C3[device {k + 1}]")
    violations.extend(_box_violations(cfg, alloc))

    return RateReport(
        rate_device=_as_tuple(rate_device),
        rate_source=rate_source,
        rate_source_baseline=baseline,
        rate_gain=rate_gain,
        weighted_sum=weighted_sum,
        ledger=ledger,
        verdict=FeasibilityVerdict(feasible=not violations, violations=tuple(violations)),
        in_aiot_envelope=tuple(in_envelope(float(r)) for r in rate_device),
        p_src=alloc.p_src,
        g_min=float(g_min),
        weights=_as_tuple(weights),
    )

"""
Sweep harness for the preset experiments and the paradigm comparison.

A sweep varies one axis (p_max or g_min) for each fixed value of the other
and solves every requested paradigm at every point. Points that share a fixed
value form a chain solved in order, each point handing its solutions to the
next as incumbents:

  - along p_max (ascending) a lower-power optimum stays feasible at higher power
  - along g_min (solved descending) a stricter optimum stays feasible for a looser floor

Chains are independent, so they can run in a process pool; rows are written
back in axis order and the table is identical to a serial run.
"""

import asyncio
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from allocator import (PARADIGMS, STATUS_INFEASIBLE, ProblemSpec, Solution, max_rate_gain, optimize,
                       optimize_sr_baseline, report_for)
from config import settings
from errors import ConfigError
from phy_model import NetworkConfig
from rate_model import Allocation
from reports import (Cell, allocation_columns, allocation_from_row, allocation_row, format_cell,
                     rate_report_row, render_csv, report_columns, to_frame, write_csv)
from scenario import calibration_header, config_digest

AXES = ("p_max", "g_min")
PRESETS = ("fig4a", "fig4b", "fig4c")


@dataclass(frozen=True)
class SweepSpec:
    cfg: NetworkConfig
    axis: str
    values: Tuple[float, ...]
    fixed: Tuple[float, ...]
    modes: Tuple[str, ...] = ("hapc_sr", "sr_baseline")
    weights: Optional[Tuple[float, ...]] = None
    output: Optional[Path] = None
    scenario_path: Optional[Path] = None
    preset: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "fixed", tuple(float(v) for v in self.fixed))
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}", key="axis")
        if not self.values:
            raise ConfigError("sweep needs at least one axis value", key="values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("axis values must be strictly increasing", key="values")
        if not self.fixed:
            raise ConfigError("sweep needs at least one fixed value", key="fixed")
        if any(v < 0 or not math.isfinite(v) for v in self.values + self.fixed):
            raise ConfigError("p_max and g_min values must be finite and non-negative")
        if not self.modes or any(m not in PARADIGMS for m in self.modes):
            raise ConfigError(f"modes must be a non-empty subset of {PARADIGMS}", key="modes")
        if len(set(self.modes)) != len(self.modes):
            raise ConfigError("modes must not repeat", key="modes")

    @property
    def fixed_name(self) -> str:
        return "g_min" if self.axis == "p_max" else "p_max"

    def point(self, axis_value: float, fixed_value: float) -> Tuple[float, float]:
        """(p_max, g_min) of one sweep point"""
        if self.axis == "p_max":
            return axis_value, fixed_value
        return fixed_value, axis_value


@dataclass(frozen=True)
class ChainJob:
    cfg: NetworkConfig
    points: Tuple[Tuple[int, float, float], ...]  # (axis index, p_max, g_min) in solve order
    modes: Tuple[str, ...]
    weights: Optional[Tuple[float, ...]]
    axis: str
    group: int


@dataclass
class SweepResult:
    spec: SweepSpec
    frame: pd.DataFrame
    header_lines: List[str] = field(default_factory=list)

    @property
    def feasible_rows(self) -> int:
        return int((self.frame["status"] != STATUS_INFEASIBLE).sum())

    @property
    def all_infeasible(self) -> bool:
        return self.feasible_rows == 0

    def to_csv(self) -> str:
        return render_csv(self.frame, self.header_lines)

    def write(self, path: Optional[Path] = None) -> Path:
        target = path or self.spec.output
        if target is None:
            raise ValueError("no output path given")
        return write_csv(self.frame, target, self.header_lines)


def sweep_columns(num_devices: int) -> List[str]:
    return (["axis", "mode"] + report_columns(num_devices) + ["status", "conflicts"]
            + allocation_columns(num_devices))


def sweep_row(solution: Solution, axis: str) -> Dict[str, Cell]:
    row: Dict[str, Cell] = {"axis": axis, "mode": solution.paradigm}
    row.update(rate_report_row(solution.report))
    row["status"] = solution.status
    row["conflicts"] = ";".join(solution.conflicts)
    row.update(allocation_row(solution.alloc))
    return row


# ----------------------------------------------------------------------------
# Points and chains
# ----------------------------------------------------------------------------

def run_point(cfg: NetworkConfig, p_max: float, g_min: float, mode: str,
              weights: Optional[Sequence[float]] = None, incumbents: Iterable[Allocation] = (),
              baseline: Optional[Solution] = None) -> Solution:
    """Solve one sweep point under one paradigm"""
    spec = ProblemSpec.build(cfg, p_max, g_min, weights, paradigm=mode)
    if mode == "sr_baseline":
        return optimize_sr_baseline(spec, incumbents)
    return optimize(spec, incumbents, baseline)


def _feasible_allocs(*solutions: Optional[Solution]) -> List[Allocation]:
    return [s.alloc for s in solutions if s is not None and s.feasible]


def run_chain(job: ChainJob) -> List[Tuple[int, str, Dict[str, Cell]]]:
    """Solve the points of one chain in order, passing solutions along as incumbents"""
    previous: Dict[str, Solution] = {}
    rows = []
    for index, p_max, g_min in job.points:
        solved: Dict[str, Solution] = {}
        baseline = run_point(job.cfg, p_max, g_min, "sr_baseline", job.weights,
                             incumbents=_feasible_allocs(previous.get("sr_baseline")))
        solved["sr_baseline"] = baseline
        if "hapc_sr" in job.modes or "hapc" in job.modes:
            solved["hapc_sr"] = run_point(job.cfg, p_max, g_min, "hapc_sr", job.weights,
                                          incumbents=_feasible_allocs(previous.get("hapc_sr")),
                                          baseline=baseline)
        if "hapc" in job.modes:
            solved["hapc"] = run_point(job.cfg, p_max, g_min, "hapc", job.weights,
                                       incumbents=_feasible_allocs(previous.get("hapc"), solved["hapc_sr"]),
                                       baseline=baseline)
        for mode in job.modes:
            rows.append((index, mode, sweep_row(solved[mode], job.axis)))
        logger.info(f"[chain {job.group}] p_max={p_max:g} W, g_min={g_min:g} bits/s: "
                    + ", ".join(f"{m}={solved[m].objective:.6g}" for m in job.modes))
        previous = solved
    return rows


def chain_jobs(spec: SweepSpec) -> List[ChainJob]:
    indexed = list(enumerate(spec.values))
    if spec.axis == "g_min":
        indexed.reverse()
    jobs = []
    for group, fixed_value in enumerate(spec.fixed):
        points = tuple((i, *spec.point(v, fixed_value)) for i, v in indexed)
        jobs.append(ChainJob(cfg=spec.cfg, points=points, modes=spec.modes, weights=spec.weights,
                             axis=spec.axis, group=group))
    return jobs


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

async def run_chains_async(jobs: List[ChainJob], workers: int) -> List[List[Tuple[int, str, Dict[str, Cell]]]]:
    """Chains on a process pool; gather keeps the submission order"""
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, run_chain, job) for job in jobs]
        return await asyncio.gather(*futures)


def sweep_header(spec: SweepSpec) -> List[str]:
    lines = [
        f"preset = {spec.preset or 'custom'}",
        f"axis = {spec.axis}",
        f"{spec.fixed_name} = {', '.join(format_cell(v) for v in spec.fixed)}",
        f"modes = {', '.join(spec.modes)}",
        f"num_devices = {spec.cfg.num_devices}",
    ]
    if spec.scenario_path is not None:
        lines.append(f"scenario_sha256 = {config_digest(spec.scenario_path)}")
    return lines + calibration_header(spec.cfg)


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> SweepResult:
    """One row per (fixed value, axis value, mode); infeasible points stay in the table"""
    workers = workers or settings.WORKERS
    jobs = chain_jobs(spec)
    logger.info(f"Sweep over {spec.axis}: {len(spec.values)} points x {len(spec.fixed)} fixed values "
                f"x {len(spec.modes)} modes, {workers} worker(s)")
    logger.info(f"Spreading factor N={spec.cfg.spreading_factor}, L0={spec.cfg.path_loss_ref_gain:g}, "
                f"kappa={spec.cfg.path_loss_exponent:g}")

    if workers <= 1 or len(jobs) == 1:
        results = [run_chain(job) for job in jobs]
    else:
        results = asyncio.run(run_chains_async(jobs, workers))

    mode_order = {m: i for i, m in enumerate(spec.modes)}
    rows = []
    for chain_rows in results:
        rows.extend(row for _, _, row in sorted(chain_rows, key=lambda item: (item[0], mode_order[item[1]])))

    frame = to_frame(rows, sweep_columns(spec.cfg.num_devices))
    result = SweepResult(spec=spec, frame=frame, header_lines=sweep_header(spec))
    infeasible = len(frame) - result.feasible_rows
    if infeasible:
        logger.warning(f"{infeasible} of {len(frame)} sweep rows are infeasible")
    if spec.output is not None:
        result.write()
    return result


# ----------------------------------------------------------------------------
# Presets
# ----------------------------------------------------------------------------

def p_max_values() -> Tuple[float, ...]:
    low, high = settings.P_MAX_RANGE
    return tuple(float(v) for v in np.logspace(math.log10(low), math.log10(high), settings.P_MAX_POINTS))


def gain_bounds(cfg: NetworkConfig, p_max: float, weights: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """(gain of the unconstrained optimum, largest reachable gain) at one power"""
    g_max = max_rate_gain(ProblemSpec.build(cfg, p_max, 0.0, weights))
    if g_max is None or g_max <= 0.0:
        raise ConfigError(f"no positive rate gain is reachable at p_max = {p_max:g} W")
    g_free = run_point(cfg, p_max, 0.0, "hapc_sr", weights).report.rate_gain
    return min(max(g_free, 0.0), g_max), g_max


def preset_spec(name: str, cfg: NetworkConfig, weights: Optional[Sequence[float]] = None,
                output: Optional[Path] = None, scenario_path: Optional[Path] = None) -> SweepSpec:
    """Preset sweeps; g_min ranges follow the gain the scenario can actually reach"""
    common = dict(cfg=cfg, weights=tuple(weights) if weights else None, output=output,
                  scenario_path=scenario_path, preset=name)
    if name == "fig4a":
        return SweepSpec(axis="p_max", values=p_max_values(), fixed=(settings.G_MIN_FIXED,), **common)
    if name == "fig4b":
        top = settings.G_MIN_RANGE_MAX
        if top is None:
            g_max = max_rate_gain(ProblemSpec.build(cfg, settings.P_MAX_FIXED, 0.0, weights))
            if g_max is None or g_max <= 0.0:
                raise ConfigError(f"no positive rate gain is reachable at p_max = {settings.P_MAX_FIXED:g} W")
            top = settings.G_MIN_AUTO_FRACTION * g_max
            logger.info(f"fig4b: g_min range up to {top:.6g} bits/s ({settings.G_MIN_AUTO_FRACTION:g} of max gain)")
        values = tuple(float(v) for v in np.linspace(0.0, top, settings.G_MIN_POINTS))
        return SweepSpec(axis="g_min", values=values, fixed=(settings.P_MAX_FIXED,), **common)
    if name == "fig4c":
        g_free, g_max = gain_bounds(cfg, settings.P_MAX_FIXED, weights)
        fixed = tuple(g_free + f * (g_max - g_free) for f in settings.BINDING_G_MIN_FRACTIONS)
        logger.info(f"fig4c: g_min values {', '.join(f'{g:.6g}' for g in fixed)} bits/s")
        return SweepSpec(axis="p_max", values=p_max_values(), fixed=fixed, modes=("hapc_sr",), **common)
    raise ConfigError(f"unknown preset {name!r}, expected one of {PRESETS}", key="preset")


# ----------------------------------------------------------------------------
# Self-consistency audit
# ----------------------------------------------------------------------------

def audit(frame: pd.DataFrame, cfg: NetworkConfig, weights: Optional[Sequence[float]] = None) -> List[str]:
    """Re-evaluate every row from its allocation; returns one message per mismatching cell"""
    k_dev = cfg.num_devices
    columns = report_columns(k_dev)
    problems = []
    for index, row in enumerate(frame.to_dict(orient="records")):
        alloc = allocation_from_row(row, k_dev)
        spec = ProblemSpec.build(cfg, alloc.p_src, float(row["g_min"]), weights, paradigm=row["mode"])
        expected = rate_report_row(report_for(spec, alloc))
        for column in columns:
            if format_cell(expected[column]) != row[column]:
                problems.append(f"row {index}: {column} = {row[column]} but re-evaluates to "
                                f"{format_cell(expected[column])}")
    if problems:
        logger.error(f"Audit found {len(problems)} mismatching cells")
    else:
        logger.info(f"Audit passed on {len(frame)} rows")
    return problems

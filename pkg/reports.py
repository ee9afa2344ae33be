"""
Serialization of rate reports and solutions.

A RateReport becomes one CSV row with a fixed column order; a Solution
becomes a `key = value` text block. Floats use the shortest round-trip
representation so tables can be compared byte for byte and read back exactly.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from allocator import Solution
from phy_model import NetworkConfig
from rate_model import CONSTRAINTS, Allocation, RateReport, device_modes
from scenario import calibration_header

Cell = Union[str, float, int, bool]


def format_float(value: float) -> str:
    return repr(float(value))


def format_cell(value: Cell) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def parse_bool(text: str) -> bool:
    return str(text).strip().lower() == "true"


def report_columns(num_devices: int) -> List[str]:
    columns = ["p_max", "g_min", "weighted_sum", "rate_source", "rate_gain"]
    for k in range(1, num_devices + 1):
        columns += [f"rate_{k}", f"harvested_{k}", f"consumed_{k}"]
    columns += ["feasible"] + [c.lower() for c in CONSTRAINTS]
    columns += [f"envelope_{k}" for k in range(1, num_devices + 1)]
    return columns


def allocation_columns(num_devices: int) -> List[str]:
    columns = []
    for name in ("tau_bc", "tau_ac", "alpha", "q"):
        columns += [f"{name}_{k}" for k in range(1, num_devices + 1)]
    return columns


def rate_report_row(report: RateReport) -> Dict[str, Cell]:
    """One CSV row in report_columns order"""
    row: Dict[str, Cell] = {
        "p_max": report.p_src,
        "g_min": report.g_min,
        "weighted_sum": report.weighted_sum,
        "rate_source": report.rate_source,
        "rate_gain": report.rate_gain,
    }
    for k, rate in enumerate(report.rate_device, start=1):
        row[f"rate_{k}"] = rate
        row[f"harvested_{k}"] = report.ledger.harvested_j[k - 1]
        row[f"consumed_{k}"] = report.ledger.consumed_j[k - 1]
    row["feasible"] = report.feasible
    for constraint, ok in report.verdict.flags.items():
        row[constraint.lower()] = ok
    for k, flag in enumerate(report.in_aiot_envelope, start=1):
        row[f"envelope_{k}"] = flag
    return row


def allocation_row(alloc: Allocation) -> Dict[str, Cell]:
    row: Dict[str, Cell] = {}
    for name in ("tau_bc", "tau_ac", "alpha", "q"):
        for k, value in enumerate(getattr(alloc, name), start=1):
            row[f"{name}_{k}"] = value
    return row


def allocation_from_row(row: Dict[str, str], num_devices: int) -> Allocation:
    """Inverse of allocation_row; p_src comes from the p_max column"""
    values = {name: [float(row[f"{name}_{k}"]) for k in range(1, num_devices + 1)]
              for name in ("tau_bc", "tau_ac", "alpha", "q")}
    return Allocation(p_src=float(row["p_max"]), **values)


def solution_block(solution: Solution, cfg: Optional[NetworkConfig] = None) -> str:
    """Structured key = value description of a solution"""
    report = solution.report
    alloc = solution.alloc
    trace = solution.solver_trace
    lines = [
        f"paradigm = {solution.paradigm}",
        f"status = {solution.status}",
        f"objective = {format_float(solution.objective)}",
        f"p_src = {format_float(alloc.p_src)}",
        f"g_min = {format_float(report.g_min)}",
        f"rate_source = {format_float(report.rate_source)}",
        f"rate_source_baseline = {format_float(report.rate_source_baseline)}",
        f"rate_gain = {format_float(report.rate_gain)}",
        f"slack = {format_float(alloc.slack)}",
    ]
    if solution.conflicts:
        lines.append(f"conflicts = {', '.join(solution.conflicts)}")
    if report.verdict.violations:
        lines.append(f"violations = {', '.join(report.verdict.violations)}")
    for k, modes in enumerate(device_modes(alloc)):
        d = k + 1
        lines += [
            f"device_{d}.tau_bc = {format_float(alloc.tau_bc[k])}",
            f"device_{d}.tau_ac = {format_float(alloc.tau_ac[k])}",
            f"device_{d}.alpha = {format_float(alloc.alpha[k])}",
            f"device_{d}.q = {format_float(alloc.q[k])}",
            f"device_{d}.rate = {format_float(report.rate_device[k])}",
            f"device_{d}.harvested = {format_float(report.ledger.harvested_j[k])}",
            f"device_{d}.consumed = {format_float(report.ledger.consumed_j[k])}",
            f"device_{d}.in_envelope = {format_cell(report.in_aiot_envelope[k])}",
            f"device_{d}.mode_eh = {format_float(modes['eh'])}",
            f"device_{d}.mode_bc = {format_float(modes['bc'])}",
            f"device_{d}.mode_ac = {format_float(modes['ac'])}",
        ]
    lines += [
        f"solver.iterations = {trace.iterations}",
        f"solver.lp_solves = {trace.lp_solves}",
        f"solver.starts_screened = {trace.starts_screened}",
        f"solver.starts_refined = {trace.starts_refined}",
    ]
    if cfg is not None:
        lines += calibration_header(cfg)
    return "\n".join(lines) + "\n"


def to_frame(rows: Sequence[Dict[str, Cell]], columns: Sequence[str]) -> pd.DataFrame:
    """All cells pre-formatted as text so the CSV is byte-stable"""
    frame = pd.DataFrame([{c: format_cell(row[c]) for c in columns} for row in rows], columns=list(columns))
    return frame.astype(str)


def render_csv(frame: pd.DataFrame, header_lines: Iterable[str] = ()) -> str:
    comments = "".join(f"# {line}\n" for line in header_lines)
    return comments + frame.to_csv(index=False, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: Union[str, Path], header_lines: Iterable[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(render_csv(frame, header_lines))
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Table written by write_csv, every cell as text"""
    return pd.read_csv(path, comment="#", dtype=str, keep_default_na=False)

"""
Brute-force grid search over every decision variable, used to validate the
allocator on small networks (K <= 3).

The time shares run over the scaled simplex lattice, the reflection
coefficients over a uniform lattice on [0, 1] and the active powers over a
log-warped lattice on [0, q_max] that still contains 0. All three lattices
are nested under n -> 2n - 1, so refining never loses a point.
"""

import itertools
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from loguru import logger

from allocator import STATUS_INFEASIBLE, STATUS_OPTIMAL, ProblemSpec, Solution, SolverTrace, report_for
from config import settings
from errors import GridTooLargeError, OracleError
from phy_model import build_channels
from rate_model import Allocation, schedule_coefficients

MAX_EVALUATIONS = 100_000_000
MAX_DEVICES = 3
Q_DECADES = 3.0
CHUNK = 512
KEEP = 16


@dataclass(frozen=True)
class GridSpec:
    n_tau: int = 9
    n_alpha: int = 9
    n_q: int = 9

    def __post_init__(self):
        for name in ("n_tau", "n_alpha", "n_q"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be at least 2")

    def refined(self) -> "GridSpec":
        """Next nested lattice (odd-point doubling)"""
        return GridSpec(2 * self.n_tau - 1, 2 * self.n_alpha - 1, 2 * self.n_q - 1)


def tau_lattice(num_devices: int, n_tau: int, active: bool = True) -> np.ndarray:
    """All (tau_bc, tau_ac) on the simplex lattice with step 1/(n_tau - 1)"""
    steps = n_tau - 1
    columns = 2 * num_devices if active else num_devices
    points = [c for c in itertools.product(range(steps + 1), repeat=columns) if sum(c) <= steps]
    lattice = np.asarray(points, dtype=float) / steps
    if not active:
        lattice = np.hstack([lattice, np.zeros_like(lattice)])
    return lattice


def alpha_lattice(n_alpha: int) -> np.ndarray:
    return np.arange(n_alpha, dtype=float) / (n_alpha - 1)


def q_lattice(n_q: int, q_max: float) -> np.ndarray:
    """0 .. q_max, log-spaced through a warp so the lattice stays nested"""
    t = np.arange(n_q, dtype=float) / (n_q - 1)
    return q_max * (10.0 ** (Q_DECADES * t) - 1.0) / (10.0 ** Q_DECADES - 1.0)


def grid_size(spec: ProblemSpec, grid: GridSpec) -> int:
    """Number of lattice points, counted without building the lattice"""
    k = spec.num_devices
    columns = 2 * k if spec.allows_active else k
    n_tau_points = math.comb(grid.n_tau - 1 + columns, columns)
    n_q = grid.n_q if spec.allows_active else 1
    return n_tau_points * grid.n_alpha ** k * n_q ** k


def _combos(spec: ProblemSpec, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    k = spec.num_devices
    alphas = np.asarray(list(itertools.product(alpha_lattice(grid.n_alpha), repeat=k)))
    if spec.allows_active:
        per_device = [q_lattice(grid.n_q, spec.q_max[d]) for d in range(k)]
        qs = np.asarray(list(itertools.product(*per_device)))
    else:
        qs = np.zeros((1, k))
    alpha_rows = np.repeat(alphas, len(qs), axis=0)
    q_rows = np.tile(qs, (len(alphas), 1))
    return alpha_rows, q_rows


def grid_search(spec: ProblemSpec, grid: GridSpec = GridSpec()) -> Solution:
    """Exhaustive feasible maximum over the lattice"""
    k_dev = spec.num_devices
    if k_dev > MAX_DEVICES:
        raise OracleError(f"grid search supports at most {MAX_DEVICES} devices, got {k_dev}")
    total = grid_size(spec, grid)
    if total > MAX_EVALUATIONS:
        raise GridTooLargeError(f"{total} grid evaluations exceed the budget of {MAX_EVALUATIONS}")

    ch = build_channels(spec.cfg)
    taus = tau_lattice(k_dev, grid.n_tau, spec.allows_active)
    tau_bc, tau_ac = taus[:, :k_dev], taus[:, k_dev:]
    bc_time = tau_bc.sum(axis=1)
    alpha_rows, q_rows = _combos(spec, grid)
    weights = spec.weights
    tol = settings.FEASIBILITY_TOL
    floor = settings.RATE_FLOOR * (1.0 - tol)
    logger.info(f"Oracle: {len(taus)} schedules x {len(alpha_rows)} (alpha, q) pairs = {total} points")

    # (objective, bc_time, combo index, tau index), best first
    leaders: List[Tuple[float, float, int, int]] = []
    for start in range(0, len(alpha_rows), CHUNK):
        alpha = alpha_rows[start:start + CHUNK]
        q = q_rows[start:start + CHUNK]
        coeffs = schedule_coefficients(spec.cfg, ch, alpha, q, spec.p_max)
        cost_bc, cost_ac = coeffs.energy_rows()

        objective = np.zeros((len(taus), len(alpha)))
        gain = np.zeros_like(objective)
        feasible = np.ones(objective.shape, dtype=bool)
        for k in range(k_dev):
            rate = tau_bc[:, k, None] * coeffs.rate_bc[None, :, k] + tau_ac[:, k, None] * coeffs.rate_ac[None, :, k]
            objective = objective + weights[k] * rate
            gain = gain + tau_bc[:, k, None] * coeffs.gain_bc[None, :, k] + tau_ac[:, k, None] * coeffs.gain_ac[None, :, k]
            spent = tau_bc[:, k, None] * cost_bc[None, :, k] + tau_ac[:, k, None] * cost_ac[None, :, k]
            harvest = float(coeffs.harvest_w[k])
            feasible &= spent <= harvest + tol * max(harvest, coeffs.circuit_bc_w)
            if not spec.relax_rate_floor:
                feasible &= rate >= floor
        if spec.enforces_gain:
            feasible &= gain >= spec.g_min - tol * max(1.0, coeffs.source_idle, spec.g_min)

        if not feasible.any():
            continue
        masked = np.where(feasible, objective, -np.inf)
        flat = np.argsort(-masked, axis=None, kind="stable")[:KEEP]
        for index in flat:
            t, c = np.unravel_index(index, masked.shape)
            if masked[t, c] == -np.inf:
                break
            leaders.append((float(masked[t, c]), float(bc_time[t]), start + int(c), int(t)))
        leaders.sort(key=lambda item: (-item[0], item[1], item[2], item[3]))
        del leaders[KEEP:]

    trace = SolverTrace(starts_screened=total)
    for _, _, combo, t in leaders:
        alloc = Allocation(tau_bc=tau_bc[t], tau_ac=tau_ac[t], alpha=alpha_rows[combo], q=q_rows[combo],
                           p_src=spec.p_max)
        report = report_for(spec, alloc, ch)
        if report.feasible:
            logger.info(f"Oracle best {report.weighted_sum:.6g} bits/s")
            return Solution(alloc=alloc, objective=report.weighted_sum, report=report, status=STATUS_OPTIMAL,
                            solver_trace=trace, paradigm=spec.paradigm)
        logger.warning(f"Oracle candidate rejected on re-evaluation: {report.verdict.violations}")

    logger.warning("Oracle found no feasible grid point")
    alloc = Allocation.idle(k_dev, spec.p_max)
    report = report_for(spec, alloc, ch)
    return Solution(alloc=alloc, objective=-math.inf, report=report, status=STATUS_INFEASIBLE,
                    solver_trace=trace, paradigm=spec.paradigm)


def gap(sol: Solution, oracle_sol: Solution, eps: float = 1e-12) -> float:
    """Relative shortfall of a solution against the oracle; negative when the solution is better"""
    if not sol.feasible or not oracle_sol.feasible:
        raise OracleError("gap is undefined for infeasible solutions")
    return (oracle_sol.objective - sol.objective) / max(oracle_sol.objective, eps)

"""
Weighted sum-rate maximization for the HAPC-enabled SR block.

For fixed reflection coefficients and active powers every constraint and the
objective are affine in the time shares, so the inner problem is an LP that
is solved exactly at a vertex. The outer problem over (alpha, q) is handled by
multi-start block-coordinate ascent with a 1-D grid + bounded golden-section (Brent) search
per coordinate.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import linprog, minimize_scalar

from config import settings
from errors import SolverError
from phy_model import ChannelSet, NetworkConfig, build_channels
from rate_model import (Allocation, FeasibilityVerdict, RateReport, ScheduleCoefficients,
                        evaluate, schedule_coefficients)

PARADIGMS = ("hapc_sr", "sr_baseline", "hapc")

STATUS_OPTIMAL = "optimal-candidate"
STATUS_INFEASIBLE = "infeasible"
STATUS_BASELINE = "baseline-restricted"

# LP rows carry a little headroom over the rate floor so the vertex clears it after rounding
_FLOOR_MARGIN = 1e-6
# stands in for an infeasible point inside the bounded scalar search
_INFEASIBLE_PENALTY = 1e300


@dataclass(frozen=True)
class ProblemSpec:
    cfg: NetworkConfig
    weights: Tuple[float, ...]
    g_min: float
    p_max: float
    q_max: Tuple[float, ...]
    paradigm: str = "hapc_sr"
    relax_rate_floor: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "q_max", tuple(float(v) for v in self.q_max))
        k = self.cfg.num_devices
        if len(self.weights) != k or len(self.q_max) != k:
            raise ValueError(f"weights and q_max need one entry per device (K={k})")
        if any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        if self.g_min < 0:
            raise ValueError(f"g_min must be non-negative, got {self.g_min}")
        # p_max = 0 is accepted so the degenerate point is reported as infeasible
        if self.p_max < 0:
            raise ValueError(f"p_max must be non-negative, got {self.p_max}")
        if self.paradigm not in PARADIGMS:
            raise ValueError(f"unknown paradigm {self.paradigm!r}, expected one of {PARADIGMS}")

    @property
    def num_devices(self) -> int:
        return self.cfg.num_devices

    @property
    def enforces_gain(self) -> bool:
        return self.paradigm != "hapc"

    @property
    def allows_active(self) -> bool:
        return self.paradigm != "sr_baseline"

    @classmethod
    def build(cls, cfg: NetworkConfig, p_max: float, g_min: float = 0.0,
              weights: Optional[Sequence[float]] = None, paradigm: str = "hapc_sr",
              relax_rate_floor: bool = False) -> "ProblemSpec":
        """Problem with default weights (all ones) and the derived device power cap"""
        weights = tuple(weights) if weights is not None else (1.0,) * cfg.num_devices
        return cls(cfg=cfg, weights=weights, g_min=g_min, p_max=p_max,
                   q_max=derive_q_max(cfg, p_max), paradigm=paradigm,
                   relax_rate_floor=relax_rate_floor)

    def restricted(self, paradigm: str) -> "ProblemSpec":
        return ProblemSpec(cfg=self.cfg, weights=self.weights, g_min=self.g_min, p_max=self.p_max,
                           q_max=self.q_max, paradigm=paradigm, relax_rate_floor=self.relax_rate_floor)


def derive_q_max(cfg: NetworkConfig, p_max: float) -> Tuple[float, ...]:
    """Active power cap per device

    The configured cap when present, otherwise the power a device could
    sustain by spending everything it harvests in the shortest useful slot.
    """
    if cfg.device_power_cap_w is not None:
        return (cfg.device_power_cap_w,) * cfg.num_devices
    ch = build_channels(cfg)
    return tuple(cfg.eh_efficiency * p_max * g / settings.MIN_TIME_SHARE for g in ch.g_sd)


@dataclass(frozen=True)
class SolverTrace:
    iterations: int = 0
    lp_solves: int = 0
    objective_history: Tuple[float, ...] = ()
    starts_screened: int = 0
    starts_refined: int = 0

    @property
    def monotone(self) -> bool:
        history = self.objective_history
        return all(b >= a for a, b in zip(history, history[1:]))


@dataclass(frozen=True)
class Solution:
    alloc: Allocation
    objective: float
    report: RateReport
    status: str
    solver_trace: SolverTrace = field(default_factory=SolverTrace)
    paradigm: str = "hapc_sr"
    conflicts: Tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        return self.status != STATUS_INFEASIBLE


@dataclass(frozen=True)
class TimeShareResult:
    feasible: bool
    tau_bc: Tuple[float, ...] = ()
    tau_ac: Tuple[float, ...] = ()
    slack: float = 0.0
    objective: float = -math.inf
    conflicts: Tuple[str, ...] = ()


# ----------------------------------------------------------------------------
# Inner LP in the time shares
# ----------------------------------------------------------------------------

def _lp_rows(spec: ProblemSpec, coeffs: ScheduleCoefficients,
             dropped: FrozenSet[str] = frozenset()) -> Tuple[np.ndarray, np.ndarray, List[Tuple[float, Optional[float]]]]:
    """Scaled inequality rows A x <= b over x = [tau_bc, tau_ac]"""
    k_dev = spec.num_devices
    n = 2 * k_dev
    rows, rhs = [np.ones(n)], [1.0]

    if spec.enforces_gain and "C1" not in dropped:
        gain = np.concatenate([coeffs.gain_bc, coeffs.gain_ac])
        scale = max(1.0, spec.g_min, float(np.max(np.abs(gain))))
        rows.append(-gain / scale)
        rhs.append(-spec.g_min / scale)

    if "C2" not in dropped:
        cost_bc, cost_ac = coeffs.energy_rows()
        for k in range(k_dev):
            scale = max(float(coeffs.harvest_w[k]), coeffs.circuit_bc_w)
            row = np.zeros(n)
            row[k] = cost_bc[k] / scale
            row[k_dev + k] = cost_ac[k] / scale
            rows.append(row)
            rhs.append(float(coeffs.harvest_w[k]) / scale)

    if not spec.relax_rate_floor and "C3" not in dropped:
        floor = settings.RATE_FLOOR * (1.0 + _FLOOR_MARGIN)
        for k in range(k_dev):
            scale = max(float(coeffs.rate_bc[k]), float(coeffs.rate_ac[k]), floor)
            row = np.zeros(n)
            row[k] = -coeffs.rate_bc[k] / scale
            row[k_dev + k] = -coeffs.rate_ac[k] / scale
            rows.append(row)
            rhs.append(-floor / scale)

    ac_bound = (0.0, None) if spec.allows_active else (0.0, 0.0)
    bounds = [(0.0, None)] * k_dev + [ac_bound] * k_dev
    return np.vstack(rows), np.asarray(rhs), bounds


def _linprog(c, a_ub, b_ub, bounds):
    return linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs-ds",
                   options={"primal_feasibility_tolerance": settings.LP_TOLERANCE,
                            "dual_feasibility_tolerance": settings.LP_TOLERANCE})


def _objective_vector(spec: ProblemSpec, coeffs: ScheduleCoefficients) -> np.ndarray:
    w = np.asarray(spec.weights)
    return np.concatenate([w * coeffs.rate_bc, w * coeffs.rate_ac])


def _conflicting_families(spec: ProblemSpec, coeffs: ScheduleCoefficients) -> Tuple[str, ...]:
    """Smallest constraint families whose removal makes the LP feasible"""
    families = [f for f, on in (("C1", spec.enforces_gain), ("C2", True),
                                ("C3", not spec.relax_rate_floor)) if on]
    zero = np.zeros(2 * spec.num_devices)
    for size in range(1, len(families) + 1):
        culprits = set()
        for subset in itertools.combinations(families, size):
            a_ub, b_ub, bounds = _lp_rows(spec, coeffs, frozenset(subset))
            if _linprog(zero, a_ub, b_ub, bounds).status == 0:
                culprits.update(subset)
        if culprits:
            return tuple(sorted(culprits)) + ("C4",)
    return tuple(families) + ("C4",)


def solve_time_shares(spec: ProblemSpec, alpha: Sequence[float], q: Sequence[float],
                      channels: Optional[ChannelSet] = None, tie_break: bool = True,
                      explain: bool = True) -> TimeShareResult:
    """Exact LP optimum over (tau_bc, tau_ac) for fixed alpha and q

    With tie_break on, a second LP picks, among optimal vertices, the one with
    the least BC time.
    """
    ch = channels if channels is not None else build_channels(spec.cfg)
    coeffs = schedule_coefficients(spec.cfg, ch, alpha, q, spec.p_max)
    a_ub, b_ub, bounds = _lp_rows(spec, coeffs)
    objective = _objective_vector(spec, coeffs)
    k_dev = spec.num_devices

    result = _linprog(-objective, a_ub, b_ub, bounds)
    if result.status != 0:
        if result.status not in (2,):
            logger.warning(f"LP ended with status {result.status}: {result.message}")
        conflicts = _conflicting_families(spec, coeffs) if explain else ()
        return TimeShareResult(feasible=False, conflicts=conflicts)

    x = result.x
    best = float(objective @ x)
    if tie_break:
        scale = max(1.0, float(np.max(np.abs(objective))))
        cut = best - 1e-9 * max(1.0, abs(best))
        bc_time = np.concatenate([np.ones(k_dev), np.zeros(k_dev)])
        polished = _linprog(bc_time, np.vstack([a_ub, -objective / scale]),
                            np.append(b_ub, -cut / scale), bounds)
        if polished.status == 0:
            x = polished.x

    x = np.clip(x, 0.0, None)
    tau_bc, tau_ac = x[:k_dev], x[k_dev:]
    return TimeShareResult(
        feasible=True,
        tau_bc=tuple(float(v) for v in tau_bc),
        tau_ac=tuple(float(v) for v in tau_ac),
        slack=float(1.0 - tau_bc.sum() - tau_ac.sum()),
        objective=float(objective @ x),
    )


def max_rate_gain(spec: ProblemSpec) -> Optional[float]:
    """Largest rate gain reachable with full reflection and no active slots

    Returns None when even that schedule violates energy causality or the
    rate floor.
    """
    ch = build_channels(spec.cfg)
    k_dev = spec.num_devices
    restricted = ProblemSpec(cfg=spec.cfg, weights=spec.weights, g_min=0.0, p_max=spec.p_max,
                             q_max=spec.q_max, paradigm="hapc", relax_rate_floor=spec.relax_rate_floor)
    coeffs = schedule_coefficients(spec.cfg, ch, np.ones(k_dev), np.zeros(k_dev), spec.p_max)
    a_ub, b_ub, bounds = _lp_rows(restricted, coeffs)
    bounds = [(0.0, None)] * k_dev + [(0.0, 0.0)] * k_dev
    gain = np.concatenate([coeffs.gain_bc, coeffs.gain_ac])
    result = _linprog(-gain, a_ub, b_ub, bounds)
    if result.status != 0:
        return None
    return float(gain @ np.clip(result.x, 0.0, None))


def check_feasible(spec: ProblemSpec, alloc: Allocation) -> FeasibilityVerdict:
    """C1-C4 verdict of an allocation under a problem"""
    return report_for(spec, alloc).verdict


def report_for(spec: ProblemSpec, alloc: Allocation, channels: Optional[ChannelSet] = None) -> RateReport:
    ch = channels if channels is not None else build_channels(spec.cfg)
    g_min = spec.g_min if spec.enforces_gain else -math.inf
    report = evaluate(spec.cfg, ch, alloc, spec.weights, g_min)
    if not spec.enforces_gain:
        # C1 is not part of this paradigm; keep the requested g_min on record
        report = RateReport(**{**report.__dict__, "g_min": spec.g_min})
    if spec.relax_rate_floor and report.verdict.violated("C3"):
        kept = tuple(v for v in report.verdict.violations if not v.startswith("C3"))
        report = RateReport(**{**report.__dict__,
                               "verdict": FeasibilityVerdict(feasible=not kept, violations=kept)})
    return report


# ----------------------------------------------------------------------------
# Outer block-coordinate ascent
# ----------------------------------------------------------------------------

class BlockCoordinateAscent:
    """Coordinate-wise ascent over (alpha, q) with the exact LP in tau inside"""

    def __init__(self, spec: ProblemSpec, channels: ChannelSet):
        self.spec = spec
        self.channels = channels
        self.lp_solves = 0

    def value(self, alpha: np.ndarray, q: np.ndarray) -> float:
        self.lp_solves += 1
        result = solve_time_shares(self.spec, alpha, q, self.channels, tie_break=False, explain=False)
        return result.objective if result.feasible else -math.inf

    def _coordinates(self) -> List[Tuple[str, int]]:
        coords = []
        for k in range(self.spec.num_devices):
            coords.append(("alpha", k))
            if self.spec.allows_active:
                coords.append(("q", k))
        return coords

    def _line_search(self, alpha: np.ndarray, q: np.ndarray, kind: str, k: int,
                     current: float) -> Tuple[float, float]:
        """Best value of one coordinate; returns (value, position), keeping the incumbent on ties"""
        upper = 1.0 if kind == "alpha" else self.spec.q_max[k]
        start = alpha[k] if kind == "alpha" else q[k]

        def f(v: float) -> float:
            a, b = alpha.copy(), q.copy()
            (a if kind == "alpha" else b)[k] = v
            return self.value(a, b)

        best_v, best_f = start, current
        grid = np.linspace(0.0, upper, settings.LINE_GRID_POINTS)
        values = [f(float(v)) for v in grid]
        for v, fv in zip(grid, values):
            if fv > best_f:
                best_v, best_f = float(v), fv

        i = int(np.argmax(values))
        if values[i] > -math.inf:
            lo = float(grid[max(i - 1, 0)])
            hi = float(grid[min(i + 1, len(grid) - 1)])

            def negated(v: float) -> float:
                nonlocal best_v, best_f
                fv = f(v)
                if fv > best_f:
                    best_v, best_f = v, fv
                return -fv if fv > -math.inf else _INFEASIBLE_PENALTY

            if hi > lo:
                minimize_scalar(negated, bounds=(lo, hi), method="bounded",
                                options={"maxiter": settings.GOLDEN_ITERS, "xatol": 1e-9 * max(upper, 1e-12)})
        return best_f, best_v

    def run(self, alpha0: Sequence[float], q0: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, List[float], int]:
        alpha = np.asarray(alpha0, dtype=float).copy()
        q = np.asarray(q0, dtype=float).copy()
        current = self.value(alpha, q)
        history = [current]
        iterations = 0

        for iterations in range(1, settings.OUTER_MAX_ITER + 1):
            previous = current
            for kind, k in self._coordinates():
                value, position = self._line_search(alpha, q, kind, k, current)
                if value > current:
                    (alpha if kind == "alpha" else q)[k] = position
                    current = value
            history.append(current)
            if current < previous:
                raise SolverError(f"objective decreased from {previous} to {current}")
            if current == -math.inf:
                break
            if previous > -math.inf and current - previous <= settings.OUTER_REL_TOL * max(abs(previous), 1e-300):
                break

        logger.debug(f"BCA converged after {iterations} sweeps at {current:.6g} bits/s")
        return alpha, q, history, iterations


def _start_points(spec: ProblemSpec) -> List[Tuple[Tuple[float, ...], Tuple[float, ...]]]:
    """Seed grid of (alpha, q): full product for K <= 2, shared seeds otherwise"""
    fractions = settings.START_Q_FRACTIONS if spec.allows_active else (0.0,)
    per_device = [[(a, f * spec.q_max[k]) for a in settings.START_ALPHAS for f in fractions]
                  for k in range(spec.num_devices)]
    if spec.num_devices <= 2:
        combos = itertools.product(*per_device)
    else:
        combos = (tuple(options[i] for options in per_device) for i in range(len(per_device[0])))
    starts = []
    for combo in combos:
        starts.append((tuple(a for a, _ in combo), tuple(v for _, v in combo)))
    return starts


def _infeasible_solution(spec: ProblemSpec, channels: ChannelSet, trace: SolverTrace,
                         conflicts: Tuple[str, ...]) -> Solution:
    alloc = Allocation.idle(spec.num_devices, spec.p_max)
    report = report_for(spec, alloc, channels)
    return Solution(alloc=alloc, objective=-math.inf, report=report, status=STATUS_INFEASIBLE,
                    solver_trace=trace, paradigm=spec.paradigm, conflicts=conflicts)


def _rank_key(solution: Solution) -> Tuple[float, float]:
    return (-solution.objective, sum(solution.alloc.tau_bc))


def _solve(spec: ProblemSpec, incumbents: Iterable[Allocation] = ()) -> Solution:
    channels = build_channels(spec.cfg)
    status = STATUS_BASELINE if spec.paradigm == "sr_baseline" else STATUS_OPTIMAL
    incumbents = [inc for inc in incumbents if inc.num_devices == spec.num_devices]

    bca = BlockCoordinateAscent(spec, channels)
    starts = _start_points(spec)
    screened = [(bca.value(np.asarray(a), np.asarray(q)), i) for i, (a, q) in enumerate(starts)]
    feasible_starts = [(v, i) for v, i in screened if v > -math.inf]
    feasible_starts.sort(key=lambda item: (-item[0], item[1]))
    chosen = [starts[i] for _, i in feasible_starts[:settings.SCREEN_KEEP]]

    for inc in incumbents:
        q = inc.q if spec.allows_active else (0.0,) * spec.num_devices
        seed = (inc.alpha, tuple(min(v, cap) for v, cap in zip(q, spec.q_max)))
        if seed not in chosen:
            chosen.append(seed)

    logger.debug(f"[{spec.paradigm}] screened {len(starts)} starts, {len(feasible_starts)} feasible, "
                 f"refining {len(chosen)}")

    candidates: List[Solution] = []
    history: List[float] = []
    iterations = 0
    for alpha0, q0 in chosen:
        alpha, q, run_history, run_iterations = bca.run(alpha0, q0)
        iterations += run_iterations
        if not history or run_history[-1] > history[-1]:
            history = run_history
        shares = solve_time_shares(spec, alpha, q, channels, tie_break=True, explain=False)
        bca.lp_solves += 2
        if not shares.feasible:
            continue
        alloc = Allocation(tau_bc=shares.tau_bc, tau_ac=shares.tau_ac, alpha=alpha, q=q, p_src=spec.p_max)
        report = report_for(spec, alloc, channels)
        if report.feasible:
            candidates.append(Solution(alloc=alloc, objective=report.weighted_sum, report=report,
                                       status=status, paradigm=spec.paradigm))
        else:
            logger.warning(f"LP point failed re-evaluation: {report.verdict.violations}")

    for inc in incumbents:
        alloc = Allocation(tau_bc=inc.tau_bc, tau_ac=inc.tau_ac, alpha=inc.alpha, q=inc.q, p_src=spec.p_max)
        if not spec.allows_active and (any(alloc.tau_ac) or any(alloc.q)):
            continue
        report = report_for(spec, alloc, channels)
        if report.feasible:
            candidates.append(Solution(alloc=alloc, objective=report.weighted_sum, report=report,
                                       status=status, paradigm=spec.paradigm))

    trace = SolverTrace(iterations=iterations, lp_solves=bca.lp_solves, objective_history=tuple(history),
                        starts_screened=len(starts), starts_refined=len(chosen))
    if not trace.monotone:
        raise SolverError("block-coordinate trace is not monotone")

    if not candidates:
        full_reflection = ((1.0,) * spec.num_devices, (0.0,) * spec.num_devices)
        result = solve_time_shares(spec, *full_reflection, channels=channels, tie_break=False)
        logger.warning(f"[{spec.paradigm}] no feasible point at p_max={spec.p_max:g} W, "
                       f"g_min={spec.g_min:g} bits/s; conflicts {result.conflicts}")
        return _infeasible_solution(spec, channels, trace, result.conflicts)

    best = min(enumerate(candidates), key=lambda item: (_rank_key(item[1]), item[0]))[1]
    logger.debug(f"[{spec.paradigm}] objective {best.objective:.6g} bits/s after {trace.lp_solves} LPs")
    return Solution(alloc=best.alloc, objective=best.objective, report=best.report, status=best.status,
                    solver_trace=trace, paradigm=spec.paradigm)


def optimize_sr_baseline(spec: ProblemSpec, incumbents: Iterable[Allocation] = ()) -> Solution:
    """Traditional SR: devices only backscatter (tau_ac = 0, q = 0)"""
    return _solve(spec.restricted("sr_baseline"), incumbents)


def optimize(spec: ProblemSpec, incumbents: Iterable[Allocation] = (),
             baseline: Optional[Solution] = None) -> Solution:
    """Multi-start block-coordinate ascent for the weighted sum rate

    The traditional-SR optimum always competes as an incumbent, so the result
    never falls below the restricted problem. Pass a precomputed baseline to
    skip solving it again.
    """
    if spec.paradigm == "sr_baseline":
        return optimize_sr_baseline(spec, incumbents)
    incumbents = list(incumbents)
    if baseline is None:
        baseline = optimize_sr_baseline(spec)
    if baseline.feasible:
        incumbents.append(baseline.alloc)
    return _solve(spec, incumbents)


def solution_summary(solution: Solution) -> Dict[str, float]:
    return {
        "objective": solution.objective,
        "rate_gain": solution.report.rate_gain,
        "lp_solves": solution.solver_trace.lp_solves,
        "iterations": solution.solver_trace.iterations,
    }

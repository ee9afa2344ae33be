#!/usr/bin/env python3
"""
Symbiotic Radio Simulator
Rate model, optimizer and sweep presets for HAPC-enabled symbiotic radio
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from loguru import logger

from allocator import ProblemSpec, report_for
from config import ensure_directories, settings
from errors import ChannelError, ConfigError, OracleError
from experiments import PRESETS, SweepSpec, audit, preset_spec, run_point, run_sweep, sweep_columns, sweep_row
from oracle import GridSpec, gap, grid_search
from phy_model import NetworkConfig
from rate_model import Allocation
from reports import rate_report_row, render_csv, report_columns, solution_block, to_frame, write_csv
from results_manager import ResultsManager
from scenario import calibration_header, load_config, reference_scenario

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_CONFIG = 2

def setup_logging():
    """Setup logging configuration"""
    ensure_directories()
    logger.remove()  # Remove default handler
    logger.add(
        sys.stdout,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>",
        level="INFO"
    )
    logger.add(
        settings.LOGS_DIR / "srsim.log",
        rotation="1 day",
        retention="30 days",
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
        level="DEBUG"
    )

def parse_floats(text: Optional[str], name: str) -> Optional[Tuple[float, ...]]:
    """Comma-separated list of numbers"""
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"--{name} expects comma-separated numbers, got {text!r}", key=name) from e

def load_scenario(path: Optional[str]) -> Tuple[NetworkConfig, Optional[Path]]:
    """Scenario from --config, the default file, or the built-in reference scenario"""
    if path is not None:
        return load_config(path)[0], Path(path)
    if settings.DEFAULT_SCENARIO.exists():
        return load_config(settings.DEFAULT_SCENARIO)[0], settings.DEFAULT_SCENARIO
    logger.warning(f"{settings.DEFAULT_SCENARIO} not found, using the built-in reference scenario")
    return reference_scenario(), None

def evaluate_rates(args, cfg: NetworkConfig) -> int:
    """Evaluate a given allocation"""
    k = cfg.num_devices
    vectors = {name: parse_floats(getattr(args, name), name.replace("_", "-"))
               for name in ("tau_bc", "tau_ac", "alpha", "q")}
    defaults = {"tau_bc": (0.0,) * k, "tau_ac": (0.0,) * k, "alpha": (0.0,) * k, "q": (0.0,) * k}
    values = {name: vectors[name] if vectors[name] is not None else defaults[name] for name in vectors}
    if any(len(v) != k for v in values.values()):
        raise ConfigError(f"allocation vectors need {k} entries each")

    p_max = args.p_max if args.p_max is not None else settings.P_MAX_FIXED
    spec = ProblemSpec.build(cfg, p_max, args.g_min, parse_floats(args.weights, "weights"))
    report = report_for(spec, Allocation(p_src=p_max, **values))

    print("\n" + "="*50)
    print("RATE REPORT")
    print("="*50)
    print(render_csv(to_frame([rate_report_row(report)], report_columns(k)), calibration_header(cfg)), end="")
    if report.verdict.violations:
        print(f"Violations: {', '.join(report.verdict.violations)}")
    print("="*50)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE

def optimize_point(args, cfg: NetworkConfig) -> int:
    """Optimize a single (p_max, g_min) point"""
    p_max = args.p_max if args.p_max is not None else settings.P_MAX_FIXED
    mode = args.mode or "hapc_sr"
    solution = run_point(cfg, p_max, args.g_min, mode, parse_floats(args.weights, "weights"))

    print("\n" + "="*50)
    print(f"OPTIMIZED ALLOCATION ({mode})")
    print("="*50)
    print(solution_block(solution, cfg), end="")
    print("="*50)

    if args.out:
        frame = to_frame([sweep_row(solution, "p_max")], sweep_columns(cfg.num_devices))
        write_csv(frame, args.out, calibration_header(cfg))
    return EXIT_OK if solution.feasible else EXIT_INFEASIBLE

def build_sweep(args, cfg: NetworkConfig, scenario_path: Optional[Path]) -> SweepSpec:
    weights = parse_floats(args.weights, "weights")
    if args.preset:
        out = Path(args.out) if args.out else settings.RESULTS_DIR / f"{args.preset}.csv"
        return preset_spec(args.preset, cfg, weights, out, scenario_path)
    if not args.axis or not args.values:
        raise ConfigError("sweep needs --preset or both --axis and --values")
    fixed = parse_floats(args.fixed, "fixed")
    if fixed is None:
        fixed = (settings.G_MIN_FIXED,) if args.axis == "p_max" else (settings.P_MAX_FIXED,)
    modes = tuple(m.strip() for m in args.mode.split(",")) if args.mode else ("hapc_sr", "sr_baseline")
    out = Path(args.out) if args.out else settings.RESULTS_DIR / f"sweep_{args.axis}.csv"
    return SweepSpec(cfg=cfg, axis=args.axis, values=parse_floats(args.values, "values"), fixed=fixed,
                     modes=modes, weights=weights, output=out, scenario_path=scenario_path)

def run_sweep_command(args, cfg: NetworkConfig, scenario_path: Optional[Path]) -> int:
    """Run a preset or custom sweep"""
    spec = build_sweep(args, cfg, scenario_path)
    result = run_sweep(spec, args.workers)

    print("\n" + "="*50)
    print(f"SWEEP {spec.preset or spec.axis}")
    print("="*50)
    print(f"Rows: {len(result.frame)}")
    print(f"Feasible rows: {result.feasible_rows}")
    print(f"Output: {spec.output}")

    if args.audit:
        problems = audit(result.frame, cfg, spec.weights)
        print(f"Audit: {'passed' if not problems else f'{len(problems)} mismatches'}")
        for problem in problems[:20]:
            print(f"  {problem}")
    if args.store:
        run_id = ResultsManager().save_sweep(result)
        print(f"Stored as run {run_id}")
    print("="*50)
    return EXIT_INFEASIBLE if result.all_infeasible else EXIT_OK

def run_oracle(args, cfg: NetworkConfig) -> int:
    """Compare the optimizer against an exhaustive grid search"""
    p_max = args.p_max if args.p_max is not None else settings.P_MAX_FIXED
    mode = args.mode or "hapc_sr"
    defaults = GridSpec()
    grid = GridSpec(args.n_tau or defaults.n_tau, args.n_alpha or defaults.n_alpha, args.n_q or defaults.n_q)
    weights = parse_floats(args.weights, "weights")

    spec = ProblemSpec.build(cfg, p_max, args.g_min, weights, paradigm=mode)
    oracle_solution = grid_search(spec, grid)
    solution = run_point(cfg, p_max, args.g_min, mode, weights)

    print("\n" + "="*50)
    print("ORACLE COMPARISON")
    print("="*50)
    print(f"Grid: n_tau={grid.n_tau}, n_alpha={grid.n_alpha}, n_q={grid.n_q}")
    print(f"Optimizer objective: {solution.objective!r}")
    print(f"Oracle objective: {oracle_solution.objective!r}")
    if solution.feasible and oracle_solution.feasible:
        print(f"Gap: {gap(solution, oracle_solution):.3%}")
    else:
        print("Gap: undefined (infeasible)")
    print("="*50)
    return EXIT_OK if solution.feasible or oracle_solution.feasible else EXIT_INFEASIBLE

def show_history(args) -> int:
    """List stored sweep runs or print one run"""
    manager = ResultsManager()
    if args.run is None:
        stats = manager.get_database_stats()
        print("\n" + "="*50)
        print("STORED SWEEPS")
        print("="*50)
        print(f"Total Runs: {stats['total_runs']}")
        print(f"Total Points: {stats['total_points']} ({stats['feasible_points']} feasible)")
        print(f"Presets: {stats['presets']}")
        runs = manager.get_runs()
        if not runs.empty:
            print(runs.to_string(index=False))
        print("="*50)
        return EXIT_OK

    rows = manager.get_run_rows(args.run)
    if rows is None:
        print(f"No stored run with id {args.run}")
        return EXIT_CONFIG
    print(rows.to_csv(index=False, lineterminator="\n"), end="")
    return EXIT_OK

def main(argv: Optional[List[str]] = None) -> int:
    """Main function with command-line interface"""
    parser = argparse.ArgumentParser(description="Symbiotic Radio Simulator")
    parser.add_argument("command", choices=[
        "rates", "optimize", "sweep", "oracle", "history"
    ], help="Command to execute")

    parser.add_argument("--config", type=str, help="Scenario file (default: scenarios/reference.conf)")
    parser.add_argument("--out", type=str, help="CSV output path")
    parser.add_argument("--audit", action="store_true", help="Re-evaluate every sweep row")
    parser.add_argument("--seed", type=int, default=0, help="Reserved for fading; the model is deterministic")
    parser.add_argument("--workers", type=int, help="Worker processes for sweeps")
    parser.add_argument("--p-max", type=float, help="Ambient source power in W")
    parser.add_argument("--g-min", type=float, default=0.0, help="Minimum rate gain in bits/s")
    parser.add_argument("--weights", type=str, help="Comma-separated device weights")
    parser.add_argument("--mode", type=str, help="hapc_sr, sr_baseline or hapc (comma list for sweeps)")
    parser.add_argument("--preset", choices=PRESETS, help="Sweep preset")
    parser.add_argument("--axis", choices=["p_max", "g_min"], help="Sweep axis")
    parser.add_argument("--values", type=str, help="Comma-separated axis values")
    parser.add_argument("--fixed", type=str, help="Comma-separated values of the other parameter")
    parser.add_argument("--tau-bc", type=str, help="BC time shares")
    parser.add_argument("--tau-ac", type=str, help="AC time shares")
    parser.add_argument("--alpha", type=str, help="Reflection coefficients")
    parser.add_argument("--q", type=str, help="Active transmit powers in W")
    parser.add_argument("--store", action="store_true", help="Archive the sweep in the results database")
    parser.add_argument("--run", type=int, help="Stored run id for history")
    parser.add_argument("--n-tau", type=int, help="Oracle time-share lattice points")
    parser.add_argument("--n-alpha", type=int, help="Oracle reflection lattice points")
    parser.add_argument("--n-q", type=int, help="Oracle power lattice points")

    args = parser.parse_args(argv)

    # Setup logging
    setup_logging()
    if args.seed:
        logger.debug(f"Seed {args.seed} ignored: no stochastic component is enabled")

    try:
        if args.command == "history":
            return show_history(args)

        cfg, scenario_path = load_scenario(args.config)

        if args.command == "rates":
            return evaluate_rates(args, cfg)

        elif args.command == "optimize":
            return optimize_point(args, cfg)

        elif args.command == "sweep":
            return run_sweep_command(args, cfg, scenario_path)

        elif args.command == "oracle":
            return run_oracle(args, cfg)

    except (ConfigError, ChannelError, OracleError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG

    return EXIT_OK

if __name__ == "__main__":
    sys.exit(main())

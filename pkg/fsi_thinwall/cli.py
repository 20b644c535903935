"""Command-line entry point of the verification studies and the benchmark."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from fsi_thinwall import __version__
from fsi_thinwall.bench import run_bench
from fsi_thinwall.config import ConfigError, SimConfig, config_summary
from fsi_thinwall.forms import ELEMENT_ORDERS, ELEMENT_PAIRS
from fsi_thinwall.io import write_csv, write_manifest
from fsi_thinwall.mms import (
    BOUNDARY_CONDITIONS,
    ConvergenceResult,
    LevelSpec,
    build_level_operators,
    check_orders,
    compare_monolithic,
    convergence_study,
    projection_study,
    ritz_study,
)
from fsi_thinwall.scheme import STRUCTURE_ENDS, ZeroProblem, create_stepper, stability_run
from fsi_thinwall.utils import ensure_output_dir, setup_logging

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("convergence", "stability", "ritz", "project", "bench", "compare-monolithic")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

PRIMARY_COLUMNS = ["h", "tau", "err_u_L2", "err_p_L2", "err_eta_L2Sigma", "err_eta_s"]

StudyOutcome = Tuple[List[Path], List[str]]


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=str, help="Path to YAML configuration file")
    parent.add_argument(
        "--element", choices=sorted(ELEMENT_PAIRS), help="Element pair (overrides config file)"
    )
    parent.add_argument("--bc", choices=BOUNDARY_CONDITIONS, help="Side boundary conditions")
    parent.add_argument("--structure-ends", choices=STRUCTURE_ENDS, help="Structure end conditions")
    parent.add_argument("--levels", type=int, help="Number of refinement levels")
    parent.add_argument(
        "--base-level", type=int, help="Cells across the unit height on the coarsest level"
    )
    parent.add_argument("--beta", type=float, help="Traction stabilization parameter")
    parent.add_argument("--tau", type=float, help="Time step (fixed)")
    parent.add_argument("--T", type=float, help="Final time")
    parent.add_argument("--h", type=float, help="Mesh size of single-level runs")
    parent.add_argument("--steps", type=int, help="Number of time steps of the stability run")
    parent.add_argument("--M", type=int, help="Benchmark mesh level (mesh 10M x M)")
    parent.add_argument("--output-dir", type=str, help="Directory for output files")
    parent.add_argument(
        "--check", action="store_true", help="Exit with code 2 if acceptance checks fail"
    )
    parent.add_argument("--jobs", type=int, help="Worker processes for independent levels")
    parent.add_argument("--seed", type=int, help="Seed of randomized checks")
    parent.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level",
    )
    parent.add_argument("--log-file", type=str, help="Optional log file")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsi-thinwall",
        description="Partitioned fluid/thin-structure solver and verification studies",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    parent = _common_options()
    helps = {
        "convergence": "Manufactured-solution convergence study",
        "stability": "Energy monitor from random data without sources",
        "ritz": "Coupled Ritz projection and initial-value rates",
        "project": "Dirichlet Stokes-Ritz rates and NtD symmetry",
        "bench": "Pressure-wave benchmark",
        "compare-monolithic": "Partitioned vs monolithic distance in tau",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[parent], help=helps[name])
    return parser


def load_config(args: argparse.Namespace) -> SimConfig:
    """Config file first, then explicit flags."""
    config = SimConfig.from_yaml(args.config) if args.config else SimConfig()
    overrides: Dict[str, Any] = {
        "discretization.element": args.element,
        "discretization.bc": args.bc,
        "discretization.structure_ends": args.structure_ends,
        "discretization.levels": args.levels,
        "discretization.base_level": args.base_level,
        "discretization.beta": args.beta,
        "discretization.T": args.T,
        "output_dir": args.output_dir,
        "jobs": args.jobs,
        "seed": args.seed,
        "log_level": args.log_level,
    }
    if args.command == "convergence" and args.tau is not None:
        overrides["discretization.tau_rule"] = f"fixed:{args.tau}"
    if args.command == "bench":
        overrides.update(
            {
                "bench.M": args.M,
                "bench.tau": args.tau,
                "bench.beta": args.beta,
                "bench.element": args.element,
                "bench.structure_ends": args.structure_ends,
            }
        )
    return config.apply_overrides(overrides)


def _level_options(config: SimConfig) -> Dict[str, Any]:
    q = config.quadrature
    return {
        "structure_ends": config.discretization.structure_ends,
        "edge_points": q.edge_points,
        "volume_degree": q.volume_degree,
        "load_degree": q.load_degree,
        "pivot_tol": config.tolerances.singular_pivot,
    }


def _ordered(table: pd.DataFrame) -> pd.DataFrame:
    primary = [c for c in PRIMARY_COLUMNS if c in table]
    orders = [f"order_{c}" for c in primary if f"order_{c}" in table]
    rest = [c for c in table.columns if c not in primary and c not in orders]
    return table[primary + orders + rest]


def _write_result(result: ConvergenceResult, out: Path, stem: str) -> List[Path]:
    return [
        write_csv(_ordered(result.table), out / f"{stem}.csv"),
        write_csv(result.rates, out / f"{stem}_rates.csv"),
    ]


def _slope_check(result: ConvergenceResult, column: str, expected: float, tol: float) -> List[str]:
    rates = result.rates.set_index("column")
    if column not in rates.index:
        return [f"{column}: no rate computed"]
    slope = float(rates.loc[column, "slope"])
    if len(result.table) == 2:
        slope = float(rates.loc[column, "last_pair"])
    if not abs(slope - expected) <= tol:
        return [f"{column}: order {slope:.3f} outside {expected:.2f} +- {tol:.2f}"]
    return []


def run_convergence(config: SimConfig, args: argparse.Namespace, out: Path) -> StudyOutcome:
    d = config.discretization
    for line in config_summary(config):
        logger.info(line)
    result = convergence_study(
        d.element,
        d.bc,
        d.levels,
        d.beta,
        T=d.T,
        tau_rule=d.tau_for,
        base_level=d.base_level,
        params=config.physical_params(),
        jobs=config.jobs,
        record_max_errors=config.record_max_errors,
        pressure_gauge=config.pressure_gauge,
        **_level_options(config),
    )
    failures = check_orders(result, d.element, d.bc) if args.check else []
    return _write_result(result, out, "convergence"), failures


def run_stability(config: SimConfig, args: argparse.Namespace, out: Path) -> StudyOutcome:
    d = config.discretization
    tau = args.tau if args.tau is not None else 0.1
    h = args.h if args.h is not None else 1.0 / 16
    steps = args.steps if args.steps is not None else 200
    M = max(1, int(round(1.0 / h)))
    params = config.physical_params()
    spec = LevelSpec(
        M=M,
        tau=tau,
        T=tau * steps,
        element=d.element,
        bc=d.bc,
        params=params,
        **_level_options(config),
    )
    ops = build_level_operators(spec)
    stepper = create_stepper(
        "partitioned",
        ops,
        params,
        tau,
        ZeroProblem(),
        structure_ends=d.structure_ends,
        pressure_gauge=config.pressure_gauge,
        pivot_tol=config.tolerances.singular_pivot,
    )
    monitor = stability_run(stepper, steps, seed=config.seed, rtol=config.tolerances.stability_rtol)
    path = write_csv(
        monitor.rows(),
        out / "energy.csv",
        ["step", "time", "E0", "E1", "beta0", "per_step_residual", "monolithic"],
    )
    failures = []
    if args.check and not monitor.stable:
        failures.append(f"energy residual above tolerance at steps {monitor.violations[:10]}")
    return [path], failures


def run_ritz(config: SimConfig, args: argparse.Namespace, out: Path) -> StudyOutcome:
    d = config.discretization
    base = args.base_level if args.base_level is not None else 4
    result = ritz_study(
        d.element,
        d.bc,
        d.levels,
        base,
        T=d.T,
        params=config.physical_params(),
        jobs=config.jobs,
        **_level_options(config),
    )
    failures: List[str] = []
    if args.check:
        r = ELEMENT_ORDERS[d.element]
        failures += _slope_check(result, "err_ritz_combined", r + 1, 0.3)
        failures += _slope_check(result, "err_superclose_H1Sigma", r + 1, 0.4)
        worst = float(result.table["divergence_residual"].max())
        if worst > config.tolerances.stability_rtol:
            failures.append(f"divergence constraint residual {worst:.3e} above tolerance")
    return _write_result(result, out, "ritz"), failures


def run_project(config: SimConfig, args: argparse.Namespace, out: Path) -> StudyOutcome:
    d = config.discretization
    base = args.base_level if args.base_level is not None else 4
    result = projection_study(
        d.element,
        d.bc,
        d.levels,
        base,
        seed=config.seed,
        params=config.physical_params(),
        jobs=config.jobs,
        **_level_options(config),
    )
    failures: List[str] = []
    if args.check:
        r = ELEMENT_ORDERS[d.element]
        failures += _slope_check(result, "err_RhD_u_L2", r + 1, 0.3)
        failures += _slope_check(result, "err_RhD_energy", r, 0.3)
        asym = float(result.table["ntd_asymmetry"].max())
        if asym > config.tolerances.ntd_symmetry:
            failures.append(f"NtD asymmetry {asym:.3e} above {config.tolerances.ntd_symmetry:.1e}")
        if float(result.table["ntd_min_quadratic"].min()) <= 0:
            failures.append("NtD quadratic form not positive on the sampled loads")
    return _write_result(result, out, "projection"), failures


def run_bench_command(config: SimConfig, args: argparse.Namespace, out: Path) -> StudyOutcome:
    result = run_bench(config.bench, str(out))
    failures: List[str] = []
    if args.check and not result.analysis.passed:
        failures.append(
            f"wave diagnostics failed: peaks increasing={result.analysis.peaks_increasing}, "
            f"negative after reflection={result.analysis.negative_after_reflection}"
        )
    return result.outputs, failures


def run_compare(config: SimConfig, args: argparse.Namespace, out: Path) -> StudyOutcome:
    d = config.discretization
    tau0 = args.tau if args.tau is not None else 1e-2
    h = args.h if args.h is not None else 1.0 / 16
    taus = [tau0 / 2**k for k in range(d.levels)]
    options = _level_options(config)
    result = compare_monolithic(
        taus,
        M=max(1, int(round(1.0 / h))),
        T=d.T,
        element=d.element,
        bc=d.bc,
        beta=d.beta,
        params=config.physical_params(),
        **options,
    )
    failures: List[str] = []
    if args.check:
        order = result.last_orders().get("diff_u_L2", float("nan"))
        if not abs(order - 1.0) <= 0.4:
            failures.append(f"partitioned/monolithic distance order {order:.3f} outside 1.0 +- 0.4")
    return _write_result(result, out, "compare_monolithic"), failures


COMMANDS: Dict[str, Callable[[SimConfig, argparse.Namespace, Path], StudyOutcome]] = {
    "convergence": run_convergence,
    "stability": run_stability,
    "ritz": run_ritz,
    "project": run_project,
    "bench": run_bench_command,
    "compare-monolithic": run_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point.

    Returns:
        0 on success, 1 on errors, 2 when ``--check`` finds failed acceptance checks
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args)
    except (ConfigError, FileNotFoundError) as e:
        setup_logging(args.log_level or "INFO", args.log_file)
        logger.error(f"Cannot load configuration: {e}")
        return EXIT_ERROR
    setup_logging(config.log_level, args.log_file)

    try:
        out = ensure_output_dir(config.output_dir)
        logger.info(f"Running '{args.command}' into {out}")
        outputs, failures = COMMANDS[args.command](config, args, out)
        config_path = out / "config.yaml"
        config.save(str(config_path))
        write_manifest(out, args.command, config.to_dict(), [*outputs, config_path], __version__)
    except Exception as e:
        logger.error(f"'{args.command}' failed: {e}", exc_info=True)
        return EXIT_ERROR

    if failures:
        for failure in failures:
            logger.error(f"Check failed: {failure}")
        return EXIT_CHECK_FAILED
    logger.info(f"'{args.command}' finished with {len(outputs)} output files")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

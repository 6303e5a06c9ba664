#!/usr/bin/env python3
"""ringsolve - spiral block elimination for grid conduction networks.

Usage:
    # Write a random 100 x 100 network
    ringsolve assemble --m 100 --seed 1 --out net.json

    # Interior temperatures for it
    ringsolve solve --network net.json --out solution.csv

    # Boundary potentials only, with the tessellation of the boundary operator
    ringsolve solve --network net.json --mode boundary --out ring.csv --dump-tree tree.json

    # Scaling and error runs
    ringsolve bench --sizes 50 100 200 --seeds 1 2 3 --out results/

    # Self-check
    ringsolve verify --level quick

Exit codes: 0 success, 1 unexpected internal error, 2 invalid arguments,
configuration or input file, 3 numerical failure (singular Schur complement,
CG without convergence, failed verification check).
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional

import configargparse
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from ringsolve_core import (
    BoundaryOperator,
    GridNetwork,
    NetworkFileError,
    NoConvergenceError,
    ParameterError,
    ShapeMismatchError,
    SingularMatrixError,
    SizeGuardError,
    SweepMode,
    apply_boundary_solve,
    assemble_blocks,
    back_substitute,
    build_grid,
    hss_to_tree,
    read_network,
    sweep_hss,
    write_network,
)
from ringsolve_core.hss import HssMatrix

from .bench import bench_config_from_settings, cmd_bench
from .config import Settings, get_config_file_path
from .models import VerifyLevel
from .reports import report_table, scaling_slopes, write_csv, write_jsonl, write_plot_data
from .verify import cmd_verify
from .version import __version__

logger = logging.getLogger(__name__)

console = Console()

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def print_success(message: str) -> None:
    """Print a success message in green."""
    console.print(f"[green]✓[/green] {message}")


def print_error(message: str) -> None:
    """Print an error message in red."""
    console.print(f"[red]✗[/red] {message}")


def print_warning(message: str) -> None:
    """Print a warning message in yellow."""
    console.print(f"[yellow]![/yellow] {message}")


def print_info(message: str) -> None:
    """Print an info message in blue."""
    console.print(f"[blue]→[/blue] {message}")


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def load_boundary_temps(path: Path, m: int) -> np.ndarray:
    """Read 4(m+1) boundary temperatures, one per line or comma separated.

    Raises:
        NetworkFileError: If the file cannot be parsed or has the wrong length
    """
    try:
        temps = np.loadtxt(path, delimiter=",", ndmin=1, dtype=np.float64).ravel()
    except (OSError, ValueError) as e:
        raise NetworkFileError(str(path), str(e)) from e
    expected = 4 * (m + 1)
    if temps.size != expected:
        raise NetworkFileError(
            str(path), f"expected {expected} boundary temperatures for m={m}, got {temps.size}"
        )
    return temps


def write_solution(path: Path, coords: np.ndarray, values: np.ndarray) -> Path:
    """CSV of interior coordinates and temperatures; floats are written exactly."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["row", "col", "temperature"])
        for (r, c), value in zip(coords.tolist(), values.tolist()):
            writer.writerow([r, c, repr(value)])
    return path


def cmd_assemble(args: argparse.Namespace, settings: Settings) -> int:
    """Write a random network file."""
    cond_low = args.cond_low if args.cond_low is not None else settings.grid_cond_low
    cond_high = args.cond_high if args.cond_high is not None else settings.grid_cond_high
    g = build_grid(args.m, args.seed, cond_low, cond_high, boundary_temps=args.boundary_temp)
    path = write_network(g, args.out)
    print_success(f"Wrote m={g.m} network ({g.n_interior} nodes) to {path}")
    return EXIT_OK


def _write_tree(path: Path, inverse: object) -> None:
    if not isinstance(inverse, HssMatrix):
        print_warning("Outer ring is small enough to stay dense; no tessellation to dump")
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(hss_to_tree(inverse), indent=2) + "\n")
    print_info(f"Tessellation written to {path}")


def cmd_solve(args: argparse.Namespace, settings: Settings) -> int:
    """Solve a network file for interior or boundary temperatures."""
    g: GridNetwork = read_network(args.network)
    if args.boundary_temps:
        g = g.with_boundary_temps(load_boundary_temps(Path(args.boundary_temps), g.m))
    eps = args.eps if args.eps is not None else settings.solver_eps
    leaf_max = args.leaf_max if args.leaf_max is not None else settings.solver_leaf_max
    mode = SweepMode(args.mode)
    system = assemble_blocks(g)

    t0 = time.perf_counter()
    if mode is SweepMode.FULL:
        state = sweep_hss(system, eps=eps, leaf_max=leaf_max)
        values = system.partition.to_row_major(back_substitute(state, system))
        rows, cols = np.divmod(np.arange(g.n_interior), g.m)
        coords = np.column_stack([rows, cols])
    else:
        # interior loads are zero by construction; only the outer ring is loaded
        state = sweep_hss(system, eps=eps, leaf_max=leaf_max, mode=SweepMode.BOUNDARY_ONLY)
        assert state.current_inverse is not None
        values = apply_boundary_solve(BoundaryOperator(state.current_inverse), system.rhs[-1])
        coords = system.partition.coords[-1]
    elapsed = time.perf_counter() - t0

    path = write_solution(Path(args.out), coords, values)
    print_success(
        f"Solved m={g.m} ({mode.value} mode) in {elapsed:.3f}s; "
        f"{values.size} temperatures written to {path}"
    )
    if args.dump_tree:
        _write_tree(Path(args.dump_tree), state.current_inverse)
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    config = bench_config_from_settings(
        settings,
        sizes=args.sizes,
        seeds=args.seeds,
        eps=args.eps,
        leaf_max=args.leaf_max,
        oracle_cap=args.oracle_cap,
        cg_cap=args.cg_cap,
    )
    out_dir = Path(args.out)
    print_info(
        f"Benchmarking sizes {config.sizes} x seeds {config.seeds} at eps={config.eps:g}"
    )
    reports = list(
        cmd_bench(
            config,
            with_errors=not args.no_errors,
            progress=lambda done, total: print_info(f"Finished run {done}/{total}"),
        )
    )
    write_csv(reports, out_dir / "reports.csv")
    write_jsonl(reports, out_dir / "reports.jsonl")
    plots = write_plot_data(reports, out_dir)
    console.print(report_table(reports))

    if len({r.n for r in reports}) >= 2:
        slopes = scaling_slopes(reports)
        print_info(
            "log-log slopes vs N: "
            f"T_invert {slopes['t_invert_s']:.2f}, "
            f"T_apply {slopes['t_apply_s']:.2f}, "
            f"M {slopes['mem_floats']:.2f}"
        )
    print_success(f"Wrote {len(reports)} reports and {len(plots)} plot files to {out_dir}")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    results = cmd_verify(args.level, workers=args.workers)
    table = Table(title=f"Verification ({VerifyLevel(args.level).value})")
    table.add_column("Check", style="cyan")
    table.add_column("Result")
    table.add_column("Seconds", justify="right")
    table.add_column("Detail")
    for r in results:
        status = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, status, f"{r.seconds:.2f}", r.detail)
    console.print(table)

    failed = sum(not r.passed for r in results)
    if failed:
        print_error(f"{failed} of {len(results)} checks failed")
        return EXIT_NUMERICAL
    print_success(f"All {len(results)} checks passed")
    return EXIT_OK


def _cmd_config(args: argparse.Namespace, settings: Settings) -> int:
    config_path = get_config_file_path()
    if config_path:
        print_info(f"Config file: {config_path}")
    else:
        print_info("No config file found, using defaults and environment")

    table = Table(title="Effective settings")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="green")
    for key, value in settings.model_dump().items():
        table.add_row(key, str(value))
    console.print(table)
    return EXIT_OK


def build_parser() -> configargparse.ArgumentParser:
    parser = configargparse.ArgumentParser(
        prog="ringsolve",
        description="Fast direct solver for grid conduction networks",
        formatter_class=configargparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--config-file",
        help="Path to ringsolve.toml (overrides RINGSOLVE_CONFIG env var)",
    )
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: from config or INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    assemble = sub.add_parser("assemble", help="Write a random network file")
    assemble.add_argument("--m", type=int, required=True, help="Interior grid side (even)")
    assemble.add_argument("--seed", type=int, default=1, help="Generator seed (default: 1)")
    assemble.add_argument("--cond-low", type=float, help="Lower conductivity bound")
    assemble.add_argument("--cond-high", type=float, help="Upper conductivity bound")
    assemble.add_argument(
        "--boundary-temp",
        type=float,
        default=0.0,
        help="Temperature on every boundary node (default: 0)",
    )
    assemble.add_argument("--out", required=True, help="Network JSON file to write")
    assemble.set_defaults(handler=cmd_assemble)

    solve = sub.add_parser("solve", help="Solve a network file")
    solve.add_argument("--network", required=True, help="Network JSON file")
    solve.add_argument(
        "--boundary-temps", help="File of 4(m+1) boundary temperatures replacing the network's"
    )
    solve.add_argument(
        "--mode",
        choices=[m.value for m in SweepMode],
        default=SweepMode.FULL.value,
        help="full: all interior nodes; boundary: outermost ring only (default: full)",
    )
    solve.add_argument("--eps", type=float, help="HSS truncation accuracy")
    solve.add_argument("--leaf-max", type=int, help="Largest HSS leaf block")
    solve.add_argument("--out", required=True, help="Solution CSV to write")
    solve.add_argument("--dump-tree", help="Write the boundary operator's tessellation as JSON")
    solve.set_defaults(handler=cmd_solve)

    bench = sub.add_parser("bench", help="Timing and error runs over grid sizes")
    bench.add_argument("--sizes", type=int, nargs="+", help="Grid sides m")
    bench.add_argument("--seeds", type=int, nargs="+", help="Generator seeds")
    bench.add_argument("--eps", type=float, help="HSS truncation accuracy")
    bench.add_argument("--leaf-max", type=int, help="Largest HSS leaf block")
    bench.add_argument("--oracle-cap", type=int, help="Largest m for the dense e1/e2 oracle")
    bench.add_argument("--cg-cap", type=int, help="Largest m for the CG e3/e4 oracle")
    bench.add_argument("--no-errors", action="store_true", help="Time only, skip the oracles")
    bench.add_argument("--out", default="bench-results", help="Output directory")
    bench.set_defaults(handler=_cmd_bench)

    verify = sub.add_parser("verify", help="Run the self-check suite")
    verify.add_argument(
        "--level",
        choices=[level.value for level in VerifyLevel],
        default=VerifyLevel.QUICK.value,
        help="quick (seconds) or full (minutes)",
    )
    verify.add_argument("--workers", type=int, default=1, help="Checks run in parallel")
    verify.set_defaults(handler=_cmd_verify)

    config = sub.add_parser("config", help="Show effective settings")
    config.set_defaults(handler=_cmd_config)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION

    if args.config_file:
        os.environ["RINGSOLVE_CONFIG"] = args.config_file

    try:
        settings = Settings()
    except ValidationError as e:
        print_error(f"Invalid settings: {e}")
        return EXIT_VALIDATION

    setup_logging(args.log_level or settings.logging_level)

    try:
        return int(args.handler(args, settings))
    except (SingularMatrixError, NoConvergenceError) as e:
        print_error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except (
        NetworkFileError,
        ParameterError,
        ShapeMismatchError,
        SizeGuardError,
        ValidationError,
        OSError,
    ) as e:
        print_error(str(e))
        return EXIT_VALIDATION
    except Exception as e:
        logger.debug("Unexpected error", exc_info=True)
        print_error(f"Unexpected error: {type(e).__name__}: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

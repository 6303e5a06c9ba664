"""Timing runs over grid sizes and seeds."""

import logging
import statistics
import time
from collections.abc import Callable, Iterator
from typing import Optional

import numpy as np

from ringsolve_core import (
    BoundaryOperator,
    SweepMode,
    apply_boundary_solve,
    assemble_blocks,
    build_grid,
    sweep_hss,
)

from .config import Settings
from .models import BenchConfig, ErrorMetrics, RunReport
from .oracles import compute_errors, random_unit_load

logger = logging.getLogger(__name__)


def bench_config_from_settings(settings: Settings, **overrides: object) -> BenchConfig:
    """BenchConfig filled from settings; non-None overrides win."""
    values: dict[str, object] = {
        "sizes": settings.bench_sizes,
        "seeds": settings.bench_seeds,
        "eps": settings.solver_eps,
        "leaf_max": settings.solver_leaf_max,
        "cond_low": settings.grid_cond_low,
        "cond_high": settings.grid_cond_high,
        "apply_repeats": settings.bench_apply_repeats,
        "oracle_cap": settings.oracle_cap,
        "cg_cap": settings.oracle_cg_cap,
        "cg_tol": settings.oracle_cg_tol,
        "cg_maxiter_factor": settings.oracle_cg_maxiter_factor,
        "power_iterations": settings.oracle_power_iterations,
        "power_rtol": settings.oracle_power_rtol,
        "densify_cap": settings.hss_densify_cap,
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    return BenchConfig.model_validate(values)


def time_apply(operator: BoundaryOperator, load: np.ndarray, repeats: int) -> float:
    """Median wall time of ``repeats`` boundary solves."""
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        apply_boundary_solve(operator, load)
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def run_case(m: int, seed: int, config: BenchConfig, *, with_errors: bool = True) -> RunReport:
    """Build, time and check the boundary operator for one grid."""
    g = build_grid(m, seed, config.cond_low, config.cond_high)
    system = assemble_blocks(g)
    zeros = [np.zeros(size) for size in system.sizes]

    t0 = time.perf_counter()
    state = sweep_hss(system, zeros, config.eps, config.leaf_max, SweepMode.BOUNDARY_ONLY)
    t_invert = time.perf_counter() - t0
    assert state.current_inverse is not None
    operator = BoundaryOperator(state.current_inverse)

    load = random_unit_load(operator.size, seed)
    t_apply = time_apply(operator, load, config.apply_repeats)

    errors = (
        compute_errors(operator, m, seed, system=system, config=config)
        if with_errors
        else ErrorMetrics()
    )
    report = RunReport(
        n=m * m,
        m=m,
        eps=config.eps,
        leaf_max=config.leaf_max,
        seed=seed,
        t_invert_s=t_invert,
        t_apply_s=t_apply,
        mem_floats=state.peak_floats,
        step_times=state.step_times,
        retessellations=state.retessellations,
        errors=errors,
    )
    logger.info(
        f"m={m} seed={seed}: invert {t_invert:.3f}s, apply {t_apply * 1e3:.3f}ms, "
        f"{report.mem_floats} floats"
    )
    return report


def cmd_bench(
    config: BenchConfig,
    *,
    with_errors: bool = True,
    progress: Optional[Callable[[int, int], None]] = None,
) -> Iterator[RunReport]:
    """Yield one report per (size, seed), sizes in the given order.

    Runs are strictly sequential so timings do not interfere.
    """
    cases = [(m, seed) for m in config.sizes for seed in config.seeds]
    for done, (m, seed) in enumerate(cases):
        yield run_case(m, seed, config, with_errors=with_errors)
        if progress is not None:
            progress(done + 1, len(cases))

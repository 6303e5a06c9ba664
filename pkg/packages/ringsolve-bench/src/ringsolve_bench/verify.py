"""Self-check suite for an installed build.

``quick`` covers exactness of the dense sweep on small grids, the ring
structure, a randomized HSS algebra sample and the compressed boundary
operator at m=20. ``full`` adds larger HSS samples, the dense oracle at
m=50 and m=100, and the CG oracle at m=100, 200 and 300.
"""

import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ringsolve_core import (
    BoundaryOperator,
    SweepMode,
    assemble_blocks,
    back_substitute,
    build_grid,
    spiral_partition,
    sweep_dense,
    sweep_hss,
)
from ringsolve_core.hss import (
    SparseStencil,
    hss_densify,
    hss_from_dense,
    hss_invert,
    hss_lowrank_update,
    hss_stats,
)
from ringsolve_core.linalg import LowRankFactor

from .models import BenchConfig, CheckResult, VerifyLevel
from .oracles import compute_errors

logger = logging.getLogger(__name__)

# Limits the checks assert
EXACT_RTOL = 1e-10
E1_LIMIT = 1e-6
E2_LIMIT = 1e-5
E34_LIMIT = 1e-6

Check = Callable[[], str]


def _random_boundary(m: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed + 1000))
    return rng.uniform(0.0, 1.0, 4 * (m + 1))


def check_dense_exact() -> str:
    """Dense sweep plus back-substitution against a one-shot dense solve."""
    worst = 0.0
    for m in (2, 4, 6, 8, 10):
        for seed in (1, 2, 3):
            g = build_grid(m, seed, boundary_temps=_random_boundary(m, seed))
            system = assemble_blocks(g)
            x = system.partition.to_row_major(back_substitute(sweep_dense(system), system))
            expected = np.linalg.solve(g.five_point_matrix().toarray(), g.row_major_rhs())
            err = float(np.linalg.norm(x - expected) / np.linalg.norm(expected))
            if err > EXACT_RTOL:
                raise AssertionError(f"m={m} seed={seed}: relative error {err:.2e}")
            worst = max(worst, err)
    return f"worst relative error {worst:.2e}"


def check_structure() -> str:
    """Ring sizes, the two innermost rings and the unit five-point rows."""
    p = spiral_partition(12)
    if p.sizes != [8 * k - 4 for k in range(1, 7)]:
        raise AssertionError(f"ring sizes {p.sizes}")
    p4 = spiral_partition(4)
    if (p4.rings[0] + 1).tolist() != [1, 2, 3, 4]:
        raise AssertionError(f"J1 = {(p4.rings[0] + 1).tolist()}")
    if (p4.rings[1] + 1).tolist() != list(range(5, 17)):
        raise AssertionError(f"J2 = {(p4.rings[1] + 1).tolist()}")
    a = build_grid(6, 0, 1.0, 1.0).five_point_matrix().toarray()
    off = a - np.diag(np.diag(a))
    if not np.all(np.diag(a) == 4.0) or not set(np.unique(off).tolist()) <= {-1.0, 0.0}:
        raise AssertionError("unit conductivities do not give 4/-1 rows")
    return "ring sizes 8k-4, J1/J2, 4/-1 stencil"


def _hss_case(rng: np.random.Generator, n: int, eps: float) -> None:
    stencil = SparseStencil.cyclic(
        rng.uniform(5.0, 6.0, n), -rng.uniform(1.0, 2.0, n - 1), -rng.uniform(1.0, 2.0)
    )
    dense = np.linalg.inv(stencil.densify())
    h = hss_from_dense(dense, leaf_max=16, eps=eps)
    if np.abs(hss_densify(h) - dense).max() > eps * (hss_stats(h).depth + 1):
        raise AssertionError(f"n={n}: round trip outside the truncation bound")

    residual = hss_densify(hss_invert(h)) @ dense - np.eye(n)
    if np.abs(residual).max() > 1e-5:
        raise AssertionError(f"n={n}: inversion residual {np.abs(residual).max():.2e}")

    update = LowRankFactor(rng.standard_normal((n, 2)), rng.standard_normal((n, 2)))
    updated = hss_densify(hss_lowrank_update(h, update, eps))
    if np.abs(updated - (hss_densify(h) + update.densify())).max() > 10 * eps * n:
        raise AssertionError(f"n={n}: low-rank update inconsistent with dense addition")


def _hss_suite(cases: int) -> Check:
    def run() -> str:
        rng = np.random.Generator(np.random.PCG64(2024))
        for _ in range(cases):
            _hss_case(rng, int(rng.integers(8, 257)), 1e-8)
        return f"{cases} randomized cases"

    return run


def _dense_oracle(m: int) -> Check:
    def run() -> str:
        config = BenchConfig(sizes=[m], cg_cap=0)
        system = assemble_blocks(build_grid(m, 1))
        zeros = [np.zeros(size) for size in system.sizes]
        state = sweep_hss(system, zeros, config.eps, config.leaf_max, SweepMode.BOUNDARY_ONLY)
        assert state.current_inverse is not None
        operator = BoundaryOperator(state.current_inverse)
        errors = compute_errors(operator, m, 1, system=system, config=config)
        assert errors.e1 is not None and errors.e2 is not None
        if errors.e1 > E1_LIMIT or errors.e2 > E2_LIMIT:
            raise AssertionError(f"m={m}: e1={errors.e1:.2e} e2={errors.e2:.2e}")
        return f"m={m}: e1={errors.e1:.2e} e2={errors.e2:.2e}"

    return run


def _cg_oracle(m: int) -> Check:
    def run() -> str:
        config = BenchConfig(sizes=[m], oracle_cap=0)
        system = assemble_blocks(build_grid(m, 1))
        zeros = [np.zeros(size) for size in system.sizes]
        state = sweep_hss(system, zeros, config.eps, config.leaf_max, SweepMode.BOUNDARY_ONLY)
        assert state.current_inverse is not None
        operator = BoundaryOperator(state.current_inverse)
        errors = compute_errors(operator, m, 1, system=system, config=config)
        assert errors.e3 is not None and errors.e4 is not None
        if errors.e3 > E34_LIMIT or errors.e4 > E34_LIMIT:
            raise AssertionError(f"m={m}: e3={errors.e3:.2e} e4={errors.e4:.2e}")
        return f"m={m}: e3={errors.e3:.2e} e4={errors.e4:.2e}"

    return run


def suite(level: VerifyLevel | str) -> list[tuple[str, Check]]:
    """Named checks for a level."""
    level = VerifyLevel(level)
    checks: list[tuple[str, Check]] = [
        ("dense sweep exactness", check_dense_exact),
        ("spiral structure", check_structure),
        ("hss algebra", _hss_suite(10)),
        ("boundary operator m=20", _dense_oracle(20)),
    ]
    if level is VerifyLevel.FULL:
        checks += [
            ("hss algebra (100 cases)", _hss_suite(100)),
            ("boundary operator m=50", _dense_oracle(50)),
            ("boundary operator m=100", _dense_oracle(100)),
            ("CG cross-check m=100", _cg_oracle(100)),
            ("CG cross-check m=200", _cg_oracle(200)),
            ("CG cross-check m=300", _cg_oracle(300)),
        ]
    return checks


def _run_one(name: str, check: Check) -> CheckResult:
    t0 = time.perf_counter()
    try:
        detail = check()
        passed = True
    except Exception as e:
        logger.error(f"Check '{name}' failed: {e}")
        detail = f"{type(e).__name__}: {e}"
        passed = False
    return CheckResult(name=name, passed=passed, detail=detail, seconds=time.perf_counter() - t0)


def run_checks(checks: Sequence[tuple[str, Check]], workers: int = 1) -> list[CheckResult]:
    """Run checks, optionally on a thread pool; results keep the input order."""
    if workers <= 1:
        return [_run_one(name, check) for name, check in checks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: _run_one(*item), checks))


def cmd_verify(level: VerifyLevel | str = VerifyLevel.QUICK, workers: int = 1) -> list[CheckResult]:
    """Run the suite for ``level``."""
    results = run_checks(suite(level), workers)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning(f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
    else:
        logger.info(f"All {len(results)} checks passed")
    return results

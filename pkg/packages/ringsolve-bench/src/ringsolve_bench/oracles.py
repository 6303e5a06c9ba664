"""Reference solvers used to measure the error of a boundary operator.

Two oracles are used. The dense one repeats the spiral sweep with exact
Schur complements and yields the boundary inverse entry by entry (e1, e2).
The iterative one solves the whole network by conjugate gradients for a
load on the outermost ring (e3, e4). Both are capped by grid size; beyond
the cap the corresponding metrics are reported as absent.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt
import scipy.sparse

from ringsolve_core import (
    BlockSystem,
    BoundaryOperator,
    NoConvergenceError,
    SizeGuardError,
    SweepMode,
    apply_boundary_solve,
    assemble_blocks,
    build_grid,
    sweep_dense,
)
from ringsolve_core.linalg import spectral_norm

from .models import BenchConfig, ErrorMetrics

logger = logging.getLogger(__name__)

# Second entropy word for the random unit load behind e3
LOAD_STREAM = 3


@dataclass
class CgResult:
    """Solution and convergence history of a conjugate-gradient run."""

    x: npt.NDArray[np.float64]
    iterations: int
    residuals: list[float] = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def cg_reference(
    system: BlockSystem | scipy.sparse.spmatrix | npt.ArrayLike,
    rhs: npt.ArrayLike | Sequence[npt.ArrayLike],
    tol: float = 1e-12,
    *,
    maxiter: Optional[int] = None,
    maxiter_factor: int = 20,
    callback: Optional[Callable[[npt.NDArray[np.float64]], None]] = None,
) -> CgResult:
    """Conjugate gradients to a relative residual of ``tol``.

    Args:
        system: Block system (solved in spiral order) or an SPD matrix
        rhs: Right-hand side; per-ring blocks are concatenated
        tol: Relative 2-norm residual to reach
        maxiter: Iteration cap; defaults to maxiter_factor * m
        maxiter_factor: Cap per unit of grid side m
        callback: Called with the iterate after every step

    Raises:
        NoConvergenceError: If the cap is reached first
    """
    if isinstance(system, BlockSystem):
        a = system.to_sparse()
        side = system.m
        if isinstance(rhs, (list, tuple)):
            rhs = np.concatenate([np.asarray(b, dtype=np.float64) for b in rhs])
    else:
        a = scipy.sparse.csr_matrix(system)
        side = max(1, math.isqrt(a.shape[0]))
    b = np.asarray(rhs, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"need a square matrix and matching load, got {a.shape} and {b.shape}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    cap = maxiter if maxiter is not None else maxiter_factor * side

    x = np.zeros(n)
    r = b.copy()
    am = float(r @ r)
    p = r.copy()
    tol_sqr = (tol * math.sqrt(am)) ** 2
    residuals = [math.sqrt(am)]

    iterations = 0
    while am > tol_sqr:
        if iterations == cap:
            raise NoConvergenceError(
                f"CG did not reach relative residual {tol:g} in {cap} iterations",
                iterations=cap,
                residual=residuals[-1] / residuals[0],
            )
        v = a @ p
        step = am / float(v @ p)
        x += step * p
        r -= step * v
        am1 = float(r @ r)
        p = r + (am1 / am) * p
        am = am1
        iterations += 1
        residuals.append(math.sqrt(am))
        if callback is not None:
            callback(x)

    logger.debug(f"CG converged in {iterations} iterations on {n} unknowns")
    return CgResult(x=x, iterations=iterations, residuals=residuals)


def dense_boundary_inverse(system: BlockSystem) -> npt.NDArray[np.float64]:
    """Exact boundary inverse from a dense boundary-only sweep."""
    zeros = [np.zeros(size) for size in system.sizes]
    state = sweep_dense(system, zeros, SweepMode.BOUNDARY_ONLY)
    assert isinstance(state.current_inverse, np.ndarray)
    return state.current_inverse


def random_unit_load(size: int, seed: int) -> npt.NDArray[np.float64]:
    """Unit 2-norm load drawn from the stream (seed, LOAD_STREAM)."""
    rng = np.random.Generator(np.random.PCG64([seed, LOAD_STREAM]))
    r = rng.standard_normal(size)
    return r / np.linalg.norm(r)


def _cg_boundary_response(
    system: BlockSystem, load: npt.NDArray[np.float64], config: BenchConfig
) -> npt.NDArray[np.float64]:
    blocks = [np.zeros(size) for size in system.sizes[:-1]] + [load]
    result = cg_reference(system, blocks, config.cg_tol, maxiter_factor=config.cg_maxiter_factor)
    return result.x[-load.size :]


def _load_error(
    fast: BoundaryOperator,
    system: BlockSystem,
    load: npt.NDArray[np.float64],
    config: BenchConfig,
) -> float:
    reference = _cg_boundary_response(system, load, config)
    return float(np.linalg.norm(apply_boundary_solve(fast, load) - reference))


def compute_errors(
    fast: BoundaryOperator,
    m: int,
    seed: int,
    *,
    system: Optional[BlockSystem] = None,
    config: Optional[BenchConfig] = None,
) -> ErrorMetrics:
    """Errors of ``fast`` against the dense and CG oracles.

    The network is rebuilt from (m, seed) unless ``system`` is given. Oracles
    whose size cap is exceeded leave their metrics as None.
    """
    config = config or BenchConfig(sizes=[m])
    if system is None:
        g = build_grid(m, seed, config.cond_low, config.cond_high)
        system = assemble_blocks(g)
    if fast.size != system.sizes[-1]:
        raise ValueError(
            f"operator of size {fast.size} does not match the outer ring ({system.sizes[-1]})"
        )

    e1: Optional[float] = None
    e2: Optional[float] = None
    e3: Optional[float] = None
    e4: Optional[float] = None
    if m <= config.oracle_cap:
        try:
            diff = fast.densify(config.densify_cap) - dense_boundary_inverse(system)
        except SizeGuardError as e:
            logger.warning(f"Skipping dense oracle at m={m}: {e}")
        else:
            e1 = float(np.abs(diff).max())
            e2 = spectral_norm(diff, config.power_iterations, config.power_rtol, seed)
    else:
        logger.warning(f"m={m} exceeds the dense oracle cap {config.oracle_cap}; e1/e2 absent")

    if m <= config.cg_cap:
        e3 = _load_error(fast, system, random_unit_load(fast.size, seed), config)
        first = np.zeros(fast.size)
        first[0] = 1.0
        e4 = _load_error(fast, system, first, config)
    else:
        logger.warning(f"m={m} exceeds the CG oracle cap {config.cg_cap}; e3/e4 absent")

    return ErrorMetrics(e1=e1, e2=e2, e3=e3, e4=e4)

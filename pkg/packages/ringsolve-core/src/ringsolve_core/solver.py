"""Spiral block elimination.

The block tridiagonal system is swept from the innermost ring outwards. Each
step forms the Schur complement

    S_k = A_kk - A_{k,k-1} S_{k-1}^{-1} A_{k-1,k}

and inverts it, while the loads are reduced alongside. The dense sweep does
this exactly; the HSS sweep keeps S_k^{-1} compressed once rings are large
enough, giving near-linear cost overall.

In ``SweepMode.FULL`` every inverse and modified load is kept so the interior
solution can be recovered by back-substitution. ``SweepMode.BOUNDARY_ONLY``
holds a single inverse at a time and yields the boundary operator
S_n^{-1}, which maps loads on the outermost ring to potentials there.
"""

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import numpy.typing as npt

from .exceptions import ModeError, ParameterError, ShapeMismatchError
from .grid import BlockSystem, GridNetwork, RingCoupling, assemble_blocks
from .hss import (
    DEFAULT_DENSIFY_CAP,
    DEFAULT_EPS,
    DEFAULT_LEAF_MAX,
    HssMatrix,
    SparseStencil,
    hss_add_stencil,
    hss_apply_thin,
    hss_densify,
    hss_embed,
    hss_from_dense,
    hss_invert,
    hss_lowrank_update,
    hss_matvec,
    hss_retessellate,
    hss_scale,
    hss_stats,
    hss_zeros,
    needs_retessellation,
)
from .linalg import DenseMatrix, LowRankFactor, Vector, dense_invert

logger = logging.getLogger(__name__)

InverseBlock = DenseMatrix | HssMatrix


class SweepMode(str, Enum):
    """What a sweep keeps."""

    FULL = "full"
    BOUNDARY_ONLY = "boundary"


@dataclass
class SweepState:
    """Outcome of a sweep.

    Attributes:
        mode: Storage mode of the sweep
        stored_inverses: S_k^{-1} for every ring (FULL mode only)
        current_inverse: The last inverse formed
        modified_loads: Reduced loads (all rings in FULL mode, last one otherwise)
        step: Number of rings processed
        peak_floats: High-water mark of floats held in inverses
        step_times: Wall seconds per ring
        retessellations: Ring numbers (1-based) whose Schur term was re-tessellated
        eps: Truncation accuracy used by the HSS steps
        leaf_max: Tessellation threshold used by the HSS steps
    """

    mode: SweepMode
    stored_inverses: list[InverseBlock] = field(default_factory=list)
    current_inverse: InverseBlock | None = None
    modified_loads: list[Vector] = field(default_factory=list)
    step: int = 0
    peak_floats: int = 0
    step_times: list[float] = field(default_factory=list)
    retessellations: list[int] = field(default_factory=list)
    eps: float = DEFAULT_EPS
    leaf_max: int = DEFAULT_LEAF_MAX


@dataclass(frozen=True)
class BoundaryOperator:
    """S_n^{-1} for the outermost ring: boundary loads to boundary potentials."""

    matrix: InverseBlock

    @property
    def size(self) -> int:
        if isinstance(self.matrix, HssMatrix):
            return self.matrix.n
        return int(self.matrix.shape[0])

    @property
    def is_compressed(self) -> bool:
        return isinstance(self.matrix, HssMatrix)

    @property
    def nfloats(self) -> int:
        return _nfloats(self.matrix)

    def densify(self, cap: int = DEFAULT_DENSIFY_CAP) -> DenseMatrix:
        if isinstance(self.matrix, HssMatrix):
            return hss_densify(self.matrix, cap)
        return np.array(self.matrix, copy=True)


def _nfloats(block: InverseBlock) -> int:
    if isinstance(block, HssMatrix):
        return hss_stats(block).total_floats
    return int(block.size)


def _matvec(block: InverseBlock, x: Vector) -> Vector:
    if isinstance(block, HssMatrix):
        return hss_matvec(block, x)
    return block @ x


def _dense_schur(
    stencil: SparseStencil, coupling: RingCoupling, inverse: DenseMatrix
) -> DenseMatrix:
    # C X C^T with C applied twice, never materialized
    cx = coupling.apply(inverse)
    return stencil.densify() - coupling.apply(cx.T).T


def _corner_factor(coupling: RingCoupling, inverse: HssMatrix) -> LowRankFactor:
    """Corner-link part of C X C^T beyond the embedded primary term.

    With C = -(P D + E), where P D is the primary injection and E the corner
    links, C X C^T - P D X D P^T = E X (P D)^T + (P D + E) X E^T.
    """
    k = len(coupling.corner_inner)
    outer = coupling.outer_size
    if k == 0:
        return LowRankFactor.zeros(outer, outer)
    cols = np.arange(k)
    links = np.zeros((outer, k))
    links[coupling.corner_outer, cols] = coupling.corner_conductivity
    select = np.zeros((coupling.inner_size, k))
    select[coupling.corner_inner, cols] = 1.0

    primary = np.zeros((outer, k))
    primary[coupling.positions] = coupling.conductivity[:, None] * hss_apply_thin(
        inverse, select, transpose=True
    )
    full = -coupling.apply(hss_apply_thin(inverse, select))
    return LowRankFactor(np.hstack([links, full]), np.hstack([primary, links]))


def _hss_schur(
    stencil: SparseStencil, coupling: RingCoupling, inverse: HssMatrix, eps: float
) -> tuple[HssMatrix, bool]:
    d = coupling.conductivity
    term = hss_embed(
        hss_scale(inverse, -d, d), coupling.outer_size, coupling.positions, retessellate=False
    )
    term = hss_lowrank_update(term, -_corner_factor(coupling, inverse), eps)
    term = hss_add_stencil(term, stencil, eps)
    if needs_retessellation(term):
        return hss_retessellate(term), True
    return term, False


def _check_block(b: Vector, size: int, ring: int) -> None:
    if b.shape != (size,):
        raise ShapeMismatchError(
            f"load block for ring {ring} must have length {size}, got {b.shape}"
        )


def _sweep(
    system: BlockSystem,
    rhs: Sequence[npt.ArrayLike] | None,
    mode: SweepMode | str,
    *,
    compress: bool,
    eps: float,
    leaf_max: int,
) -> SweepState:
    mode = SweepMode(mode)
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if leaf_max < 1:
        raise ParameterError(f"leaf_max must be at least 1, got {leaf_max}")
    blocks = system.rhs if rhs is None else rhs
    n = system.n_rings
    state = SweepState(mode=mode, eps=eps, leaf_max=leaf_max)
    kind = "HSS" if compress else "dense"
    logger.info(f"Starting {kind} sweep over {n} rings (m={system.m}, mode={mode.value})")
    started = time.perf_counter()

    inverse: InverseBlock | None = None
    load: Vector | None = None
    for k in range(n):
        t0 = time.perf_counter()
        stencil = system.diag[k]
        b = np.asarray(blocks[k], dtype=np.float64)
        _check_block(b, stencil.size, k + 1)
        if mode is SweepMode.BOUNDARY_ONLY and k < n - 1 and np.any(b):
            raise ModeError(
                f"ring {k + 1} carries interior loads; "
                "boundary-only sweeps need an unloaded interior"
            )
        use_hss = compress and stencil.size > 2 * leaf_max

        schur: InverseBlock
        if inverse is None or load is None:
            schur = (
                hss_add_stencil(hss_zeros(stencil.size, leaf_max, eps), stencil)
                if use_hss
                else stencil.densify()
            )
            new_load = b
        else:
            coupling = system.couplings[k - 1]
            new_load = b - coupling.apply(_matvec(inverse, load))
            if use_hss:
                if not isinstance(inverse, HssMatrix):
                    inverse = hss_from_dense(inverse, leaf_max, eps)
                    logger.debug(f"Ring {k + 1}: switching to HSS representation")
                schur, retessellated = _hss_schur(stencil, coupling, inverse, eps)
                if retessellated:
                    state.retessellations.append(k + 1)
                    logger.info(
                        f"Ring {k + 1}: re-tessellated Schur term "
                        f"({hss_stats(schur).leaf_count} leaves)"
                    )
            else:
                assert isinstance(inverse, np.ndarray)
                schur = _dense_schur(stencil, coupling, inverse)

        inverse = hss_invert(schur, eps) if isinstance(schur, HssMatrix) else dense_invert(schur)
        load = new_load

        if mode is SweepMode.FULL:
            state.stored_inverses.append(inverse)
            state.modified_loads.append(load)
            held = sum(_nfloats(x) for x in state.stored_inverses)
        else:
            state.modified_loads = [load]
            held = _nfloats(inverse)
        state.current_inverse = inverse
        state.step = k + 1
        state.peak_floats = max(state.peak_floats, held)
        elapsed = time.perf_counter() - t0
        state.step_times.append(elapsed)
        if isinstance(inverse, HssMatrix):
            stats = hss_stats(inverse)
            logger.debug(
                f"Ring {k + 1}/{n}: size {stencil.size}, {elapsed:.4f}s, "
                f"max rank {stats.max_rank}, {stats.total_floats} floats"
            )
        else:
            logger.debug(f"Ring {k + 1}/{n}: size {stencil.size}, {elapsed:.4f}s, dense")

    logger.info(
        f"Finished {kind} sweep in {time.perf_counter() - started:.3f}s, "
        f"peak {state.peak_floats} floats"
    )
    return state


def sweep_dense(
    system: BlockSystem,
    rhs: Sequence[npt.ArrayLike] | None = None,
    mode: SweepMode | str = SweepMode.FULL,
) -> SweepState:
    """Exact sweep with dense Schur complements; O(N^2) work.

    Args:
        system: Assembled block system
        rhs: Load blocks per ring; defaults to ``system.rhs``
        mode: Storage mode

    Raises:
        SingularMatrixError: If a Schur complement is singular
        ModeError: If BOUNDARY_ONLY is requested with interior loads
    """
    return _sweep(system, rhs, mode, compress=False, eps=DEFAULT_EPS, leaf_max=DEFAULT_LEAF_MAX)


def sweep_hss(
    system: BlockSystem,
    rhs: Sequence[npt.ArrayLike] | None = None,
    eps: float = DEFAULT_EPS,
    leaf_max: int = DEFAULT_LEAF_MAX,
    mode: SweepMode | str = SweepMode.FULL,
) -> SweepState:
    """Sweep with HSS-compressed inverses once rings exceed 2 x leaf_max.

    Per ring: scale the previous inverse by the interface conductivities,
    embed it into the outer ring, add the corner-link correction, add the
    ring stencil, re-tessellate if a leaf outgrew the threshold, invert.
    Each diagonal block, coupling and load block is read exactly once.
    """
    return _sweep(system, rhs, mode, compress=True, eps=eps, leaf_max=leaf_max)


def _backward(
    inverses: Sequence[InverseBlock], couplings: Sequence[RingCoupling], loads: Sequence[Vector]
) -> Vector:
    n = len(inverses)
    parts: list[Vector] = [np.zeros(0)] * n
    parts[-1] = _matvec(inverses[-1], loads[-1])
    for k in range(n - 2, -1, -1):
        parts[k] = _matvec(inverses[k], loads[k] - couplings[k].apply_transpose(parts[k + 1]))
    return np.concatenate(parts)


def back_substitute(state: SweepState, system: BlockSystem) -> Vector:
    """Interior solution in spiral order from a completed FULL sweep.

    Use ``system.partition.to_row_major`` for row-major order.

    Raises:
        ModeError: If the sweep did not keep every inverse
    """
    if state.mode is not SweepMode.FULL:
        raise ModeError("back-substitution needs a FULL sweep")
    if state.step != system.n_rings:
        raise ModeError(f"sweep stopped at ring {state.step} of {system.n_rings}")
    return _backward(state.stored_inverses, system.couplings, state.modified_loads)


def solve_many(
    state: SweepState, system: BlockSystem, loads: Sequence[Sequence[npt.ArrayLike]]
) -> list[Vector]:
    """Solve further load cases with the inverses kept by a FULL sweep.

    Each entry of ``loads`` is a list of per-ring blocks. Only load reduction
    and back-substitution run; no inverse is recomputed.
    """
    if state.mode is not SweepMode.FULL:
        raise ModeError("solve_many needs a FULL sweep")
    inverses = state.stored_inverses
    solutions = []
    for case in loads:
        blocks = [np.asarray(b, dtype=np.float64) for b in case]
        if len(blocks) != len(inverses):
            raise ShapeMismatchError(f"expected {len(inverses)} load blocks, got {len(blocks)}")
        reduced = [blocks[0]]
        for k in range(1, len(blocks)):
            _check_block(blocks[k], system.sizes[k], k + 1)
            step = system.couplings[k - 1].apply(_matvec(inverses[k - 1], reduced[-1]))
            reduced.append(blocks[k] - step)
        solutions.append(_backward(inverses, system.couplings, reduced))
    return solutions


def boundary_operator(
    system: BlockSystem, eps: float = DEFAULT_EPS, leaf_max: int = DEFAULT_LEAF_MAX
) -> BoundaryOperator:
    """Build S_n^{-1} with a BOUNDARY_ONLY sweep; only one inverse is live at a time."""
    zeros = [np.zeros(size) for size in system.sizes]
    state = sweep_hss(system, zeros, eps, leaf_max, SweepMode.BOUNDARY_ONLY)
    assert state.current_inverse is not None
    return BoundaryOperator(state.current_inverse)


def apply_boundary_solve(operator: BoundaryOperator, boundary_load: npt.ArrayLike) -> Vector:
    """Potentials on the outermost ring for a load on it."""
    load = np.asarray(boundary_load, dtype=np.float64)
    if load.shape != (operator.size,):
        raise ShapeMismatchError(
            f"boundary load must have length {operator.size}, got shape {load.shape}"
        )
    return _matvec(operator.matrix, load)


def solve_network(
    g: GridNetwork,
    *,
    eps: float = DEFAULT_EPS,
    leaf_max: int = DEFAULT_LEAF_MAX,
    compress: bool = True,
) -> Vector:
    """Interior temperatures of a network in row-major order."""
    system = assemble_blocks(g)
    if compress:
        state = sweep_hss(system, eps=eps, leaf_max=leaf_max)
    else:
        state = sweep_dense(system)
    return system.partition.to_row_major(back_substitute(state, system))

"""ringsolve-core - spiral block elimination with HSS-compressed Schur complements."""

from .exceptions import (
    ModeError,
    NetworkFileError,
    NoConvergenceError,
    ParameterError,
    RingSolveError,
    ShapeMismatchError,
    SingularMatrixError,
    SizeGuardError,
)
from .grid import (
    BlockSystem,
    GridNetwork,
    RingCoupling,
    RingPartition,
    assemble_blocks,
    boundary_rhs,
    build_grid,
    spiral_partition,
)
from .hss import HssMatrix, HssStats, SparseStencil, hss_stats, hss_to_tree
from .linalg import LowRankFactor
from .network_io import read_network, write_network
from .solver import (
    BoundaryOperator,
    SweepMode,
    SweepState,
    apply_boundary_solve,
    back_substitute,
    boundary_operator,
    solve_many,
    solve_network,
    sweep_dense,
    sweep_hss,
)
from .version import __version__

__all__ = [
    "BlockSystem",
    "BoundaryOperator",
    "GridNetwork",
    "HssMatrix",
    "HssStats",
    "LowRankFactor",
    "ModeError",
    "NetworkFileError",
    "NoConvergenceError",
    "ParameterError",
    "RingCoupling",
    "RingPartition",
    "RingSolveError",
    "ShapeMismatchError",
    "SingularMatrixError",
    "SizeGuardError",
    "SparseStencil",
    "SweepMode",
    "SweepState",
    "__version__",
    "apply_boundary_solve",
    "assemble_blocks",
    "back_substitute",
    "boundary_operator",
    "boundary_rhs",
    "build_grid",
    "hss_stats",
    "hss_to_tree",
    "read_network",
    "solve_many",
    "solve_network",
    "spiral_partition",
    "sweep_dense",
    "sweep_hss",
    "write_network",
]

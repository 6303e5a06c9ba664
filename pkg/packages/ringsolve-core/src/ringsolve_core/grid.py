"""Conduction networks on square grids and their spiral block structure.

The interior of the grid is an m x m array of nodes (m even) surrounded by a
ring of boundary nodes with prescribed temperatures. Interior node (r, c)
sits at full-grid coordinate (r + 1, c + 1).

Bars are stored by the arrays they belong to:

* ``h_cond[r, C]`` (shape m x (m+1)) joins full-grid columns C and C+1 on
  interior row r.
* ``v_cond[R, c]`` (shape (m+1) x m) joins full-grid rows R and R+1 on
  interior column c.

Numbering the interior nodes ring by ring from the centre outwards (each ring
clockwise from its top-left node) makes the system matrix block tridiagonal.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt
import scipy.sparse

from .exceptions import ParameterError, ShapeMismatchError
from .hss import SparseStencil
from .linalg import DenseMatrix, Vector

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.intp]


def _check_m(m: int) -> None:
    if not isinstance(m, (int, np.integer)) or m < 2 or m % 2:
        raise ParameterError(f"interior side m must be an even integer >= 2, got {m!r}")


def boundary_index(row: int, col: int, m: int) -> int:
    """Position of full-grid perimeter node (row, col), clockwise from (0, 0)."""
    side = m + 1
    if row == 0:
        return col
    if col == side:
        return side + row
    if row == side:
        return 2 * side + (side - col)
    if col == 0:
        return 3 * side + (side - row)
    raise ValueError(f"({row}, {col}) is not on the boundary of an {m} x {m} grid")


@dataclass(frozen=True)
class GridNetwork:
    """Square conduction grid with per-bar conductivities and boundary temperatures."""

    m: int
    h_cond: DenseMatrix
    v_cond: DenseMatrix
    boundary_temps: Vector

    def __post_init__(self) -> None:
        _check_m(self.m)
        m = self.m
        h = np.asarray(self.h_cond, dtype=np.float64)
        v = np.asarray(self.v_cond, dtype=np.float64)
        temps = np.asarray(self.boundary_temps, dtype=np.float64)
        if h.shape != (m, m + 1):
            raise ShapeMismatchError(f"h_cond must have shape {(m, m + 1)}, got {h.shape}")
        if v.shape != (m + 1, m):
            raise ShapeMismatchError(f"v_cond must have shape {(m + 1, m)}, got {v.shape}")
        if temps.shape != (4 * (m + 1),):
            raise ShapeMismatchError(
                f"boundary_temps must have length {4 * (m + 1)}, got {temps.shape}"
            )
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(v)) and np.all(np.isfinite(temps))):
            raise ParameterError("network data must be finite")
        if np.any(h <= 0) or np.any(v <= 0):
            raise ParameterError("all bar conductivities must be positive")
        object.__setattr__(self, "h_cond", h)
        object.__setattr__(self, "v_cond", v)
        object.__setattr__(self, "boundary_temps", temps)

    @property
    def n_interior(self) -> int:
        return self.m * self.m

    @property
    def n_rings(self) -> int:
        return self.m // 2

    def with_boundary_temps(self, temps: npt.ArrayLike) -> "GridNetwork":
        values = np.broadcast_to(np.asarray(temps, dtype=np.float64), (4 * (self.m + 1),))
        return replace(self, boundary_temps=values.copy())

    def node_degree(self, coords: IntArray) -> Vector:
        """Sum of the four incident bar conductivities for interior nodes (k x 2)."""
        r, c = coords[:, 0], coords[:, 1]
        return self.h_cond[r, c] + self.h_cond[r, c + 1] + self.v_cond[r, c] + self.v_cond[r + 1, c]

    def bar_conductivity(self, a: IntArray, b: IntArray) -> Vector:
        """Conductivity of the bars joining grid-adjacent interior nodes a[i] and b[i]."""
        a, b = np.atleast_2d(a), np.atleast_2d(b)
        same_row = a[:, 0] == b[:, 0]
        lo = np.minimum(a, b)
        if np.any(np.abs(a - b).sum(axis=1) != 1):
            raise ValueError("bar_conductivity needs grid-adjacent node pairs")
        out = np.empty(len(a))
        out[same_row] = self.h_cond[lo[same_row, 0], lo[same_row, 1] + 1]
        col = ~same_row
        out[col] = self.v_cond[lo[col, 0] + 1, lo[col, 1]]
        return out

    def row_major_rhs(self) -> Vector:
        """Boundary loads in row-major interior order."""
        m = self.m
        t = self.boundary_temps
        b = np.zeros((m, m))
        cols = np.arange(m)
        top = [boundary_index(0, c + 1, m) for c in cols]
        bottom = [boundary_index(m + 1, c + 1, m) for c in cols]
        left = [boundary_index(r + 1, 0, m) for r in cols]
        right = [boundary_index(r + 1, m + 1, m) for r in cols]
        b[0, :] += self.v_cond[0, :] * t[top]
        b[m - 1, :] += self.v_cond[m, :] * t[bottom]
        b[:, 0] += self.h_cond[:, 0] * t[left]
        b[:, m - 1] += self.h_cond[:, m] * t[right]
        return b.ravel()

    def five_point_matrix(self) -> scipy.sparse.csr_matrix:
        """The N x N system matrix in row-major order, assembled bar by bar."""
        m = self.m
        index = np.arange(m * m).reshape(m, m)
        rr, cc = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        coords = np.stack([rr.ravel(), cc.ravel()], axis=1)
        rows = [index.ravel()]
        cols = [index.ravel()]
        vals = [self.node_degree(coords)]
        # interior horizontal bars (r, c) - (r, c+1) sit at h_cond[r, c+1]
        w = -self.h_cond[:, 1:m]
        rows += [index[:, :-1].ravel(), index[:, 1:].ravel()]
        cols += [index[:, 1:].ravel(), index[:, :-1].ravel()]
        vals += [w.ravel(), w.ravel()]
        # interior vertical bars (r, c) - (r+1, c) sit at v_cond[r+1, c]
        w = -self.v_cond[1:m, :]
        rows += [index[:-1, :].ravel(), index[1:, :].ravel()]
        cols += [index[1:, :].ravel(), index[:-1, :].ravel()]
        vals += [w.ravel(), w.ravel()]
        return scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m * m, m * m),
        )


def build_grid(
    m: int,
    seed: int,
    cond_low: float = 1.0,
    cond_high: float = 2.0,
    boundary_temps: npt.ArrayLike = 0.0,
) -> GridNetwork:
    """Random network with i.i.d. uniform conductivities on [cond_low, cond_high].

    Conductivities come from ``numpy.random.Generator(PCG64(seed))``: first
    ``h_cond`` row-major, then ``v_cond`` row-major.
    """
    _check_m(m)
    if not 0 < cond_low <= cond_high:
        raise ParameterError(f"need 0 < cond_low <= cond_high, got [{cond_low}, {cond_high}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    h = rng.uniform(cond_low, cond_high, size=(m, m + 1))
    v = rng.uniform(cond_low, cond_high, size=(m + 1, m))
    temps = np.broadcast_to(np.asarray(boundary_temps, dtype=np.float64), (4 * (m + 1),))
    return GridNetwork(m, h, v, temps.copy())


def ring_coordinates(m: int, kappa: int) -> IntArray:
    """Interior coordinates of ring kappa, clockwise from its top-left node."""
    lo, hi = m // 2 - kappa, m // 2 + kappa - 1
    top = [(lo, c) for c in range(lo, hi + 1)]
    right = [(r, hi) for r in range(lo + 1, hi + 1)]
    bottom = [(hi, c) for c in range(hi - 1, lo - 1, -1)]
    left = [(r, lo) for r in range(hi - 1, lo, -1)]
    return np.array(top + right + bottom + left, dtype=np.intp)


@dataclass(frozen=True)
class OutwardMap:
    """Links from ring kappa to ring kappa+1.

    Every inner node has a primary outward neighbour; primaries form a
    strictly increasing injection into the outer ring. The four inner corner
    nodes each have one more outward neighbour, listed in the corner arrays.
    """

    positions: IntArray
    corner_inner: IntArray
    corner_outer: IntArray

    @property
    def skipped(self) -> IntArray:
        """Outer positions that are not the primary target of any inner node."""
        outer_size = len(self.positions) + 8
        mask = np.ones(outer_size, dtype=bool)
        mask[self.positions] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class RingPartition:
    """Spiral numbering of the interior nodes.

    Attributes:
        m: Interior side length
        coords: Per-ring (r, c) coordinates in within-ring order
        rings: Per-ring global spiral indices (0-based)
        perm: perm[row_major_index] = spiral_index
        order: order[spiral_index] = row_major_index
        outward: outward[k] links ring k+1 to ring k+2 (1-based ring numbers)
    """

    m: int
    coords: tuple[IntArray, ...]
    rings: tuple[IntArray, ...]
    perm: IntArray
    order: IntArray
    outward: tuple[OutwardMap, ...]

    @property
    def sizes(self) -> list[int]:
        return [len(ring) for ring in self.rings]

    def to_row_major(self, x_spiral: npt.ArrayLike) -> Vector:
        return np.asarray(x_spiral, dtype=np.float64)[self.perm]

    def to_spiral(self, x_row_major: npt.ArrayLike) -> Vector:
        return np.asarray(x_row_major, dtype=np.float64)[self.order]

    def split(self, x_spiral: npt.ArrayLike) -> list[Vector]:
        """Cut a spiral-ordered vector into per-ring blocks."""
        x = np.asarray(x_spiral, dtype=np.float64)
        return [x[ring] for ring in self.rings]


def _outward_map(inner: IntArray, outer: IntArray) -> OutwardMap:
    lookup = {(int(r), int(c)): t for t, (r, c) in enumerate(outer)}
    positions = np.empty(len(inner), dtype=np.intp)
    corner_inner: list[int] = []
    corner_outer: list[int] = []
    for t, (r, c) in enumerate(inner):
        targets = sorted(
            lookup[nb]
            for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1))
            if nb in lookup
        )
        positions[t] = targets[0]
        for extra in targets[1:]:
            corner_inner.append(t)
            corner_outer.append(extra)
    return OutwardMap(
        positions,
        np.array(corner_inner, dtype=np.intp),
        np.array(corner_outer, dtype=np.intp),
    )


def spiral_partition(m: int) -> RingPartition:
    """Concentric rings J_1 ... J_{m/2}, innermost first; |J_k| = 8k - 4."""
    _check_m(m)
    coords = tuple(ring_coordinates(m, kappa) for kappa in range(1, m // 2 + 1))
    rings = []
    order_parts = []
    offset = 0
    for ring in coords:
        rings.append(np.arange(offset, offset + len(ring), dtype=np.intp))
        order_parts.append(ring[:, 0] * m + ring[:, 1])
        offset += len(ring)
    order = np.concatenate(order_parts).astype(np.intp)
    perm = np.empty_like(order)
    perm[order] = np.arange(m * m, dtype=np.intp)
    outward = tuple(_outward_map(coords[k], coords[k + 1]) for k in range(len(coords) - 1))
    return RingPartition(m, coords, tuple(rings), perm, order, outward)


@dataclass(frozen=True)
class RingCoupling:
    """The coupling block A_{k+1,k} between ring k (inner) and ring k+1 (outer).

    Applied as scale, then scatter along the outward map, plus the four corner
    links; the block is never materialized by the solver.
    """

    inner_size: int
    outer_size: int
    positions: IntArray
    conductivity: Vector
    corner_inner: IntArray
    corner_outer: IntArray
    corner_conductivity: Vector

    def _weights(self, values: Vector, x: np.ndarray) -> np.ndarray:
        return values if x.ndim == 1 else values[:, None]

    def apply(self, x_inner: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """A_{k+1,k} @ x for a vector or the columns of a thin matrix."""
        x = np.asarray(x_inner, dtype=np.float64)
        if x.shape[0] != self.inner_size:
            raise ShapeMismatchError(f"expected {self.inner_size} rows, got shape {x.shape}")
        y = np.zeros((self.outer_size, *x.shape[1:]))
        y[self.positions] = -self._weights(self.conductivity, x) * x
        y[self.corner_outer] -= (
            self._weights(self.corner_conductivity, x) * x[self.corner_inner]
        )
        return y

    def apply_transpose(self, x_outer: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """A_{k,k+1} @ x, using A_{k,k+1} = A_{k+1,k}^T."""
        x = np.asarray(x_outer, dtype=np.float64)
        if x.shape[0] != self.outer_size:
            raise ShapeMismatchError(f"expected {self.outer_size} rows, got shape {x.shape}")
        y = -self._weights(self.conductivity, x) * x[self.positions]
        np.add.at(
            y,
            self.corner_inner,
            -self._weights(self.corner_conductivity, x) * x[self.corner_outer],
        )
        return y

    def to_dense(self) -> DenseMatrix:
        """A_{k+1,k} as an outer x inner dense matrix."""
        block = np.zeros((self.outer_size, self.inner_size))
        block[self.positions, np.arange(self.inner_size)] = -self.conductivity
        block[self.corner_outer, self.corner_inner] -= self.corner_conductivity
        return block


@dataclass(frozen=True)
class BlockSystem:
    """Block tridiagonal form of the network equations in spiral order.

    ``diag[k]`` is A_{k+1,k+1} (0-based list index), ``couplings[k]`` is
    A_{k+2,k+1} and ``rhs[k]`` is b_{k+1}.
    """

    m: int
    diag: Sequence[SparseStencil]
    couplings: Sequence[RingCoupling]
    rhs: Sequence[Vector]
    partition: RingPartition

    @property
    def n_rings(self) -> int:
        return len(self.partition.rings)

    @property
    def sizes(self) -> list[int]:
        return self.partition.sizes

    def with_rhs(self, blocks: Sequence[npt.ArrayLike]) -> "BlockSystem":
        values = [np.asarray(b, dtype=np.float64) for b in blocks]
        if [len(b) for b in values] != self.sizes:
            raise ShapeMismatchError("rhs blocks do not match ring sizes")
        return replace(self, rhs=tuple(values))

    def spiral_rhs(self) -> Vector:
        return np.concatenate([np.asarray(b) for b in self.rhs])

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        """The full system matrix in spiral order."""
        sizes = self.sizes
        blocks: list[list[scipy.sparse.spmatrix | None]] = [
            [None] * len(sizes) for _ in sizes
        ]
        for k, stencil in enumerate(self.diag):
            blocks[k][k] = stencil.to_sparse()
        for k, coupling in enumerate(self.couplings):
            lower = scipy.sparse.csr_matrix(coupling.to_dense())
            blocks[k + 1][k] = lower
            blocks[k][k + 1] = lower.T
        return scipy.sparse.bmat(blocks, format="csr")


def _ring_stencil(g: GridNetwork, ring: IntArray) -> SparseStencil:
    main = g.node_degree(ring)
    off = -g.bar_conductivity(ring[:-1], ring[1:])
    closing = -float(g.bar_conductivity(ring[-1:], ring[:1])[0])
    return SparseStencil.cyclic(main, off, closing)


def _ring_coupling(
    g: GridNetwork, inner: IntArray, outer: IntArray, links: OutwardMap
) -> RingCoupling:
    return RingCoupling(
        inner_size=len(inner),
        outer_size=len(outer),
        positions=links.positions,
        conductivity=g.bar_conductivity(inner, outer[links.positions]),
        corner_inner=links.corner_inner,
        corner_outer=links.corner_outer,
        corner_conductivity=g.bar_conductivity(
            inner[links.corner_inner], outer[links.corner_outer]
        ),
    )


def boundary_rhs(g: GridNetwork, partition: RingPartition | None = None) -> list[Vector]:
    """Per-ring load blocks derived from the boundary temperatures.

    Only the outermost ring touches the boundary, so every other block is zero.
    """
    partition = partition or spiral_partition(g.m)
    return partition.split(partition.to_spiral(g.row_major_rhs()))


def assemble_blocks(g: GridNetwork, partition: RingPartition | None = None) -> BlockSystem:
    """Assemble A_kk, A_{k+1,k} and b_k for every ring."""
    partition = partition or spiral_partition(g.m)
    if partition.m != g.m:
        raise ShapeMismatchError(f"partition for m={partition.m} used with network m={g.m}")
    diag = tuple(_ring_stencil(g, ring) for ring in partition.coords)
    couplings = tuple(
        _ring_coupling(g, partition.coords[k], partition.coords[k + 1], links)
        for k, links in enumerate(partition.outward)
    )
    rhs = tuple(boundary_rhs(g, partition))
    logger.debug(f"Assembled {len(diag)} ring blocks for m={g.m}")
    return BlockSystem(g.m, diag, couplings, rhs, partition)

"""Hierarchically tessellated (HSS) matrices.

An :class:`HssMatrix` is a binary tree over a contiguous index range. Leaves
hold dense diagonal blocks; every branch holds its two children plus the two
off-diagonal sibling blocks as :class:`~ringsolve_core.linalg.LowRankFactor`
pairs. All operations return new values; nothing is modified in place.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
import numpy.typing as npt
import scipy.sparse

from .exceptions import ParameterError, ShapeMismatchError, SizeGuardError
from .linalg import (
    DenseMatrix,
    LowRankFactor,
    Vector,
    as_dense,
    dense_invert,
    lr_add,
    lr_recompress,
    truncated_factor,
)

logger = logging.getLogger(__name__)

DEFAULT_LEAF_MAX = 64
DEFAULT_EPS = 1e-7
DEFAULT_DENSIFY_CAP = 8192

# A leaf grown beyond this multiple of leaf_max triggers re-tessellation
RETESSELLATE_FACTOR = 2


@dataclass(frozen=True)
class HssLeaf:
    """Dense diagonal block."""

    block: DenseMatrix

    def __post_init__(self) -> None:
        block = as_dense(self.block, "leaf block")
        if block.shape[0] != block.shape[1]:
            raise ShapeMismatchError(f"leaf block must be square, got {block.shape}")
        object.__setattr__(self, "block", block)

    @property
    def size(self) -> int:
        return int(self.block.shape[0])


@dataclass(frozen=True)
class HssBranch:
    """Two children plus the off-diagonal blocks between them.

    ``upper`` is the |lo| x |hi| block, ``lower`` the |hi| x |lo| block.
    """

    lo: "HssNode"
    hi: "HssNode"
    upper: LowRankFactor
    lower: LowRankFactor

    def __post_init__(self) -> None:
        expected_upper = (self.lo.size, self.hi.size)
        expected_lower = (self.hi.size, self.lo.size)
        if self.upper.shape != expected_upper or self.lower.shape != expected_lower:
            raise ShapeMismatchError(
                f"off-diagonal shapes {self.upper.shape}/{self.lower.shape} do not match "
                f"children {expected_upper}/{expected_lower}"
            )

    @property
    def size(self) -> int:
        return self.lo.size + self.hi.size


HssNode = Union[HssLeaf, HssBranch]


@dataclass(frozen=True)
class HssMatrix:
    """Square matrix stored as a tessellation tree.

    Attributes:
        root: Tree covering [0, n)
        leaf_max: Tessellation threshold used when (re)building the tree
        eps: Truncation accuracy carried from construction
    """

    root: HssNode
    leaf_max: int = DEFAULT_LEAF_MAX
    eps: float = DEFAULT_EPS

    def __post_init__(self) -> None:
        if self.leaf_max < 1:
            raise ParameterError(f"leaf_max must be at least 1, got {self.leaf_max}")
        if self.eps <= 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")

    @property
    def n(self) -> int:
        return self.root.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.n

    def with_root(self, root: HssNode) -> "HssMatrix":
        return HssMatrix(root, self.leaf_max, self.eps)


@dataclass(frozen=True)
class HssStats:
    """Storage summary of an HSS matrix."""

    max_rank: int
    total_floats: int
    depth: int
    leaf_count: int
    max_leaf: int


@dataclass(frozen=True)
class SparseStencil:
    """Banded sparse matrix with a few extra entries.

    ``sub[i]`` sits at (i+1, i), ``sup[i]`` at (i, i+1). ``extra`` holds
    (row, col, value) triples such as the wraparound corner couplings of a
    ring Laplacian.
    """

    size: int
    main: Vector
    sub: Vector
    sup: Vector
    extra: tuple[tuple[int, int, float], ...] = field(default=())

    def __post_init__(self) -> None:
        main = np.asarray(self.main, dtype=np.float64)
        sub = np.asarray(self.sub, dtype=np.float64)
        sup = np.asarray(self.sup, dtype=np.float64)
        band = max(self.size - 1, 0)
        if main.shape != (self.size,) or sub.shape != (band,) or sup.shape != (band,):
            raise ShapeMismatchError(
                f"band lengths {main.shape}/{sub.shape}/{sup.shape} do not fit size {self.size}"
            )
        for row, col, _ in self.extra:
            if not (0 <= row < self.size and 0 <= col < self.size):
                raise IndexError(f"extra entry ({row}, {col}) out of range for size {self.size}")
        object.__setattr__(self, "main", main)
        object.__setattr__(self, "sub", sub)
        object.__setattr__(self, "sup", sup)
        object.__setattr__(self, "extra", tuple(self.extra))

    @classmethod
    def zeros(cls, size: int) -> "SparseStencil":
        band = max(size - 1, 0)
        return cls(size, np.zeros(size), np.zeros(band), np.zeros(band))

    @classmethod
    def cyclic(cls, main: Vector, off: Vector, closing: float) -> "SparseStencil":
        """Symmetric cyclic tridiagonal matrix.

        Args:
            main: Diagonal
            off: Coupling between consecutive indices (length size-1)
            closing: Coupling between the last and the first index
        """
        size = len(main)
        extra: tuple[tuple[int, int, float], ...] = ()
        if size > 2 and closing != 0.0:
            extra = ((0, size - 1, float(closing)), (size - 1, 0, float(closing)))
        return cls(size, main, off, off, extra)

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonzero entries as (rows, cols, values) arrays."""
        idx = np.arange(self.size)
        rows = [idx, idx[1:], idx[:-1]]
        cols = [idx, idx[:-1], idx[1:]]
        vals = [self.main, self.sub, self.sup]
        if self.extra:
            extra = np.array(self.extra, dtype=np.float64)
            rows.append(extra[:, 0].astype(np.intp))
            cols.append(extra[:, 1].astype(np.intp))
            vals.append(extra[:, 2])
        r, c, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        nonzero = v != 0.0
        return r[nonzero].astype(np.intp), c[nonzero].astype(np.intp), v[nonzero]

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        rows, cols, vals = self.coo()
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(self.size, self.size))

    def densify(self) -> DenseMatrix:
        dense = np.zeros((self.size, self.size))
        rows, cols, vals = self.coo()
        np.add.at(dense, (rows, cols), vals)
        return dense

    def matvec(self, x: npt.ArrayLike) -> Vector:
        return np.asarray(self.to_sparse() @ np.asarray(x, dtype=np.float64))


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _balanced(n: int, leaf_max: int, make_leaf: Any) -> HssNode:
    if n <= leaf_max:
        return HssLeaf(make_leaf(n))
    half = n // 2
    return HssBranch(
        _balanced(half, leaf_max, make_leaf),
        _balanced(n - half, leaf_max, make_leaf),
        LowRankFactor.zeros(half, n - half),
        LowRankFactor.zeros(n - half, half),
    )


def hss_zeros(n: int, leaf_max: int = DEFAULT_LEAF_MAX, eps: float = DEFAULT_EPS) -> HssMatrix:
    """Zero matrix on the balanced bisection of [0, n)."""
    return HssMatrix(_balanced(n, leaf_max, lambda k: np.zeros((k, k))), leaf_max, eps)


def hss_identity(n: int, leaf_max: int = DEFAULT_LEAF_MAX, eps: float = DEFAULT_EPS) -> HssMatrix:
    """Identity on the balanced bisection of [0, n)."""
    return HssMatrix(_balanced(n, leaf_max, np.eye), leaf_max, eps)


def _from_dense(
    m: DenseMatrix, leaf_max: int, eps: float, relative: bool
) -> HssNode:
    n = m.shape[0]
    if n <= leaf_max:
        return HssLeaf(m.copy())
    half = n // 2
    return HssBranch(
        _from_dense(m[:half, :half], leaf_max, eps, relative),
        _from_dense(m[half:, half:], leaf_max, eps, relative),
        truncated_factor(m[:half, half:], eps, relative=relative),
        truncated_factor(m[half:, :half], eps, relative=relative),
    )


def hss_from_dense(
    matrix: npt.ArrayLike,
    leaf_max: int = DEFAULT_LEAF_MAX,
    eps: float = DEFAULT_EPS,
    *,
    relative: bool = False,
) -> HssMatrix:
    """Compress a dense square matrix on the balanced bisection of its index range.

    Each off-diagonal block is truncated to eps, so the densified result is
    within eps per tree level of the input.
    """
    m = as_dense(matrix)
    if m.shape[0] != m.shape[1]:
        raise ShapeMismatchError(f"HSS matrices are square, got {m.shape}")
    if leaf_max < 1:
        raise ParameterError(f"leaf_max must be at least 1, got {leaf_max}")
    return HssMatrix(_from_dense(m, leaf_max, eps, relative), leaf_max, eps)


def _densify(node: HssNode) -> DenseMatrix:
    if isinstance(node, HssLeaf):
        return node.block.copy()
    return np.block(
        [
            [_densify(node.lo), node.upper.densify()],
            [node.lower.densify(), _densify(node.hi)],
        ]
    )


def hss_densify(h: HssMatrix, cap: int = DEFAULT_DENSIFY_CAP) -> DenseMatrix:
    """Evaluate the represented matrix exactly.

    Raises:
        SizeGuardError: If n exceeds cap
    """
    if h.n > cap:
        raise SizeGuardError(f"refusing to densify a {h.n} x {h.n} HSS matrix (cap {cap})")
    return _densify(h.root)


# ---------------------------------------------------------------------------
# Application
# ---------------------------------------------------------------------------


def _apply(node: HssNode, x: DenseMatrix, transpose: bool = False) -> DenseMatrix:
    if isinstance(node, HssLeaf):
        return node.block.T @ x if transpose else node.block @ x
    half = node.lo.size
    x_lo, x_hi = x[:half], x[half:]
    if transpose:
        y_lo = _apply(node.lo, x_lo, True) + node.lower.rmatvec(x_hi)
        y_hi = _apply(node.hi, x_hi, True) + node.upper.rmatvec(x_lo)
    else:
        y_lo = _apply(node.lo, x_lo) + node.upper.matvec(x_hi)
        y_hi = _apply(node.hi, x_hi) + node.lower.matvec(x_lo)
    return np.concatenate([y_lo, y_hi], axis=0)


def hss_apply_thin(h: HssMatrix, x: npt.ArrayLike, *, transpose: bool = False) -> DenseMatrix:
    """Multiply the HSS matrix (or its transpose) into the columns of X."""
    block = np.asarray(x, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != h.n:
        raise ShapeMismatchError(f"expected a matrix with {h.n} rows, got shape {block.shape}")
    return _apply(h.root, block, transpose)


def hss_matvec(h: HssMatrix, x: npt.ArrayLike) -> Vector:
    """Matrix-vector product in O(p n log n) operations."""
    vector = np.asarray(x, dtype=np.float64)
    if vector.shape != (h.n,):
        raise ShapeMismatchError(f"expected a vector of length {h.n}, got shape {vector.shape}")
    return _apply(h.root, vector[:, None])[:, 0]


# ---------------------------------------------------------------------------
# Updates
# ---------------------------------------------------------------------------


def _push_update(node: HssNode, u: DenseMatrix, v: DenseMatrix, eps: float) -> HssNode:
    if isinstance(node, HssLeaf):
        return HssLeaf(node.block + u @ v.T)
    half = node.lo.size
    return HssBranch(
        _push_update(node.lo, u[:half], v[:half], eps),
        _push_update(node.hi, u[half:], v[half:], eps),
        lr_add(node.upper, LowRankFactor(u[:half], v[half:]), eps),
        lr_add(node.lower, LowRankFactor(u[half:], v[:half]), eps),
    )


def _update_node(node: HssNode, update: LowRankFactor, eps: float) -> HssNode:
    if update.rank == 0:
        return node
    update = lr_recompress(update, eps)
    if update.rank == 0:
        return node
    return _push_update(node, update.left, update.right, eps)


def hss_lowrank_update(
    h: HssMatrix, update: LowRankFactor, eps: float | None = None
) -> HssMatrix:
    """Add ``U V^T`` to an HSS matrix.

    Leaves absorb their diagonal slice densely; every off-diagonal block gets
    the matching slice added and recompressed to eps.
    """
    if update.shape != h.shape:
        raise ShapeMismatchError(f"update of shape {update.shape} does not fit {h.shape}")
    if update.rank == 0:
        return h
    return h.with_root(_update_node(h.root, update, h.eps if eps is None else eps))


def _add_coo(
    node: HssNode, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, eps: float
) -> HssNode:
    if rows.size == 0:
        return node
    if isinstance(node, HssLeaf):
        block = node.block.copy()
        np.add.at(block, (rows, cols), vals)
        return HssLeaf(block)

    half = node.lo.size
    row_lo, col_lo = rows < half, cols < half
    in_lo = row_lo & col_lo
    in_hi = ~row_lo & ~col_lo
    in_upper = row_lo & ~col_lo
    in_lower = ~row_lo & col_lo

    def scatter(
        mask: np.ndarray, row_shift: int, col_shift: int, shape: tuple[int, int]
    ) -> LowRankFactor:
        k = int(np.count_nonzero(mask))
        left = np.zeros((shape[0], k))
        right = np.zeros((shape[1], k))
        left[rows[mask] - row_shift, np.arange(k)] = vals[mask]
        right[cols[mask] - col_shift, np.arange(k)] = 1.0
        return LowRankFactor(left, right)

    upper, lower = node.upper, node.lower
    if in_upper.any():
        upper = lr_add(upper, scatter(in_upper, 0, half, upper.shape), eps)
    if in_lower.any():
        lower = lr_add(lower, scatter(in_lower, half, 0, lower.shape), eps)
    return HssBranch(
        _add_coo(node.lo, rows[in_lo], cols[in_lo], vals[in_lo], eps),
        _add_coo(node.hi, rows[in_hi] - half, cols[in_hi] - half, vals[in_hi], eps),
        upper,
        lower,
    )


def hss_add_stencil(h: HssMatrix, stencil: SparseStencil, eps: float | None = None) -> HssMatrix:
    """Add a sparse banded matrix to an HSS matrix.

    Band entries inside a leaf land in the dense block; entries that cross a
    split (band neighbours across a child boundary, wraparound corners) become
    rank-1 contributions to the off-diagonal factor they fall in.
    """
    if stencil.size != h.n:
        raise ShapeMismatchError(f"stencil of size {stencil.size} does not fit n = {h.n}")
    rows, cols, vals = stencil.coo()
    if rows.size == 0:
        return h
    return h.with_root(_add_coo(h.root, rows, cols, vals, h.eps if eps is None else eps))


def _scale(node: HssNode, d_left: Vector, d_right: Vector) -> HssNode:
    if isinstance(node, HssLeaf):
        return HssLeaf(d_left[:, None] * node.block * d_right[None, :])
    half = node.lo.size
    return HssBranch(
        _scale(node.lo, d_left[:half], d_right[:half]),
        _scale(node.hi, d_left[half:], d_right[half:]),
        node.upper.scaled(d_left[:half], d_right[half:]),
        node.lower.scaled(d_left[half:], d_right[:half]),
    )


def hss_scale(h: HssMatrix, d_left: npt.ArrayLike, d_right: npt.ArrayLike) -> HssMatrix:
    """Return diag(d_left) @ H @ diag(d_right); exact, ranks unchanged."""
    left = np.asarray(d_left, dtype=np.float64)
    right = np.asarray(d_right, dtype=np.float64)
    if left.shape != (h.n,) or right.shape != (h.n,):
        raise ShapeMismatchError(
            f"scaling vectors {left.shape}/{right.shape} do not fit n = {h.n}"
        )
    return h.with_root(_scale(h.root, left, right))


# ---------------------------------------------------------------------------
# Embedding and re-tessellation
# ---------------------------------------------------------------------------


def _embed(
    node: HssNode, positions: np.ndarray, start: int, stop: int
) -> HssNode:
    """Embed node (whose indices map to ``positions``) into target range [start, stop)."""
    local = positions - start
    if isinstance(node, HssLeaf):
        block = np.zeros((stop - start, stop - start))
        block[np.ix_(local, local)] = node.block
        return HssLeaf(block)

    half = node.lo.size
    split = int(positions[half])
    lo_pos, hi_pos = positions[:half], positions[half:]

    def widen(factor: LowRankFactor, row_pos: np.ndarray, row_start: int, row_len: int,
              col_pos: np.ndarray, col_start: int, col_len: int) -> LowRankFactor:
        left = np.zeros((row_len, factor.rank))
        right = np.zeros((col_len, factor.rank))
        left[row_pos - row_start] = factor.left
        right[col_pos - col_start] = factor.right
        return LowRankFactor(left, right)

    lo_len, hi_len = split - start, stop - split
    return HssBranch(
        _embed(node.lo, lo_pos, start, split),
        _embed(node.hi, hi_pos, split, stop),
        widen(node.upper, lo_pos, start, lo_len, hi_pos, split, hi_len),
        widen(node.lower, hi_pos, split, hi_len, lo_pos, start, lo_len),
    )


def _max_leaf(node: HssNode) -> int:
    if isinstance(node, HssLeaf):
        return node.size
    return max(_max_leaf(node.lo), _max_leaf(node.hi))


def needs_retessellation(h: HssMatrix) -> bool:
    """True once any leaf has grown beyond RETESSELLATE_FACTOR x leaf_max."""
    return _max_leaf(h.root) > RETESSELLATE_FACTOR * h.leaf_max


def hss_embed(
    h: HssMatrix,
    target_size: int,
    position_map: npt.ArrayLike,
    *,
    retessellate: bool = True,
) -> HssMatrix:
    """Inject H into a larger index set, zeros elsewhere.

    ``result[p[i], p[j]] == H[i, j]``. The tree keeps its shape with every
    node widened over the skipped positions next to it, so stored ranks are
    unchanged. If a leaf grows beyond 2 x leaf_max the result is
    re-tessellated onto the balanced bisection of [0, target_size) unless
    ``retessellate`` is False, in which case the caller decides.

    Raises:
        ValueError: If the map is not strictly increasing or out of range
    """
    positions = np.asarray(position_map)
    if positions.shape != (h.n,) or not np.issubdtype(positions.dtype, np.integer):
        raise ValueError(f"position map must be {h.n} integers, got {positions.shape}")
    positions = positions.astype(np.intp)
    if h.n and (positions[0] < 0 or positions[-1] >= target_size):
        raise ValueError(f"position map out of range [0, {target_size})")
    if np.any(np.diff(positions) <= 0):
        raise ValueError("position map must be strictly increasing")

    embedded = h.with_root(_embed(h.root, positions, 0, target_size))
    if retessellate and needs_retessellation(embedded):
        logger.debug(
            f"Embedding {h.n} -> {target_size} grew a leaf to {_max_leaf(embedded.root)}, "
            "re-tessellating"
        )
        return hss_retessellate(embedded)
    return embedded


def _dense_block(node: HssNode, r0: int, r1: int, c0: int, c1: int) -> DenseMatrix:
    out = np.zeros((max(r1 - r0, 0), max(c1 - c0, 0)))
    if out.size == 0:
        return out
    if isinstance(node, HssLeaf):
        return node.block[r0:r1, c0:c1].copy()
    half = node.lo.size
    lo_r1, lo_c1 = min(r1, half), min(c1, half)
    hi_r0, hi_c0 = max(r0, half), max(c0, half)
    if r0 < lo_r1 and c0 < lo_c1:
        out[: lo_r1 - r0, : lo_c1 - c0] = _dense_block(node.lo, r0, lo_r1, c0, lo_c1)
    if hi_r0 < r1 and hi_c0 < c1:
        out[hi_r0 - r0 :, hi_c0 - c0 :] = _dense_block(
            node.hi, hi_r0 - half, r1 - half, hi_c0 - half, c1 - half
        )
    if r0 < lo_r1 and hi_c0 < c1:
        out[: lo_r1 - r0, hi_c0 - c0 :] = (
            node.upper.left[r0:lo_r1] @ node.upper.right[hi_c0 - half : c1 - half].T
        )
    if hi_r0 < r1 and c0 < lo_c1:
        out[hi_r0 - r0 :, : lo_c1 - c0] = (
            node.lower.left[hi_r0 - half : r1 - half] @ node.lower.right[c0:lo_c1].T
        )
    return out


def _lowrank_block(
    node: HssNode, r0: int, r1: int, c0: int, c1: int, eps: float
) -> LowRankFactor:
    rows, cols = r1 - r0, c1 - c0
    if rows <= 0 or cols <= 0:
        return LowRankFactor.zeros(max(rows, 0), max(cols, 0))
    if isinstance(node, HssLeaf):
        return truncated_factor(node.block[r0:r1, c0:c1], eps)

    half = node.lo.size
    lo_r1, lo_c1 = min(r1, half), min(c1, half)
    hi_r0, hi_c0 = max(r0, half), max(c0, half)
    pieces: list[tuple[int, int, LowRankFactor]] = []
    if r0 < lo_r1 and c0 < lo_c1:
        pieces.append((0, 0, _lowrank_block(node.lo, r0, lo_r1, c0, lo_c1, eps)))
    if hi_r0 < r1 and hi_c0 < c1:
        pieces.append(
            (
                hi_r0 - r0,
                hi_c0 - c0,
                _lowrank_block(node.hi, hi_r0 - half, r1 - half, hi_c0 - half, c1 - half, eps),
            )
        )
    if r0 < lo_r1 and hi_c0 < c1:
        pieces.append(
            (
                0,
                hi_c0 - c0,
                LowRankFactor(
                    node.upper.left[r0:lo_r1], node.upper.right[hi_c0 - half : c1 - half]
                ),
            )
        )
    if hi_r0 < r1 and c0 < lo_c1:
        pieces.append(
            (
                hi_r0 - r0,
                0,
                LowRankFactor(
                    node.lower.left[hi_r0 - half : r1 - half], node.lower.right[c0:lo_c1]
                ),
            )
        )

    lefts, rights = [], []
    for row_offset, col_offset, piece in pieces:
        left = np.zeros((rows, piece.rank))
        right = np.zeros((cols, piece.rank))
        left[row_offset : row_offset + piece.shape[0]] = piece.left
        right[col_offset : col_offset + piece.shape[1]] = piece.right
        lefts.append(left)
        rights.append(right)
    return lr_recompress(LowRankFactor(np.hstack(lefts), np.hstack(rights)), eps)


def _is_balanced(node: HssNode, leaf_max: int) -> bool:
    if isinstance(node, HssLeaf):
        return node.size <= leaf_max
    return (
        node.size > leaf_max
        and node.lo.size == node.size // 2
        and _is_balanced(node.lo, leaf_max)
        and _is_balanced(node.hi, leaf_max)
    )


def _rebuild(source: HssNode, start: int, stop: int, leaf_max: int, eps: float) -> HssNode:
    n = stop - start
    if n <= leaf_max:
        return HssLeaf(_dense_block(source, start, stop, start, stop))
    mid = start + n // 2
    return HssBranch(
        _rebuild(source, start, mid, leaf_max, eps),
        _rebuild(source, mid, stop, leaf_max, eps),
        _lowrank_block(source, start, mid, mid, stop, eps),
        _lowrank_block(source, mid, stop, start, mid, eps),
    )


def hss_retessellate(
    h: HssMatrix, leaf_max: int | None = None, eps: float | None = None
) -> HssMatrix:
    """Rebuild the tree on the balanced bisection of [0, n).

    An already balanced tree is returned as is.
    """
    leaf_max = h.leaf_max if leaf_max is None else leaf_max
    eps = h.eps if eps is None else eps
    if _is_balanced(h.root, leaf_max):
        if leaf_max == h.leaf_max and eps == h.eps:
            return h
        return HssMatrix(h.root, leaf_max, eps)
    before = hss_stats(h)
    rebuilt = HssMatrix(_rebuild(h.root, 0, h.n, leaf_max, eps), leaf_max, eps)
    logger.debug(
        f"Re-tessellated n={h.n}: {before.leaf_count} leaves (max {before.max_leaf}) -> "
        f"{hss_stats(rebuilt).leaf_count} leaves"
    )
    return rebuilt


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------


def _invert(node: HssNode, eps: float) -> HssNode:
    if isinstance(node, HssLeaf):
        return HssLeaf(dense_invert(node.block))

    u12, v12 = node.upper.left, node.upper.right
    u21, v21 = node.lower.left, node.lower.right

    x22 = _invert(node.hi, eps)
    x22_u21 = _apply(x22, u21)
    y11 = _update_node(node.lo, LowRankFactor(-(u12 @ (v12.T @ x22_u21)), v21), eps)
    x11 = _invert(y11, eps)

    x11_u12 = _apply(x11, u12)
    x22t_v12 = _apply(x22, v12, transpose=True)
    x11t_v21 = _apply(x11, v21, transpose=True)

    upper = lr_recompress(LowRankFactor(-x11_u12, x22t_v12), eps)
    lower = lr_recompress(LowRankFactor(-x22_u21, x11t_v21), eps)
    correction = LowRankFactor(x22_u21 @ (v21.T @ x11_u12), x22t_v12)
    return HssBranch(x11, _update_node(x22, correction, eps), upper, lower)


def hss_invert(h: HssMatrix, eps: float | None = None) -> HssMatrix:
    """Invert an HSS matrix with the recursive 2 x 2 block formula.

    The trailing block is inverted first, the leading Schur complement
    ``A11 - A12 X22 A21`` is formed as a low-rank update and inverted next,
    and the four blocks of the inverse are assembled with low-rank
    off-diagonal factors recompressed to eps.

    Raises:
        SingularMatrixError: If a leaf is numerically singular
    """
    return h.with_root(_invert(h.root, h.eps if eps is None else eps))


# ---------------------------------------------------------------------------
# Inspection
# ---------------------------------------------------------------------------


def _stats(node: HssNode) -> HssStats:
    if isinstance(node, HssLeaf):
        return HssStats(0, node.block.size, 0, 1, node.size)
    lo, hi = _stats(node.lo), _stats(node.hi)
    return HssStats(
        max_rank=max(lo.max_rank, hi.max_rank, node.upper.rank, node.lower.rank),
        total_floats=lo.total_floats + hi.total_floats + node.upper.nfloats + node.lower.nfloats,
        depth=1 + max(lo.depth, hi.depth),
        leaf_count=lo.leaf_count + hi.leaf_count,
        max_leaf=max(lo.max_leaf, hi.max_leaf),
    )


def hss_stats(h: HssMatrix) -> HssStats:
    """Exact count of stored floats, maximum off-diagonal rank and tree depth."""
    return _stats(h.root)


def _tree(node: HssNode, start: int) -> dict[str, Any]:
    if isinstance(node, HssLeaf):
        return {"start": start, "stop": start + node.size, "leaf": True}
    return {
        "start": start,
        "stop": start + node.size,
        "leaf": False,
        "rank_upper": node.upper.rank,
        "rank_lower": node.lower.rank,
        "children": [_tree(node.lo, start), _tree(node.hi, start + node.lo.size)],
    }


def hss_to_tree(h: HssMatrix) -> dict[str, Any]:
    """Tessellation as a JSON-serializable tree of node ranges and ranks."""
    return {"n": h.n, "leaf_max": h.leaf_max, "eps": h.eps, "root": _tree(h.root, 0)}

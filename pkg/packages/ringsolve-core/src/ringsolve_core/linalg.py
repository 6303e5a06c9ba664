"""Dense kernels and eps-adaptive low-rank factorization.

Dense matrices are plain two-dimensional ``float64`` numpy arrays. Off-diagonal
blocks are held as :class:`LowRankFactor` pairs ``(left, right)`` standing for
``left @ right.T``.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .exceptions import ParameterError, ShapeMismatchError, SingularMatrixError

logger = logging.getLogger(__name__)

DenseMatrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

# Pivots smaller than this fraction of the largest pivot count as singular
PIVOT_RTOL = 1e-14

# Fraction of the truncation budget spent on dropping the trailing rows of the
# pivoted triangular factor before the small SVD
QR_TAIL_FRACTION = 1e-2

FactorMethod = Literal["qr", "svd"]


def as_dense(matrix: npt.ArrayLike, name: str = "matrix") -> DenseMatrix:
    """Validate and convert input to a finite 2-D float64 array.

    Args:
        matrix: Anything numpy can turn into a 2-D array
        name: Name used in error messages

    Returns:
        The array (no copy when already float64)

    Raises:
        ValueError: If the input is not 2-D or holds NaN/Inf
    """
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite entries")
    return array


def _readonly(array: np.ndarray) -> np.ndarray:
    view = array.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True)
class LowRankFactor:
    """The m x n matrix ``left @ right.T`` with shared inner rank k.

    A rank of zero is legal and denotes the zero matrix.
    """

    left: DenseMatrix
    right: DenseMatrix

    def __post_init__(self) -> None:
        left = as_dense(self.left, "left factor")
        right = as_dense(self.right, "right factor")
        if left.shape[1] != right.shape[1]:
            raise ShapeMismatchError(
                f"factor ranks differ: left {left.shape}, right {right.shape}"
            )
        object.__setattr__(self, "left", _readonly(left))
        object.__setattr__(self, "right", _readonly(right))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "LowRankFactor":
        """Rank-0 factor of the given shape."""
        return cls(np.zeros((rows, 0)), np.zeros((cols, 0)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.shape[0], self.right.shape[0]

    @property
    def rank(self) -> int:
        return int(self.left.shape[1])

    @property
    def nfloats(self) -> int:
        """Number of stored 64-bit values."""
        return int(self.left.size + self.right.size)

    def densify(self) -> DenseMatrix:
        return self.left @ self.right.T

    def matvec(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Apply to a vector or to the columns of a thin matrix."""
        return self.left @ (self.right.T @ np.asarray(x, dtype=np.float64))

    def rmatvec(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Apply the transpose."""
        return self.right @ (self.left.T @ np.asarray(x, dtype=np.float64))

    def scaled(
        self, d_left: Vector | None = None, d_right: Vector | None = None
    ) -> "LowRankFactor":
        """Return diag(d_left) @ self @ diag(d_right); the rank is unchanged."""
        left = self.left if d_left is None else self.left * np.asarray(d_left)[:, None]
        right = self.right if d_right is None else self.right * np.asarray(d_right)[:, None]
        return LowRankFactor(left, right)

    def __neg__(self) -> "LowRankFactor":
        return LowRankFactor(-self.left, self.right)


def dense_invert(matrix: npt.ArrayLike) -> DenseMatrix:
    """Invert a square matrix through a partially pivoted LU factorization.

    Args:
        matrix: Square, numerically nonsingular matrix

    Returns:
        The inverse

    Raises:
        ShapeMismatchError: If the matrix is not square
        SingularMatrixError: If a pivot falls below PIVOT_RTOL times the largest pivot
    """
    m = as_dense(matrix)
    n, cols = m.shape
    if n != cols:
        raise ShapeMismatchError(f"cannot invert non-square matrix of shape {m.shape}")
    if n == 0:
        return np.zeros((0, 0))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)

    pivots = np.abs(np.diag(lu))
    largest = float(pivots.max())
    smallest = float(pivots.min())
    if largest == 0.0 or smallest < PIVOT_RTOL * largest:
        ratio = smallest / largest if largest else 0.0
        raise SingularMatrixError(
            f"matrix of size {n} is numerically singular (pivot ratio {ratio:.3e})",
            pivot_ratio=ratio,
        )
    return scipy.linalg.lu_solve((lu, piv), np.eye(n), check_finite=False)


def _truncation_rank(singular_values: np.ndarray, tol: float) -> int:
    """Smallest k whose discarded singular values are all <= tol."""
    return int(np.count_nonzero(singular_values > tol))


def truncated_factor(
    matrix: npt.ArrayLike,
    eps: float,
    *,
    relative: bool = False,
    method: FactorMethod = "qr",
) -> LowRankFactor:
    """Factor a matrix to accuracy eps with the smallest possible rank.

    The default criterion is absolute: ``||M - U V^T||_2 <= eps``. With
    ``relative=True`` the bound is ``eps * ||M||_2``.

    The ``qr`` method runs a column-pivoted QR, drops the trailing rows of R
    whose Frobenius norm is negligible, then truncates an SVD of the remaining
    rows. The ``svd`` method truncates a full SVD and exists for oracle use.

    Args:
        matrix: Dense m x n matrix
        eps: Accuracy, must be positive
        relative: Scale eps by the spectral norm of the matrix
        method: "qr" (default) or "svd"

    Returns:
        LowRankFactor of minimal rank meeting the bound
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    m = as_dense(matrix)
    rows, cols = m.shape
    if m.size == 0 or not np.any(m):
        return LowRankFactor.zeros(rows, cols)

    if method == "svd":
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, check_finite=False)
        tol = eps * s[0] if relative else eps
        k = _truncation_rank(s, tol)
        return LowRankFactor(u[:, :k] * s[:k], vt[:k].T)

    if method != "qr":
        raise ValueError(f"unknown factorization method: {method!r}")

    q, r, perm = scipy.linalg.qr(m, mode="economic", pivoting=True, check_finite=False)
    scale = abs(r[0, 0]) if relative else 1.0
    row_norms = np.einsum("ij,ij->i", r, r)
    # tail[j] = ||R[j:, :]||_F, with tail[p] = 0
    tail = np.append(np.sqrt(np.cumsum(row_norms[::-1])[::-1]), 0.0)
    keep = int(np.count_nonzero(tail[:-1] > QR_TAIL_FRACTION * eps * scale))
    if keep == 0:
        return LowRankFactor.zeros(rows, cols)

    u, s, vt = scipy.linalg.svd(r[:keep], full_matrices=False, check_finite=False)
    tol = (eps * s[0] if relative else eps) - tail[keep]
    k = _truncation_rank(s, tol)
    left = q[:, :keep] @ (u[:, :k] * s[:k])
    right = np.empty((cols, k))
    right[perm] = vt[:k].T
    return LowRankFactor(left, right)


def lr_recompress(factor: LowRankFactor, eps: float, *, relative: bool = False) -> LowRankFactor:
    """Reduce the stored rank of a factor to the minimum for accuracy eps.

    Orthogonalizes both sides with thin QR and truncates the SVD of the small
    k x k core. The result never has a larger rank than the input.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if factor.rank == 0:
        return factor
    rows, cols = factor.shape
    if rows == 0 or cols == 0:
        return LowRankFactor.zeros(rows, cols)

    q_left, r_left = scipy.linalg.qr(factor.left, mode="economic", check_finite=False)
    q_right, r_right = scipy.linalg.qr(factor.right, mode="economic", check_finite=False)
    core = r_left @ r_right.T
    u, s, vt = scipy.linalg.svd(core, full_matrices=False, check_finite=False)
    if s.size == 0 or s[0] == 0.0:
        return LowRankFactor.zeros(rows, cols)
    tol = eps * s[0] if relative else eps
    k = _truncation_rank(s, tol)
    return LowRankFactor(q_left @ (u[:, :k] * s[:k]), q_right @ vt[:k].T)


def lr_add(
    a: LowRankFactor, b: LowRankFactor, eps: float, *, relative: bool = False
) -> LowRankFactor:
    """Sum of two factors, recompressed to eps.

    Raises:
        ShapeMismatchError: If the shapes differ
    """
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cannot add factors of shapes {a.shape} and {b.shape}")
    if b.rank == 0:
        return a
    if a.rank == 0:
        return lr_recompress(b, eps, relative=relative)
    stacked = LowRankFactor(np.hstack([a.left, b.left]), np.hstack([a.right, b.right]))
    return lr_recompress(stacked, eps, relative=relative)


def spectral_norm(
    matrix: npt.ArrayLike,
    max_iter: int = 50,
    rtol: float = 1e-3,
    seed: int = 0,
) -> float:
    """Estimate ``||M||_2`` by power iteration on ``M^T M``.

    Stops after max_iter iterations or when successive estimates agree to rtol.
    """
    m = as_dense(matrix)
    if m.size == 0 or not np.any(m):
        return 0.0
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(m.shape[1])
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iter):
        y = m @ x
        previous, estimate = estimate, float(np.linalg.norm(y))
        if estimate == 0.0:
            return 0.0
        z = m.T @ y
        x = z / np.linalg.norm(z)
        if previous and abs(estimate - previous) <= rtol * estimate:
            break
    return estimate

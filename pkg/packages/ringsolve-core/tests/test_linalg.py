"""Tests for dense kernels and low-rank factorization."""

import numpy as np
import pytest

from ringsolve_core.exceptions import ShapeMismatchError, SingularMatrixError
from ringsolve_core.grid import assemble_blocks, build_grid
from ringsolve_core.linalg import (
    LowRankFactor,
    as_dense,
    dense_invert,
    lr_add,
    lr_recompress,
    spectral_norm,
    truncated_factor,
)


def _decaying(rng: np.random.Generator, rows: int, cols: int, rate: float = 0.5) -> np.ndarray:
    u, _ = np.linalg.qr(rng.standard_normal((rows, rows)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, cols)))
    k = min(rows, cols)
    s = rate ** np.arange(k)
    return (u[:, :k] * s) @ v[:, :k].T


class TestAsDense:
    """Tests for input validation."""

    def test_rejects_vector(self):
        """Test that 1-D input is refused."""
        with pytest.raises(ValueError, match="2-D"):
            as_dense(np.ones(3))

    def test_rejects_nan(self):
        """Test that non-finite entries are refused."""
        with pytest.raises(ValueError, match="non-finite"):
            as_dense([[1.0, np.nan]])


class TestLowRankFactor:
    """Tests for the factor container."""

    def test_rank_mismatch(self):
        """Test that factors with different inner dimensions are refused."""
        with pytest.raises(ShapeMismatchError):
            LowRankFactor(np.ones((3, 2)), np.ones((4, 1)))

    def test_zero_rank_is_zero_matrix(self):
        """Test that a rank-0 factor densifies to zeros."""
        f = LowRankFactor.zeros(3, 5)
        assert f.rank == 0
        assert f.shape == (3, 5)
        np.testing.assert_array_equal(f.densify(), np.zeros((3, 5)))

    def test_factors_are_read_only(self):
        """Test that stored factors cannot be modified in place."""
        f = LowRankFactor(np.ones((3, 1)), np.ones((2, 1)))
        with pytest.raises(ValueError):
            f.left[0, 0] = 2.0

    def test_matvec_and_rmatvec(self, rng):
        """Test products against the dense matrix."""
        f = LowRankFactor(rng.standard_normal((6, 2)), rng.standard_normal((4, 2)))
        x, y = rng.standard_normal(4), rng.standard_normal(6)
        np.testing.assert_allclose(f.matvec(x), f.densify() @ x)
        np.testing.assert_allclose(f.rmatvec(y), f.densify().T @ y)

    def test_scaled(self, rng):
        """Test diagonal scaling on both sides."""
        f = LowRankFactor(rng.standard_normal((5, 2)), rng.standard_normal((3, 2)))
        dl, dr = rng.standard_normal(5), rng.standard_normal(3)
        expected = np.diag(dl) @ f.densify() @ np.diag(dr)
        np.testing.assert_allclose(f.scaled(dl, dr).densify(), expected)
        assert f.scaled(dl, dr).rank == f.rank


class TestDenseInvert:
    """Tests for dense_invert."""

    def test_identity(self):
        """Test that the identity inverts to itself."""
        np.testing.assert_array_equal(dense_invert(np.eye(5)), np.eye(5))

    def test_two_by_two(self):
        """Test the closed-form 2x2 inverse."""
        expected = np.array([[2 / 3, -1 / 3], [-1 / 3, 2 / 3]])
        np.testing.assert_allclose(dense_invert([[2.0, 1.0], [1.0, 2.0]]), expected, atol=1e-15)

    def test_schur_block_matches_column_solves(self):
        """Test a 20x20 Schur block against solving one column at a time."""
        system = assemble_blocks(build_grid(6, seed=3))
        a = system.to_sparse().toarray()
        inner, outer = slice(0, 16), slice(16, 36)
        coupled = a[outer, inner] @ np.linalg.solve(a[inner, inner], a[inner, outer])
        schur = a[outer, outer] - coupled
        assert schur.shape == (20, 20)

        inverse = dense_invert(schur)
        columns = np.column_stack([np.linalg.solve(schur, e) for e in np.eye(20)])
        np.testing.assert_allclose(inverse, columns, rtol=1e-12, atol=1e-14)

    def test_residual_bound(self, rng):
        """Test that the residual stays within the roundoff bound."""
        m = rng.standard_normal((40, 40)) + 40 * np.eye(40)
        residual = np.abs(m @ dense_invert(m) - np.eye(40)).max()
        assert residual <= 1e-12 * np.abs(m).max() * 40

    def test_involution(self, rng):
        """Test that inverting twice gives back the matrix."""
        m = rng.standard_normal((30, 30)) + 10 * np.eye(30)
        np.testing.assert_allclose(dense_invert(dense_invert(m)), m, rtol=1e-10, atol=1e-10)

    def test_singular(self):
        """Test that a singular matrix is reported with its pivot ratio."""
        with pytest.raises(SingularMatrixError) as exc_info:
            dense_invert([[1.0, 2.0], [2.0, 4.0]])
        assert exc_info.value.pivot_ratio is not None
        assert exc_info.value.pivot_ratio < 1e-14

    def test_zero_matrix_is_singular(self):
        """Test that an all-zero matrix is singular."""
        with pytest.raises(SingularMatrixError):
            dense_invert(np.zeros((3, 3)))

    def test_non_square(self):
        """Test that a rectangular matrix is refused."""
        with pytest.raises(ShapeMismatchError):
            dense_invert(np.ones((2, 3)))

    def test_empty(self):
        """Test that a 0x0 matrix inverts to 0x0."""
        assert dense_invert(np.zeros((0, 0))).shape == (0, 0)


class TestTruncatedFactor:
    """Tests for truncated_factor."""

    def test_zero_matrix(self):
        """Test that the zero matrix has rank 0."""
        assert truncated_factor(np.zeros((7, 4)), 1e-3).rank == 0

    def test_exact_rank_one(self, rng):
        """Test a unit-norm outer product."""
        u = rng.standard_normal(9)
        v = rng.standard_normal(6)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        f = truncated_factor(np.outer(u, v), 1e-7)
        assert f.rank == 1
        np.testing.assert_allclose(f.densify(), np.outer(u, v), atol=1e-12)

    @pytest.mark.parametrize("method", ["qr", "svd"])
    def test_ring_inverse_block_rank(self, ring_inverse, method):
        """Test that the rank equals the singular value count above eps."""
        inv = ring_inverse(64)
        block = inv[:32, 32:]
        expected = int(np.count_nonzero(np.linalg.svd(block, compute_uv=False) > 1e-7))
        assert truncated_factor(block, 1e-7, method=method).rank == expected

    @pytest.mark.parametrize("method", ["qr", "svd"])
    @pytest.mark.parametrize("eps", [1e-2, 1e-5, 1e-9])
    def test_error_bound(self, rng, method, eps):
        """Test the spectral-norm truncation error bound."""
        m = _decaying(rng, 40, 30)
        f = truncated_factor(m, eps, method=method)
        assert np.linalg.norm(m - f.densify(), 2) <= eps
        assert spectral_norm(m - f.densify()) <= eps

    @pytest.mark.parametrize("method", ["qr", "svd"])
    def test_minimal_rank(self, rng, method):
        """Test that the rank is the smallest one meeting the bound."""
        m = _decaying(rng, 30, 30)
        eps = 1e-4
        s = np.linalg.svd(m, compute_uv=False)
        assert truncated_factor(m, eps, method=method).rank == int(np.count_nonzero(s > eps))

    def test_exact_rank_with_gap(self, rng):
        """Test that a rank-k matrix with a clear gap gives exactly k."""
        m = rng.standard_normal((25, 4)) @ rng.standard_normal((4, 18))
        assert truncated_factor(m, 1e-7).rank == 4

    def test_relative_mode_is_scale_invariant(self, rng):
        """Test that relative truncation ignores the overall scale."""
        m = _decaying(rng, 20, 20)
        small = truncated_factor(m, 1e-6, relative=True)
        large = truncated_factor(1e6 * m, 1e-6, relative=True)
        assert small.rank == large.rank

    def test_non_positive_eps(self):
        """Test that eps must be positive."""
        with pytest.raises(ValueError, match="eps"):
            truncated_factor(np.eye(3), 0.0)

    def test_unknown_method(self):
        """Test that an unknown method is refused."""
        with pytest.raises(ValueError, match="method"):
            truncated_factor(np.eye(3), 1e-3, method="lu")  # type: ignore[arg-type]


class TestRecompressAndAdd:
    """Tests for lr_recompress and lr_add."""

    def test_duplicated_factor(self, rng):
        """Test that a doubled rank-1 representation recompresses to rank 1."""
        u, v = rng.standard_normal((8, 1)), rng.standard_normal((5, 1))
        f = LowRankFactor(np.hstack([u, u]), np.hstack([v, v]))
        result = lr_recompress(f, 1e-10)
        assert result.rank == 1
        np.testing.assert_allclose(result.densify(), 2 * u @ v.T, atol=1e-12)

    def test_rank_zero(self):
        """Test that a rank-0 factor stays rank 0."""
        assert lr_recompress(LowRankFactor.zeros(4, 4), 1e-8).rank == 0

    def test_shared_column_space(self, rng):
        """Test two rank-3 factors sharing a 2-D column space."""
        a, b, c, d = (rng.standard_normal((20, 1)) for _ in range(4))
        first = LowRankFactor(np.hstack([a, b, c]), rng.standard_normal((15, 3)))
        second = LowRankFactor(np.hstack([a, b, d]), rng.standard_normal((15, 3)))
        assert lr_add(first, second, 1e-10).rank == 4

    def test_recompress_never_grows(self, rng):
        """Test that recompression does not increase the rank."""
        f = LowRankFactor(rng.standard_normal((10, 3)), rng.standard_normal((12, 3)))
        assert lr_recompress(f, 1e-12).rank <= 3

    def test_recompress_idempotent(self, rng):
        """Test that recompressing twice matches recompressing once."""
        f = LowRankFactor(rng.standard_normal((10, 6)), rng.standard_normal((12, 6)) * 1e-3)
        once = lr_recompress(f, 1e-6)
        twice = lr_recompress(once, 1e-6)
        assert twice.rank == once.rank
        np.testing.assert_allclose(twice.densify(), once.densify(), atol=1e-6)

    def test_add_zero(self, rng):
        """Test the additive identity."""
        a = LowRankFactor(rng.standard_normal((6, 2)), rng.standard_normal((7, 2)))
        assert lr_add(a, LowRankFactor.zeros(6, 7), 1e-8) is a

    def test_add_negation_cancels(self, rng):
        """Test that A + (-A) is rank 0."""
        a = LowRankFactor(rng.standard_normal((6, 2)), rng.standard_normal((7, 2)))
        assert lr_add(a, -a, 1e-8).rank == 0

    def test_add_matches_dense(self, rng):
        """Test a sum of two rank-2 factors against dense addition."""
        a = LowRankFactor(rng.standard_normal((9, 2)), rng.standard_normal((11, 2)))
        b = LowRankFactor(rng.standard_normal((9, 2)), rng.standard_normal((11, 2)))
        eps = 1e-8
        result = lr_add(a, b, eps)
        assert result.rank <= 4
        np.testing.assert_allclose(result.densify(), a.densify() + b.densify(), atol=eps)

    def test_add_shape_mismatch(self):
        """Test that non-conformable factors are refused."""
        with pytest.raises(ShapeMismatchError):
            lr_add(LowRankFactor.zeros(2, 3), LowRankFactor.zeros(3, 2), 1e-8)


class TestSpectralNorm:
    """Tests for the power-iteration norm estimate."""

    def test_matches_svd(self, rng):
        """Test the estimate against the largest singular value."""
        m = _decaying(rng, 30, 20, rate=0.3)
        assert spectral_norm(m) == pytest.approx(np.linalg.norm(m, 2), rel=1e-2)

    def test_zero(self):
        """Test that the zero matrix has norm 0."""
        assert spectral_norm(np.zeros((4, 4))) == 0.0

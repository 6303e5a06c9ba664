"""Tests for grid construction, spiral partition and block assembly."""

import numpy as np
import pytest

from ringsolve_core.exceptions import ShapeMismatchError
from ringsolve_core.grid import (
    GridNetwork,
    assemble_blocks,
    boundary_index,
    boundary_rhs,
    build_grid,
    ring_coordinates,
    spiral_partition,
)


def _spiral_matrix(g: GridNetwork) -> np.ndarray:
    """Row-major five-point matrix conjugated into spiral order."""
    order = spiral_partition(g.m).order
    return g.five_point_matrix().toarray()[np.ix_(order, order)]


class TestBuildGrid:
    """Tests for build_grid."""

    def test_degenerate_interval(self):
        """Test that [1, 1] gives unit conductivities everywhere."""
        g = build_grid(2, seed=5, cond_low=1.0, cond_high=1.0)
        np.testing.assert_array_equal(g.h_cond, np.ones((2, 3)))
        np.testing.assert_array_equal(g.v_cond, np.ones((3, 2)))

    def test_deterministic(self):
        """Test that the same seed gives bit-identical networks."""
        a = build_grid(6, seed=42)
        b = build_grid(6, seed=42)
        np.testing.assert_array_equal(a.h_cond, b.h_cond)
        np.testing.assert_array_equal(a.v_cond, b.v_cond)

    def test_stream_order(self):
        """Test that horizontal bars are drawn before vertical ones."""
        g = build_grid(4, seed=9)
        rng = np.random.Generator(np.random.PCG64(9))
        draws = rng.uniform(1.0, 2.0, size=4 * 5 + 5 * 4)
        np.testing.assert_array_equal(g.h_cond.ravel(), draws[:20])
        np.testing.assert_array_equal(g.v_cond.ravel(), draws[20:])

    def test_sample_mean(self):
        """Test that conductivities average 1.5 on [1, 2]."""
        g = build_grid(100, seed=1)
        values = np.concatenate([g.h_cond.ravel(), g.v_cond.ravel()])
        assert values.min() >= 1.0
        assert values.max() <= 2.0
        assert abs(values.mean() - 1.5) <= 0.01

    @pytest.mark.parametrize("m", [0, 3, -2, 7])
    def test_invalid_m(self, m):
        """Test that odd or non-positive m is refused."""
        with pytest.raises(ValueError, match="even"):
            build_grid(m, seed=0)

    def test_invalid_interval(self):
        """Test that a non-positive or inverted interval is refused."""
        with pytest.raises(ValueError):
            build_grid(4, seed=0, cond_low=0.0, cond_high=1.0)
        with pytest.raises(ValueError):
            build_grid(4, seed=0, cond_low=2.0, cond_high=1.0)

    def test_network_validation(self):
        """Test that the network rejects bad shapes and conductivities."""
        with pytest.raises(ShapeMismatchError):
            GridNetwork(2, np.ones((3, 3)), np.ones((3, 2)), np.zeros(12))
        with pytest.raises(ValueError, match="positive"):
            GridNetwork(2, -np.ones((2, 3)), np.ones((3, 2)), np.zeros(12))


class TestBoundaryIndex:
    """Tests for the perimeter numbering."""

    def test_corners(self):
        """Test the four full-grid corners of an m=2 grid."""
        assert boundary_index(0, 0, 2) == 0
        assert boundary_index(0, 3, 2) == 3
        assert boundary_index(3, 3, 2) == 6
        assert boundary_index(3, 0, 2) == 9

    def test_bijection(self):
        """Test that perimeter nodes map onto 0 .. 4(m+1)-1."""
        m = 6
        side = m + 1
        perimeter = {(0, c) for c in range(side + 1)} | {(side, c) for c in range(side + 1)}
        perimeter |= {(r, 0) for r in range(side + 1)} | {(r, side) for r in range(side + 1)}
        indices = sorted(boundary_index(r, c, m) for r, c in perimeter)
        assert indices == list(range(4 * side))

    def test_interior_refused(self):
        """Test that an interior node is refused."""
        with pytest.raises(ValueError):
            boundary_index(1, 1, 2)


class TestSpiralPartition:
    """Tests for spiral_partition."""

    def test_single_ring(self):
        """Test that m=2 has J1 = {1, 2, 3, 4}."""
        p = spiral_partition(2)
        assert len(p.rings) == 1
        assert (p.rings[0] + 1).tolist() == [1, 2, 3, 4]

    def test_second_ring(self):
        """Test that m=4 has J2 = {5, ..., 16}."""
        p = spiral_partition(4)
        assert (p.rings[1] + 1).tolist() == list(range(5, 17))

    def test_ring_sizes(self):
        """Test |J_k| = 8k - 4."""
        p = spiral_partition(12)
        assert p.sizes == [8 * k - 4 for k in range(1, 7)]
        assert p.sizes[-1] == 44

    def test_perm_is_bijection(self):
        """Test that perm and order are inverse bijections."""
        p = spiral_partition(10)
        assert sorted(p.perm.tolist()) == list(range(100))
        np.testing.assert_array_equal(p.perm[p.order], np.arange(100))

    @pytest.mark.parametrize("m", [2, 4, 8, 14])
    def test_rings_are_closed_loops(self, m):
        """Test that consecutive and first/last ring nodes are grid neighbours."""
        p = spiral_partition(m)
        for coords in p.coords:
            steps = np.abs(np.diff(np.vstack([coords, coords[:1]]), axis=0)).sum(axis=1)
            assert np.all(steps == 1)

    def test_starts_top_left_clockwise(self):
        """Test the within-ring traversal convention."""
        ring = ring_coordinates(6, 2)
        assert tuple(ring[0]) == (1, 1)
        assert tuple(ring[1]) == (1, 2)
        assert tuple(ring[4]) == (2, 4)

    @pytest.mark.parametrize("m", [4, 6, 10])
    def test_outward_maps(self, m):
        """Test primary injections, corner links and uncovered positions."""
        p = spiral_partition(m)
        assert len(p.outward) == m // 2 - 1
        for k, links in enumerate(p.outward):
            assert len(links.positions) == p.sizes[k]
            assert np.all(np.diff(links.positions) > 0)
            assert len(links.corner_inner) == 4
            assert len(links.skipped) == 8
            assert set(links.corner_outer.tolist()) <= set(links.skipped.tolist())

    @pytest.mark.parametrize("m", [4, 8])
    def test_four_outer_nodes_without_inward_neighbour(self, m):
        """Test that only the outer corners have no link to the inner ring."""
        p = spiral_partition(m)
        for k, links in enumerate(p.outward):
            linked = set(links.positions.tolist()) | set(links.corner_outer.tolist())
            unlinked = set(range(p.sizes[k + 1])) - linked
            corners = {
                t
                for t, (r, c) in enumerate(p.coords[k + 1])
                if r in (p.coords[k + 1][:, 0].min(), p.coords[k + 1][:, 0].max())
                and c in (p.coords[k + 1][:, 1].min(), p.coords[k + 1][:, 1].max())
            }
            assert unlinked == corners

    def test_invalid_m(self):
        """Test that odd m is refused."""
        with pytest.raises(ValueError):
            spiral_partition(5)


class TestAssembleBlocks:
    """Tests for assemble_blocks and boundary_rhs."""

    def test_single_ring_unit(self, unit_grid):
        """Test the 2x2 interior block by hand."""
        system = assemble_blocks(unit_grid(2))
        expected = np.array(
            [[4, -1, 0, -1], [-1, 4, -1, 0], [0, -1, 4, -1], [-1, 0, -1, 4]], dtype=float
        )
        np.testing.assert_array_equal(system.diag[0].densify(), expected)

    def test_permuted_five_point_unit(self, unit_grid):
        """Test that the m=4 spiral matrix is the permuted five-point matrix."""
        g = unit_grid(4)
        np.testing.assert_array_equal(assemble_blocks(g).to_sparse().toarray(), _spiral_matrix(g))

    @pytest.mark.parametrize("m,seed", [(6, 1), (8, 2), (10, 3)])
    def test_permuted_five_point_random(self, m, seed):
        """Test exact agreement with row-major assembly for random bars."""
        g = build_grid(m, seed=seed)
        np.testing.assert_array_equal(assemble_blocks(g).to_sparse().toarray(), _spiral_matrix(g))

    def test_unit_stencil_rows(self, unit_grid):
        """Test the 4/-1/-1/-1/-1 rows of the unit five-point matrix."""
        a = unit_grid(6).five_point_matrix().toarray()
        assert np.all(np.diag(a) == 4.0)
        off = a - np.diag(np.diag(a))
        assert set(np.unique(off).tolist()) <= {-1.0, 0.0}
        assert np.all((off == -1.0).sum(axis=1) <= 4)

    @pytest.mark.parametrize("m", [2, 4, 8])
    def test_constant_solution(self, unit_grid, m):
        """Test that x = 1 solves the system when every boundary node is at 1."""
        g = unit_grid(m, boundary_temps=1.0)
        system = assemble_blocks(g)
        residual = system.to_sparse() @ np.ones(m * m) - system.spiral_rhs()
        np.testing.assert_allclose(residual, 0.0, atol=1e-14)

    def test_coupling_transpose(self):
        """Test that apply_transpose is the transpose of apply."""
        system = assemble_blocks(build_grid(8, seed=4))
        rng = np.random.Generator(np.random.PCG64(0))
        for coupling in system.couplings:
            x = rng.standard_normal(coupling.outer_size)
            np.testing.assert_allclose(coupling.apply_transpose(x), coupling.to_dense().T @ x)
            y = rng.standard_normal((coupling.inner_size, 3))
            np.testing.assert_allclose(coupling.apply(y), coupling.to_dense() @ y)

    @pytest.mark.parametrize("m", [4, 12, 16])
    def test_symmetric_positive_definite(self, m):
        """Test that the assembled matrix is SPD."""
        a = assemble_blocks(build_grid(m, seed=m)).to_sparse().toarray()
        np.testing.assert_array_equal(a, a.T)
        np.linalg.cholesky(a)

    def test_maximum_principle(self):
        """Test that the solution lies between 0 and the largest boundary temperature."""
        temps = np.random.Generator(np.random.PCG64(3)).uniform(0.0, 5.0, 4 * 11)
        g = build_grid(10, seed=3, boundary_temps=temps)
        x = np.linalg.solve(g.five_point_matrix().toarray(), g.row_major_rhs())
        assert x.min() >= 0.0
        assert x.max() <= temps.max()

    def test_partition_mismatch(self, unit_grid):
        """Test that a partition for another m is refused."""
        with pytest.raises(ShapeMismatchError):
            assemble_blocks(unit_grid(4), spiral_partition(6))

    def test_zero_boundary(self, unit_grid):
        """Test that zero temperatures give zero loads."""
        for block in boundary_rhs(unit_grid(6)):
            np.testing.assert_array_equal(block, 0.0)

    def test_constant_boundary(self, unit_grid):
        """Test that corner nodes get 2T and edge nodes T."""
        g = unit_grid(6, boundary_temps=3.0)
        blocks = boundary_rhs(g)
        for block in blocks[:-1]:
            np.testing.assert_array_equal(block, 0.0)
        outer = blocks[-1]
        coords = spiral_partition(6).coords[-1]
        corner = np.isin(coords[:, 0], [0, 5]) & np.isin(coords[:, 1], [0, 5])
        np.testing.assert_array_equal(outer[corner], 6.0)
        np.testing.assert_array_equal(outer[~corner], 3.0)

    def test_single_ring_enumerated(self, unit_grid):
        """Test the m=2 loads against a hand count of boundary bars."""
        g = unit_grid(2).with_boundary_temps(np.arange(12.0))
        np.testing.assert_array_equal(boundary_rhs(g)[0], [12.0, 6.0, 12.0, 18.0])

    def test_with_rhs(self, unit_grid):
        """Test replacing load blocks and the size check."""
        system = assemble_blocks(unit_grid(4))
        loaded = system.with_rhs([np.ones(4), np.zeros(12)])
        np.testing.assert_array_equal(loaded.spiral_rhs()[:4], 1.0)
        with pytest.raises(ShapeMismatchError):
            system.with_rhs([np.ones(3), np.zeros(12)])

"""Pytest fixtures for ringsolve-core tests."""

from collections.abc import Callable

import numpy as np
import pytest

from ringsolve_core.grid import BlockSystem, GridNetwork, assemble_blocks, build_grid
from ringsolve_core.hss import SparseStencil


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so every test is reproducible."""
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture
def ring_stencil() -> Callable[..., SparseStencil]:
    """Factory for the cyclic tridiagonal ring Laplacian with unit bars."""

    def make(n: int, diagonal: float = 4.0) -> SparseStencil:
        return SparseStencil.cyclic(np.full(n, diagonal), -np.ones(n - 1), -1.0)

    return make


@pytest.fixture
def ring_inverse(ring_stencil: Callable[..., SparseStencil]) -> Callable[..., np.ndarray]:
    """Factory for the dense inverse of a ring Laplacian."""

    def make(n: int, diagonal: float = 4.0) -> np.ndarray:
        return np.linalg.inv(ring_stencil(n, diagonal).densify())

    return make


@pytest.fixture
def unit_grid() -> Callable[..., GridNetwork]:
    """Factory for a grid with every bar at conductivity 1."""

    def make(m: int, boundary_temps: float = 0.0) -> GridNetwork:
        return build_grid(m, seed=0, cond_low=1.0, cond_high=1.0, boundary_temps=boundary_temps)

    return make


@pytest.fixture
def random_system() -> Callable[..., tuple[GridNetwork, BlockSystem]]:
    """Factory for a random network with random boundary temperatures, assembled."""

    def make(m: int, seed: int = 7) -> tuple[GridNetwork, BlockSystem]:
        temps = np.random.Generator(np.random.PCG64(seed + 1000)).uniform(0.0, 1.0, 4 * (m + 1))
        g = build_grid(m, seed=seed, boundary_temps=temps)
        return g, assemble_blocks(g)

    return make

"""Pytest fixtures for ringsolve-bench tests."""

import os
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from ringsolve_bench import config as config_module
from ringsolve_core import (
    BlockSystem,
    BoundaryOperator,
    SweepMode,
    assemble_blocks,
    build_grid,
    sweep_hss,
)


@pytest.fixture(autouse=True)
def isolated_config(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Run every test without user config files or RINGSOLVE_* variables."""
    for key in list(os.environ):
        if key.startswith("RINGSOLVE_"):
            monkeypatch.delenv(key)
    # main() may set this; monkeypatch removes it again on teardown
    monkeypatch.setenv("RINGSOLVE_CONFIG", "")
    home = tmp_path / "home"
    home.mkdir()
    monkeypatch.setenv("HOME", str(home))
    monkeypatch.chdir(tmp_path)
    monkeypatch.setattr(config_module, "_config_file_path", None)
    return tmp_path


@pytest.fixture
def grid_system() -> Callable[..., BlockSystem]:
    """Factory for an assembled random network with zero boundary temperatures."""

    def make(m: int, seed: int = 1) -> BlockSystem:
        return assemble_blocks(build_grid(m, seed))

    return make


@pytest.fixture
def fast_operator() -> Callable[[BlockSystem], BoundaryOperator]:
    """Factory for the compressed boundary operator of a system."""

    def make(system: BlockSystem, eps: float = 1e-7, leaf_max: int = 64) -> BoundaryOperator:
        zeros = [np.zeros(size) for size in system.sizes]
        state = sweep_hss(system, zeros, eps, leaf_max, SweepMode.BOUNDARY_ONLY)
        assert state.current_inverse is not None
        return BoundaryOperator(state.current_inverse)

    return make

"""End-to-end tests for the ringsolve command line."""

import csv
import json
from unittest.mock import patch

import numpy as np
import pytest

from ringsolve_bench import cli
from ringsolve_bench.cli import EXIT_INTERNAL, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from ringsolve_bench.models import CheckResult
from ringsolve_core import SingularMatrixError, build_grid, read_network, solve_network


def _read_solution(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    coords = np.array([[int(r["row"]), int(r["col"])] for r in rows])
    return coords, np.array([float(r["temperature"]) for r in rows])


@pytest.mark.integration
class TestAssembleAndSolve:
    """Tests for the assemble and solve commands."""

    def test_assemble_writes_network(self, tmp_path):
        """Test that assemble reproduces build_grid."""
        out = tmp_path / "net.json"
        assert main(["assemble", "--m", "6", "--seed", "4", "--out", str(out)]) == EXIT_OK
        g = read_network(out)
        np.testing.assert_array_equal(g.h_cond, build_grid(6, 4).h_cond)

    def test_round_trip_matches_in_memory(self, tmp_path):
        """Test that assemble then solve equals the in-memory pipeline bit for bit."""
        net = tmp_path / "net.json"
        out = tmp_path / "solution.csv"
        main(["assemble", "--m", "8", "--seed", "2", "--boundary-temp", "1.5", "--out", str(net)])
        assert main(["solve", "--network", str(net), "--out", str(out)]) == EXIT_OK
        coords, values = _read_solution(out)
        expected = solve_network(build_grid(8, 2, boundary_temps=1.5))
        np.testing.assert_array_equal(values, expected)
        assert coords.tolist()[:2] == [[0, 0], [0, 1]]

    def test_boundary_temps_file(self, tmp_path):
        """Test that a temperature file replaces the network's values."""
        net = tmp_path / "net.json"
        temps = tmp_path / "temps.csv"
        out = tmp_path / "solution.csv"
        main(["assemble", "--m", "4", "--out", str(net)])
        temps.write_text("\n".join(["2.0"] * 20) + "\n")
        assert main(
            ["solve", "--network", str(net), "--boundary-temps", str(temps), "--out", str(out)]
        ) == EXIT_OK
        _, values = _read_solution(out)
        np.testing.assert_allclose(values, 2.0, atol=1e-12)

    def test_boundary_mode(self, tmp_path):
        """Test that boundary mode writes the outermost ring only."""
        net = tmp_path / "net.json"
        out = tmp_path / "ring.csv"
        main(["assemble", "--m", "8", "--seed", "3", "--boundary-temp", "1.0", "--out", str(net)])
        args = ["solve", "--network", str(net), "--mode", "boundary", "--out", str(out)]
        assert main(args) == EXIT_OK
        coords, values = _read_solution(out)
        assert len(values) == 4 * 8 - 4
        full = solve_network(build_grid(8, 3, boundary_temps=1.0)).reshape(8, 8)
        np.testing.assert_allclose(values, full[coords[:, 0], coords[:, 1]], atol=1e-10)

    def test_dump_tree(self, tmp_path):
        """Test the tessellation dump of a compressed boundary operator."""
        net = tmp_path / "net.json"
        tree = tmp_path / "tree.json"
        main(["assemble", "--m", "20", "--out", str(net)])
        args = [
            "solve", "--network", str(net), "--mode", "boundary", "--leaf-max", "8",
            "--out", str(tmp_path / "ring.csv"), "--dump-tree", str(tree),
        ]
        assert main(args) == EXIT_OK
        dumped = json.loads(tree.read_text())
        assert dumped["n"] == 76
        assert dumped["root"]["leaf"] is False

    def test_missing_network(self, tmp_path, capsys):
        """Test that a missing file exits with the validation code and names the path."""
        args = ["solve", "--network", str(tmp_path / "nope.json"), "--out", "x.csv"]
        assert main(args) == EXIT_VALIDATION
        assert "nope.json" in capsys.readouterr().out

    def test_bad_temps_length(self, tmp_path):
        """Test that a temperature file of the wrong length is refused."""
        net = tmp_path / "net.json"
        temps = tmp_path / "temps.csv"
        main(["assemble", "--m", "4", "--out", str(net)])
        temps.write_text("1.0,2.0\n")
        args = ["solve", "--network", str(net), "--boundary-temps", str(temps), "--out", "x.csv"]
        assert main(args) == EXIT_VALIDATION

    def test_odd_m(self, tmp_path):
        """Test that odd m is a validation error."""
        assert main(["assemble", "--m", "5", "--out", str(tmp_path / "n.json")]) == EXIT_VALIDATION

    def test_numerical_failure(self, tmp_path):
        """Test that a singular Schur complement exits with code 3."""
        net = tmp_path / "net.json"
        main(["assemble", "--m", "4", "--out", str(net)])
        with patch.object(cli, "sweep_hss", side_effect=SingularMatrixError("pivot", 0.0)):
            args = ["solve", "--network", str(net), "--out", str(tmp_path / "s.csv")]
            assert main(args) == EXIT_NUMERICAL

    def test_non_positive_eps(self, tmp_path, capsys):
        """Test that a non-positive --eps is a validation error naming eps."""
        net = tmp_path / "net.json"
        main(["assemble", "--m", "4", "--out", str(net)])
        args = ["solve", "--network", str(net), "--eps", "0", "--out", str(tmp_path / "s.csv")]
        assert main(args) == EXIT_VALIDATION
        assert "eps" in capsys.readouterr().out

    def test_internal_error_is_not_validation(self, tmp_path, capsys):
        """Test that an unexpected ValueError exits 1, not with the validation code."""
        net = tmp_path / "net.json"
        main(["assemble", "--m", "4", "--out", str(net)])
        with patch.object(cli, "sweep_hss", side_effect=ValueError("broadcast failed")):
            args = ["solve", "--network", str(net), "--out", str(tmp_path / "s.csv")]
            assert main(args) == EXIT_INTERNAL
        assert "Unexpected error: ValueError" in capsys.readouterr().out


@pytest.mark.integration
class TestBenchCommand:
    """Tests for the bench command."""

    def test_writes_reports(self, tmp_path):
        """Test that CSV, JSON lines and plot files are written."""
        out = tmp_path / "results"
        args = ["bench", "--sizes", "4", "8", "--seeds", "1", "--out", str(out)]
        assert main(args) == EXIT_OK
        assert (out / "reports.csv").exists()
        assert len((out / "reports.jsonl").read_text().splitlines()) == 2
        assert (out / "scaling.csv").exists()
        assert (out / "steps_m8_seed1.csv").exists()

    def test_odd_size_refused(self, tmp_path):
        """Test that config validation failures exit with code 2."""
        assert main(["bench", "--sizes", "5", "--out", str(tmp_path)]) == EXIT_VALIDATION

    def test_settings_supply_sizes(self, tmp_path, monkeypatch):
        """Test that sizes come from the environment when not given."""
        monkeypatch.setenv("RINGSOLVE_BENCH_SIZES", "[2]")
        out = tmp_path / "results"
        assert main(["bench", "--no-errors", "--out", str(out)]) == EXIT_OK
        assert len((out / "reports.jsonl").read_text().splitlines()) == 1


@pytest.mark.integration
class TestOtherCommands:
    """Tests for verify, config and argument errors."""

    def test_verify_failure_exit_code(self):
        """Test that a failed check exits with code 3."""
        results = [CheckResult(name="x", passed=False, detail="bad")]
        with patch.object(cli, "cmd_verify", return_value=results):
            assert main(["verify", "--level", "quick"]) == EXIT_NUMERICAL

    def test_verify_success(self):
        """Test that passing checks exit with code 0."""
        results = [CheckResult(name="x", passed=True)]
        with patch.object(cli, "cmd_verify", return_value=results) as verify:
            assert main(["verify", "--level", "full", "--workers", "2"]) == EXIT_OK
        verify.assert_called_once_with("full", workers=2)

    def test_config_command(self, tmp_path, capsys):
        """Test that the config file in use is shown."""
        path = tmp_path / "custom.toml"
        path.write_text("[solver]\neps = 1e-5\n")
        assert main(["--config-file", str(path), "config"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "custom.toml" in out
        assert "solver_eps" in out

    def test_invalid_settings(self, monkeypatch):
        """Test that invalid settings exit with code 2."""
        monkeypatch.setenv("RINGSOLVE_SOLVER_EPS", "-1")
        assert main(["config"]) == EXIT_VALIDATION

    def test_unknown_command(self):
        """Test that argument errors exit with code 2."""
        assert main(["frobnicate"]) == EXIT_VALIDATION

    def test_help(self):
        """Test that --help exits cleanly."""
        assert main(["--help"]) == EXIT_OK

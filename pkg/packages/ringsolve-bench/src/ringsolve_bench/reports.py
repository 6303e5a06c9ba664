"""Report files and scaling fits for benchmark runs.

Every run writes ``reports.csv`` (one row per size and seed) and
``reports.jsonl`` into the output directory. Plot data goes next to them:
``scaling.csv`` with the per-size medians of T_invert/N, T_apply/sqrt(N) and
M/sqrt(N), and one ``steps_m<m>_seed<seed>.csv`` per run with the time spent
on each ring and whether that ring was re-tessellated.
"""

import csv
import json
import logging
import math
import statistics
from collections import defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from rich.table import Table

from .models import ErrorMetrics, RunReport

logger = logging.getLogger(__name__)

CSV_FIELDS = [
    "n",
    "m",
    "eps",
    "leaf_max",
    "seed",
    "t_invert_s",
    "t_apply_s",
    "mem_floats",
    "step_times",
    "retessellations",
    "e1",
    "e2",
    "e3",
    "e4",
]

# Fields that may differ between two runs of the same configuration
TIMING_FIELDS = ("t_invert_s", "t_apply_s", "step_times")


def _join(values: Sequence[float | int]) -> str:
    return ";".join(repr(v) for v in values)


def _csv_row(report: RunReport) -> dict[str, object]:
    row: dict[str, object] = report.model_dump(exclude={"errors", "step_times", "retessellations"})
    row["step_times"] = _join(report.step_times)
    row["retessellations"] = _join(report.retessellations)
    for key, value in report.errors.model_dump().items():
        row[key] = "" if value is None else value
    return row


def write_csv(reports: Iterable[RunReport], path: Path) -> Path:
    """Write one CSV row per report; absent errors are empty cells."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for report in reports:
            writer.writerow(_csv_row(report))
    return path


def read_csv(path: Path) -> list[RunReport]:
    """Read reports written by write_csv."""
    reports = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            errors = ErrorMetrics(
                **{key: float(row[key]) if row[key] else None for key in ("e1", "e2", "e3", "e4")}
            )
            reports.append(
                RunReport(
                    n=int(row["n"]),
                    m=int(row["m"]),
                    eps=float(row["eps"]),
                    leaf_max=int(row["leaf_max"]),
                    seed=int(row["seed"]),
                    t_invert_s=float(row["t_invert_s"]),
                    t_apply_s=float(row["t_apply_s"]),
                    mem_floats=int(row["mem_floats"]),
                    step_times=[float(t) for t in row["step_times"].split(";") if t],
                    retessellations=[int(k) for k in row["retessellations"].split(";") if k],
                    errors=errors,
                )
            )
    return reports


def write_jsonl(reports: Iterable[RunReport], path: Path) -> Path:
    """Write one JSON object per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for report in reports:
            f.write(report.model_dump_json() + "\n")
    return path


def read_jsonl(path: Path) -> list[RunReport]:
    with open(path) as f:
        return [RunReport.model_validate(json.loads(line)) for line in f if line.strip()]


def deterministic_fields(report: RunReport) -> dict[str, object]:
    """Report fields that must repeat exactly for the same configuration and seed."""
    return report.model_dump(exclude=set(TIMING_FIELDS))


def median_by_size(reports: Iterable[RunReport]) -> dict[int, dict[str, float]]:
    """Per-size medians over seeds of the three timed quantities."""
    grouped: dict[int, list[RunReport]] = defaultdict(list)
    for report in reports:
        grouped[report.n].append(report)
    return {
        n: {
            "t_invert_s": statistics.median(r.t_invert_s for r in group),
            "t_apply_s": statistics.median(r.t_apply_s for r in group),
            "mem_floats": statistics.median(r.mem_floats for r in group),
        }
        for n, group in sorted(grouped.items())
    }


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x).

    Raises:
        ValueError: With fewer than two distinct positive x values
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError(f"x and y differ in length: {xs.size} and {ys.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive values")
    if np.unique(xs).size < 2:
        raise ValueError("log-log fit needs at least two distinct x values")
    slope, _ = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(slope)


def scaling_slopes(reports: Iterable[RunReport]) -> dict[str, float]:
    """Exponents of N for build time, apply time and memory."""
    medians = median_by_size(reports)
    sizes = list(medians)
    return {
        key: fit_loglog_slope(sizes, [medians[n][key] for n in sizes])
        for key in ("t_invert_s", "t_apply_s", "mem_floats")
    }


def write_plot_data(reports: Sequence[RunReport], out_dir: Path) -> list[Path]:
    """Write scaling.csv and one step-time series per run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    scaling = out_dir / "scaling.csv"
    with open(scaling, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n", "t_invert_over_n", "t_apply_over_sqrt_n", "mem_over_sqrt_n"])
        for n, medians in median_by_size(reports).items():
            root = math.sqrt(n)
            writer.writerow(
                [
                    n,
                    medians["t_invert_s"] / n,
                    medians["t_apply_s"] / root,
                    medians["mem_floats"] / root,
                ]
            )
    written.append(scaling)

    for report in reports:
        path = out_dir / f"steps_m{report.m}_seed{report.seed}.csv"
        retessellated = set(report.retessellations)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["ring", "seconds", "retessellated"])
            for ring, seconds in enumerate(report.step_times, start=1):
                writer.writerow([ring, seconds, int(ring in retessellated)])
        written.append(path)

    logger.debug(f"Wrote {len(written)} plot data files to {out_dir}")
    return written


def _fmt(value: float | None) -> str:
    return "---" if value is None else f"{value:.2e}"


def report_table(reports: Iterable[RunReport], title: str = "Benchmark results") -> Table:
    """Rich table with one row per report; absent errors show as ---."""
    table = Table(title=title)
    table.add_column("N", justify="right", style="cyan")
    table.add_column("seed", justify="right")
    table.add_column("T_invert (s)", justify="right", style="green")
    table.add_column("T_apply (s)", justify="right", style="green")
    table.add_column("M (floats)", justify="right")
    for name in ("e1", "e2", "e3", "e4"):
        table.add_column(name, justify="right", style="yellow")
    for r in reports:
        table.add_row(
            str(r.n),
            str(r.seed),
            f"{r.t_invert_s:.2e}",
            f"{r.t_apply_s:.2e}",
            str(r.mem_floats),
            _fmt(r.errors.e1),
            _fmt(r.errors.e2),
            _fmt(r.errors.e3),
            _fmt(r.errors.e4),
        )
    return table

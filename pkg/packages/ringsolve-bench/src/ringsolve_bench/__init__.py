"""ringsolve-bench - command line, error oracles and scaling benchmarks for ringsolve."""

from .bench import cmd_bench
from .models import BenchConfig, ErrorMetrics, RunReport
from .oracles import cg_reference, compute_errors
from .version import __version__

__all__ = [
    "BenchConfig",
    "ErrorMetrics",
    "RunReport",
    "__version__",
    "cg_reference",
    "cmd_bench",
    "compute_errors",
]

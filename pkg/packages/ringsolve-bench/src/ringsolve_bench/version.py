"""Version information for ringsolve-bench."""

__version__ = "0.3.0"

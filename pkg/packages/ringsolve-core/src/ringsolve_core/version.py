"""Version information for ringsolve-core."""

__version__ = "0.3.0"

"""Numerical laboratory for SU(2) gauge pairs on R^n."""

__version__ = "0.1.0"

__all__ = ["__version__"]

"""Stable and consistent autoregressive filters built from equilibrium statistics."""

__version__ = "0.1.0"

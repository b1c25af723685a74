"""Quasi-equilibrium problems on possibly unbounded sets."""

__version__ = "0.1.0"

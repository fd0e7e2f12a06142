"""Renormalization-group numerics for the free central limit theorem."""

__version__ = "0.1.0"

"""Numerical laboratory for degenerate matrix-weighted p-Laplace problems."""

__version__ = "0.1.0"

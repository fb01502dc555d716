"""Exact excess-risk computations and bound evaluation for PCA."""

__version__ = "0.1.0"

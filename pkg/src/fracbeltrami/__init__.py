"""Fractional Laplace-Beltrami toolkit on flat periodic grids."""

__version__ = "0.1.0"

"""Numerical laboratory for multiply warped product Ricci flow."""

__version__ = "0.1.0"

"""Geodesics, Jacobi fields and index forms of semi-Riemannian metrics in charts,
with bump perturbations that break degenerate geodesics."""

__version__ = "0.1.0"

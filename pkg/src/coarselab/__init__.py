"""Finite-scale tools for coverings, capacity dimension and quasi-symmetric
maps of finite metric spaces, and for hyperbolic cones over them."""

__version__ = "0.1.0"

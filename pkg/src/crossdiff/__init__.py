"""Numerical laboratory for degenerate cross-diffusion parabolic systems.

Solves u_t - Lap(P(u)) = f(u) through regularized approximations, monitors the
associated energy functionals and checks uniqueness of the degenerate limit.
"""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

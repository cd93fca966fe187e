"""Nonlocal Dirichlet boundary treatments for 1D nonlocal diffusion."""

__version__ = "0.1.0"

"""Bosons in a symmetric double well: mean-field, two-mode and Bogoliubov tools."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

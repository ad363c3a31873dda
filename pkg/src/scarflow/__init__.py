"""Constrained spin-s chains: exact quench dynamics and a two-angle variational flow."""

from ._kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"

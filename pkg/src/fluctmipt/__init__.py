"""Monitored U(1)-conserving random circuits: entanglement entropy versus
subsystem spin fluctuations, with finite-size scaling collapse."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]

"""Fragmentation of the discrete torus by random walk, and random interlacements."""
from __future__ import annotations

from .lattice import TorusGeom

__version__ = "0.1.0"

__all__ = ["TorusGeom", "__version__"]

"""Steady-state energy transport in boundary-driven spin-1/2 chains and
ladders, computed by quantum-jump trajectory unraveling with an exact
small-system oracle and finite-size scaling analysis."""

__version__ = "0.1.0"

from .model import SystemSpec, SpecError, spec_hash

__all__ = ["SystemSpec", "SpecError", "spec_hash", "__version__"]

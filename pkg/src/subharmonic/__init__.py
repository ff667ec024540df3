"""Subharmonic Melnikov functions, perturbation series and bifurcation curves."""

from .errors import *  # noqa: F401,F403
from .trigsys import Mode, ResonanceContext, TrigSystem, parse_system, resonance_context

__version__ = "0.1.0"

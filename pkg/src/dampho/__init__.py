"""Damped harmonic oscillator: constant of motion, trajectories and quantized spectrum."""

from ._backend import BACKEND
from .model import (
    FIGURE_PARAMS,
    ActionAngleState,
    DampingRegime,
    OscillatorParams,
    PhaseState,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FIGURE_PARAMS",
    "ActionAngleState",
    "DampingRegime",
    "OscillatorParams",
    "PhaseState",
]

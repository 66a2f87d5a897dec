"""Spectral solver and verification harness for a generalized two-operator
Cahn-Hilliard system with fractional powers and possibly singular potentials."""

from . import config, estimates, longtime, potentials, runio, spectral, stepper
from .errors import FracchError

__all__ = [
    "config",
    "estimates",
    "longtime",
    "potentials",
    "runio",
    "spectral",
    "stepper",
    "FracchError",
]

__version__ = "0.1.0"

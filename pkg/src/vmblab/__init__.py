"""Spectral solver suite for a scaled two-species kinetic system with
electromagnetic coupling and its incompressible diffusive limit."""

__version__ = "0.1.0"

from .errors import (CflViolation, ConfigInvalid, EpsilonTooSmall,
                     EpsilonUnderflow, GridMismatch, IncompatibleSources,
                     InsufficientHistory, NonFiniteState, NonPositiveValues,
                     NonZeroMean, NotMicroscopic, OrderMismatch, OrderTooHigh,
                     TooFewSamples, UnknownInitializer, VmblabError)
from .spectral import Grid, SpectralField
from .velocity import CollisionModel, HermiteSpace, VelocityVector
from .fluid import FluidState, LinearVNSFSources
from .expansion import ExpansionOrder, ExpansionSet
from .kinetic import KineticState
from .diagnostics import EnergyReport

__all__ = [
    "__version__",
    "CflViolation", "ConfigInvalid", "EpsilonTooSmall", "EpsilonUnderflow",
    "GridMismatch", "IncompatibleSources", "InsufficientHistory",
    "NonFiniteState", "NonPositiveValues", "NonZeroMean", "NotMicroscopic",
    "OrderMismatch", "OrderTooHigh", "TooFewSamples", "UnknownInitializer",
    "VmblabError",
    "Grid", "SpectralField",
    "CollisionModel", "HermiteSpace", "VelocityVector",
    "FluidState", "LinearVNSFSources",
    "ExpansionOrder", "ExpansionSet",
    "KineticState", "EnergyReport",
]

"""Exception hierarchy shared across the solver suite.

Every failure mode that callers are expected to handle gets its own class so
that scenario drivers can translate them into exit codes without string
matching.
"""


class VmblabError(Exception):
    """Base class for all package-specific errors."""


class GridMismatch(VmblabError):
    """Two fields that must share a grid were built on different grids."""


class NonZeroMean(VmblabError):
    """A zero-mean precondition (vanishing k=0 coefficient) was violated."""


class NotMicroscopic(VmblabError):
    """Input to a collision pseudo-inverse has a nontrivial hydrodynamic part."""


class CflViolation(VmblabError):
    """Explicit advective CFL number exceeded 1 for the requested step."""


class NonFiniteState(VmblabError):
    """A state coefficient became NaN or infinite."""


class EpsilonTooSmall(VmblabError):
    """Time step too large for the explicit part at the requested epsilon."""


class EpsilonUnderflow(VmblabError):
    """epsilon**n fell below the division-amplification threshold."""


class IncompatibleSources(VmblabError):
    """Helmholtz reconstruction data violate the solvability conditions."""


class OrderMismatch(VmblabError):
    """An expansion does not provide the orders required by the caller."""


class OrderTooHigh(VmblabError):
    """Requested derivative order exceeds what the grid can resolve."""


class TooFewSamples(VmblabError):
    """A trajectory-based monitor needs more time samples than were given."""


class NonPositiveValues(VmblabError):
    """Decay fitting requires strictly positive sample values."""


class InsufficientHistory(VmblabError):
    """Too few stored time levels for the requested time-derivative stencil."""


class ConfigInvalid(VmblabError):
    """A run configuration failed validation; message names the field."""


class UnknownInitializer(VmblabError):
    """Requested initial-data generator is not registered."""

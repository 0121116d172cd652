"""Exception hierarchy shared by all soliton_forge modules."""


class SolitonForgeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SolitonForgeError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(SolitonForgeError, ValueError):
    """An evaluation point lies outside a tabulated or validated range."""


class UnsupportedRegimeError(SolitonForgeError, ValueError):
    """Parameters select a regime that has no implemented closed form."""


class FocalPointError(SolitonForgeError):
    """The characteristic amplitude mu(t) vanishes (a caustic)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class PoleError(SolitonForgeError):
    """A formula hits a pole (kernel at t=0, resonance field, ...)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NumericalFailureError(SolitonForgeError):
    """An integrator or quadrature failed to converge."""


class DiagnosticsError(SolitonForgeError):
    """A verification diagnostic could not be resolved to the requested accuracy."""


class ResolutionError(SolitonForgeError):
    """The spatial grid under-resolves the field (aliasing or boundary leakage)."""


class ReparameterizationError(SolitonForgeError):
    """A proposed time variable is not monotone on the requested window."""


class TrajectoryError(SolitonForgeError):
    """The classical soliton trajectory is undefined (beta crosses zero)."""


class ScenarioError(SolitonForgeError):
    """A scenario file is malformed or names an unknown scenario."""


class DegenerateNormError(SolitonForgeError, ValueError):
    """A reference field has zero norm, so a relative error is undefined."""


class IntegrabilityError(NumericalFailureError):
    """An integrand of a kernel quadrature is singular (mu0' vanishes)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time

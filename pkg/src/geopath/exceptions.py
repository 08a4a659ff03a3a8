"""Exception hierarchy shared by every geopath module."""


class GeopathError(Exception):
    """Base class for all errors raised by geopath."""


class RejectedInputError(GeopathError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigurationError(GeopathError, ValueError):
    """A configuration block is malformed or inconsistent.

    ``key_path`` names the offending entry (e.g. ``"kernel.t_span"``) when known.
    """

    def __init__(self, message, key_path=None):
        super().__init__(message)
        self.key_path = key_path


class StabilityError(ConfigurationError):
    """Time step violates the wave solver's sanity bound."""


class DomainError(GeopathError, ValueError):
    """A value lies outside the domain of a physical relation."""


class DivergenceError(GeopathError, ArithmeticError):
    """Integration produced a non-finite state."""

    def __init__(self, message, tau):
        super().__init__(f"{message} (tau={tau!r})")
        self.tau = tau


class UnwrapError(GeopathError, ValueError):
    """Phase unwrapping hit a node (amplitude below threshold)."""

    def __init__(self, message, index):
        super().__init__(f"{message} (grid index {index})")
        self.index = index


class GridResolutionError(GeopathError, ValueError):
    """A quadrature grid cannot resolve the integrand's phase gradient."""


class OracleMismatchError(GeopathError):
    """A check-mode oracle comparison exceeded its tolerance."""

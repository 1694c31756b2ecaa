"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical-diagnostic failures with 3, resource-cap violations
with 4.
"""


class QlocalError(Exception):
    """Base class for all package-specific errors."""


class TruncationMismatch(QlocalError):
    """Operands were built against different per-site Fock truncations."""


class SectorMismatch(QlocalError):
    """Vectors do not live in a common sector / share a usable background."""


class CapExceeded(QlocalError):
    """A dense window or superoperator would exceed the configured cap."""


class LeakageError(QlocalError):
    """Windowed evolution pushed weight onto the window boundary above tol."""


class PlateauNotFound(QlocalError):
    """The pole estimate never settled over the supplied eta schedule."""


class NearSingularResolvent(QlocalError):
    """Resolvent requested too close to the spectrum of the projected block."""


class ConfigError(QlocalError):
    """Experiment configuration failed validation."""

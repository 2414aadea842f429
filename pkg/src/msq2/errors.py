"""Exception taxonomy shared across modules.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericalAbort (and
subclasses) -> 3, acceptance failures -> 4.
"""

from __future__ import annotations


class Msq2Error(Exception):
    """Base class for all package errors."""


class ConfigError(Msq2Error):
    """Invalid configuration or unusable symbol (CLI exit code 2)."""


class NonElliptic(ConfigError):
    """Second derivative of a dispersion branch is <= 0 on the band."""


class DerivativeMismatch(ConfigError):
    """Analytic derivatives inconsistent with finite differences."""


class BracketFailure(Msq2Error):
    """Stationary-frequency root could not be enclosed within |xi| <= xi_max."""


class GridMismatch(Msq2Error):
    """Operands live on different grids/axes."""


class NumericalAbort(Msq2Error):
    """A run had to stop early (CLI exit code 3)."""


class BoundaryLeak(NumericalAbort):
    """Too much L2 mass reached the outer frame of the box."""


class NonFinite(NumericalAbort):
    """NaN or Inf detected in the evolved field."""


class PhaseUnderresolved(NumericalAbort):
    """Native grid cannot resolve the ray phase gradient on the window."""


class NotConverged(NumericalAbort):
    """Reduced-amplitude series shows no Cauchy decay."""


class BranchMismatch(Msq2Error):
    """Operation called on the wrong Im(lambda) branch."""


class PositivityViolation(NumericalAbort):
    """Logarithmic phase argument dropped below 1/2."""


class NonPositiveData(Msq2Error):
    """Rate fit requested on a series with non-positive entries."""


class MissingColumns(Msq2Error):
    """A stored run directory lacks required columns/files."""


class ExtrapolationError(Msq2Error):
    """Profile evaluation requested outside the diagnostic window."""


class DegenerateFit(Msq2Error):
    """All measured norms sit at the quadrature floor; no slope to fit."""

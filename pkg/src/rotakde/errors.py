"""Exception types shared across the package.

Everything that should surface as a numeric/validation failure on the CLI
(exit code 2) derives from :class:`NumericError`.
"""


class NumericError(Exception):
    """Base class for numeric and validation failures."""

    def payload(self) -> dict:
        """Machine-readable description used by the CLI error stream."""
        return {"error": type(self).__name__, "message": str(self)}


class QuadratureError(NumericError):
    """An integral did not converge to the requested tolerance."""


class CertificationError(NumericError):
    """A density failed smoothness-class or positivity certification."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def payload(self) -> dict:
        out = super().payload()
        out.update(self.details)
        return out


class GridError(NumericError):
    """Sample size too small for a valid bandwidth grid, or an empty grid."""


class EnvelopeError(NumericError):
    """Rejection-sampling envelope fails to dominate the target density."""


class ConfigError(NumericError):
    """An experiment or model configuration is invalid."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key

    def payload(self) -> dict:
        out = super().payload()
        if self.key is not None:
            out["key"] = self.key
        return out

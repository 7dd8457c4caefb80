"""Exception hierarchy shared across the package."""


class DwellcertError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(DwellcertError):
    """An argument violates a documented precondition (non-finite, wrong shape, ...)."""


class NumericalFailure(DwellcertError):
    """An iterative numerical routine failed to converge."""


class NotPositiveDefinite(DwellcertError):
    """A matrix required to be positive definite is not (Cholesky breakdown)."""


class ParseError(DwellcertError):
    """A system/certificate/gains document does not match its schema.

    ``context`` names the offending field or JSON location.
    """

    def __init__(self, message: str, context: str | None = None):
        self.context = context
        super().__init__(message if context is None else f"{message} (at {context})")


class DimensionMismatch(DwellcertError):
    """Matrix dimensions are inconsistent; the message names the offending matrix."""


class MissingMatrix(DwellcertError):
    """A builder needs a system matrix (B, E, C, ...) that a mode does not carry."""

    def __init__(self, name: str, mode: int):
        self.name = name
        self.mode = mode
        super().__init__(f"mode {mode} has no {name} matrix")


class NoControllerFound(DwellcertError):
    """Synthesis could not certify a controller; carries solver diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class CertificateDegenerate(DwellcertError):
    """A recovered certificate block is not positive definite where it must be."""


class GainUnboundedOrUnstable(DwellcertError):
    """No finite energy-gain level could be certified up to the bracket cap."""

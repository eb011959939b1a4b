"""Exception types shared across modules."""


class ConfigurationError(ValueError):
    """Invalid law, parameters or configuration."""


class ConstructionError(RuntimeError):
    """A geometric or path construction cannot be carried out."""


class UnsupportedRegimeError(ValueError):
    """The requested parameters fall outside the regime the method covers."""


class CalibrationError(RuntimeError):
    """Calibration ran out of budget; ``diagnostics`` holds the last estimates."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateCycleError(RuntimeError):
    """A steering cycle has zero sum while the running sum needs correction."""

"""Exception types shared across the pipeline."""


class BgmatteError(Exception):
    """Base class for all package errors."""


class ShapeError(BgmatteError, ValueError):
    """Spatial dimensions of the inputs are inconsistent or unsupported."""


class DomainError(BgmatteError, ValueError):
    """Values outside their allowed domain (range violations, NaN, bad labels)."""


class ParameterError(BgmatteError, ValueError):
    """Invalid configuration or operation parameter."""


class DegenerateInputError(BgmatteError, ValueError):
    """Input is structurally valid but the requested reduction is undefined
    (e.g. a mean over an empty pixel set)."""


class ImageIoError(BgmatteError, OSError):
    """Reading or writing an image file failed."""


class CheckpointError(BgmatteError, ValueError):
    """Checkpoint file is missing, corrupt, or has an unsupported format tag."""


class TrainingDivergenceError(BgmatteError, RuntimeError):
    """A training step produced a non-finite loss. Carries a diagnostic dump."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

"""Background-aware alpha matting: composite synthesis, background
distortion, adversarial matting networks, and benchmark evaluation."""

from .errors import (
    BgmatteError,
    CheckpointError,
    DegenerateInputError,
    DomainError,
    ImageIoError,
    ParameterError,
    ShapeError,
    TrainingDivergenceError,
)
from .imagecore import (
    AlphaMatte,
    CompositeSample,
    Image,
    Trimap,
    compose,
    generate_trimap,
)
from .metrics import MetricReport, evaluate_pair

__version__ = "0.1.0"

__all__ = [
    "AlphaMatte",
    "BgmatteError",
    "CheckpointError",
    "CompositeSample",
    "DegenerateInputError",
    "DomainError",
    "Image",
    "ImageIoError",
    "MetricReport",
    "ParameterError",
    "ShapeError",
    "TrainingDivergenceError",
    "Trimap",
    "compose",
    "evaluate_pair",
    "generate_trimap",
    "__version__",
]

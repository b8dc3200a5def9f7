"""Asian options under regime-switching geometric Brownian motion."""

from .errors import (
    AccuracyError,
    ConfigError,
    MaxIterations,
    ModelError,
    NumericalError,
    RsAsianError,
    SpecError,
)
from .model import OptionSpec, RegimeModel, contraction_factor, derived_scalars, validate_model

__version__ = "0.1.0"

"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class ParameterError(ValueError):
    """A scalar parameter is outside its allowed range."""


class DegenerateInputError(ValueError):
    """Input is degenerate for the requested computation, e.g. a zero
    vector under cosine distance or a metric with no populated classes."""


class ConfigError(ValueError):
    """Run configuration is malformed or inconsistent."""


class FormatError(ValueError):
    """A binary feature dump is malformed."""


class GenerationError(RuntimeError):
    """Synthetic data generation could not satisfy its placement constraints."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss; carries the iteration index."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class NumericError(ArithmeticError):
    """A numeric evaluation produced non-finite values."""

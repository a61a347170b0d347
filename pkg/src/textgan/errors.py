"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class SequenceLengthError(ValueError):
    """A token sequence is too long or too short for the model."""


class NumericError(FloatingPointError):
    """Non-finite values where finite ones are required."""


class ParameterError(ValueError):
    """Invalid hyperparameter value (temperature, rates, counts)."""


class TrainingError(RuntimeError):
    """Training diverged. ``step`` holds the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InternalConsistencyError(AssertionError):
    """Two independent computations of the same quantity disagree."""


class ConfigError(ValueError):
    """Malformed experiment configuration.

    ``problems`` lists every invalid field, not just the first one found.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


class CheckpointError(IOError):
    """Checkpoint cannot be used (version mismatch, wrong section)."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint bytes fail the integrity check or are truncated."""

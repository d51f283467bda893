"""Exception types shared across the package."""


class SchemaError(ValueError):
    """CSV header does not match the expected telemetry schema."""


class ParseError(ValueError):
    """A CSV row failed to parse; message carries the 1-based line number."""


class OrderingError(ValueError):
    """Timestamps are not strictly increasing."""


class DomainError(ValueError):
    """A value lies outside its allowed domain (e.g. occupancy not in {0, 1})."""


class ShapeError(ValueError):
    """Array dimensions or alignment do not match."""


class ConfigError(ValueError):
    """A configuration value is invalid."""


class DegenerateSplitError(ValueError):
    """A train/test split would leave one side empty."""


class NumericError(ValueError):
    """Non-finite values reached a numeric routine."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss.

    Carries the global step index and the offending loss value.
    """

    def __init__(self, step: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at step {step}")
        self.step = step
        self.loss = loss

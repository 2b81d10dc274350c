class FUParetoError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FUParetoError, ValueError):
    """Invalid configuration or mismatched dimensions."""


class NumericError(FUParetoError, ArithmeticError):
    """Non-finite values encountered in a computation."""


class DegenerateLossError(NumericError):
    """The loss vector has zero norm, so the fairness angle is undefined."""


class DegenerateAnchorError(NumericError):
    """Current model coincides with the anchor model."""


class EmptyBasisError(NumericError):
    """Every candidate basis vector was dropped as linearly dependent."""


class IDXFormatError(FUParetoError, ValueError):
    """Bad magic number in an IDX file."""


class IDXTruncatedError(IDXFormatError):
    """IDX file is shorter than its header claims."""


class IDXCountMismatchError(IDXFormatError):
    """Image and label files disagree on the number of items."""


class StageAbort(FUParetoError, RuntimeError):
    """A pipeline stage failed; carries the round index."""

    def __init__(self, stage, round_index, message):
        super().__init__(f"{stage} aborted at round {round_index}: {message}")
        self.stage = stage
        self.round_index = round_index

"""Exception types shared across the package."""


class KPForecastError(Exception):
    """Base class for all package errors."""


class DimensionError(KPForecastError, ValueError):
    pass


class ParameterError(KPForecastError, ValueError):
    pass


class NumericError(KPForecastError, ArithmeticError):
    pass


class ContractError(KPForecastError, RuntimeError):
    pass


class DegenerateBatchError(DimensionError):
    pass


class DataError(KPForecastError, ValueError):
    """Malformed input data (parse, schema or gap problems)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class GapError(DataError):
    pass


class TrainingDiverged(KPForecastError, ArithmeticError):
    def __init__(self, epoch, step, detail=""):
        msg = f"training diverged at epoch {epoch}, step {step}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.epoch = epoch
        self.step = step


class CheckpointFormatError(KPForecastError, ValueError):
    pass


class CheckpointCorruptError(CheckpointFormatError):
    pass

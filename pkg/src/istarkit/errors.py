"""Exception types shared across the toolkit."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with an operation's contract."""


class ContractError(ValueError):
    """A call violates a documented precondition (bad index, empty input, ...)."""


class ConfigurationError(ValueError):
    """A configuration value is invalid or internally inconsistent."""


class NumericError(ArithmeticError):
    """A computation produced (or was handed) a non-finite value."""


class OracleContractError(RuntimeError):
    """A classifier oracle returned something outside its candidate set."""


class DataParseError(ValueError):
    """A data file failed to parse; carries the offending line number."""

    def __init__(self, path: str, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number

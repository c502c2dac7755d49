class TurnoverError(Exception):
    """Base class for all errors raised by this package."""


class FormulaError(TurnoverError, ValueError):
    pass


class DataError(TurnoverError, ValueError):
    pass


class DesignError(TurnoverError, ValueError):
    """Unsupported model structure or a factor missing from the data."""


class EstimabilityError(TurnoverError, ValueError):
    """A requested mean or contrast is not estimable from the design."""


class ConvergenceError(TurnoverError, RuntimeError):
    pass

"""Exception hierarchy shared by every resgcn module."""


class ResGCNError(Exception):
    """Base class for all resgcn errors."""


class InvalidGraphError(ResGCNError, ValueError):
    """Input graph files or arrays violate the attributed-graph contract."""


class GraphParseError(InvalidGraphError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class DimensionMismatchError(InvalidGraphError):
    pass


class CapacityError(ResGCNError, ValueError):
    """Not enough eligible nodes to place the requested anomalies."""


class ShapeError(ResGCNError, ValueError):
    pass


class ConfigError(ResGCNError, ValueError):
    """A configuration or argument value is outside its allowed range."""


class StateError(ResGCNError, RuntimeError):
    pass


class NumericalError(ResGCNError, ArithmeticError):
    """A NaN or infinity appeared where a finite value is required."""


class TrainingError(NumericalError):
    pass


class UndefinedMetricError(ResGCNError, ValueError):
    pass

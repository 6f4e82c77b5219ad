class JetDomainError(ValueError):
    """
    Raised when a jet operation is evaluated outside its domain.

    Attributes:
        operation (str): The failing operation, e.g. `ln` or `div`.
    """

    def __init__(self, operation: str, message: str | None = None):
        self.operation = operation
        super().__init__(message or f'{operation} outside its domain')


class SingularMetricError(ValueError):
    def __init__(self, point, determinant: float):
        self.point = tuple(float(x) for x in point)
        self.determinant = float(determinant)
        super().__init__(
            f'Metric is singular at {self.point} (det = {determinant:.3e})'
        )


class DimensionError(ValueError):
    pass


class SignatureError(ValueError):
    pass


class ReductionError(ValueError):
    """
    Raised when a metric depends on the coordinate it is reduced along.
    """


class CalibrationError(RuntimeError):
    pass


class GeometryNotFound(LookupError):
    pass


class ParameterError(ValueError):
    pass


class MetricFileError(ValueError):
    """
    Base class for errors in metric files. Carries a 1-based position.
    """

    kind = 'error'

    def __init__(self, message: str, line: int, column: int):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f'{line}:{column}: {self.kind}: {message}')


class LexicalError(MetricFileError):
    kind = 'lexical error'


class ParseError(MetricFileError):
    kind = 'syntax error'

    def __init__(
        self,
        message: str,
        line: int,
        column: int,
        expected: tuple[str, ...] = (),
    ):
        self.expected = tuple(expected)
        if expected:
            message = f'{message}, expected {" or ".join(expected)}'
        super().__init__(message, line, column)


class SemanticError(MetricFileError):
    kind = 'semantic error'


__all__ = [
    'JetDomainError',
    'SingularMetricError',
    'DimensionError',
    'SignatureError',
    'ReductionError',
    'CalibrationError',
    'GeometryNotFound',
    'ParameterError',
    'MetricFileError',
    'LexicalError',
    'ParseError',
    'SemanticError',
]

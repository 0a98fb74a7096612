"""Exception hierarchy shared by every module of the package."""


class TensorError(Exception):
    """Base class for user-facing errors raised by tensor operations."""

    exit_code = 1


# expression layer
class ExprSyntaxError(TensorError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnboundSymbol(TensorError):
    pass


class DomainError(TensorError, ArithmeticError):
    pass


class UnresolvableSample(TensorError):
    pass


# registry
class UnknownId(TensorError):
    def __init__(self, tensor_id):
        self.tensor_id = tensor_id
        super().__init__(f'The tensor "{tensor_id}" does not exist.')


class DuplicateId(TensorError):
    def __init__(self, tensor_id):
        self.tensor_id = tensor_id
        super().__init__(
            f'A tensor with the ID "{tensor_id}" already exists. '
            "Enable overwriting or choose a different ID.")


class InvalidId(TensorError):
    pass


class EmptySymbols(TensorError):
    pass


class UnknownCoords(TensorError):
    pass


class UnknownMetric(TensorError):
    pass


class NotSymmetric(TensorError):
    pass


class Singular(TensorError):
    pass


class ShapeMismatch(TensorError):
    pass


class RankMismatch(TensorError):
    pass


class RoleForbidden(TensorError):
    pass


class InUseAsCoords(TensorError):
    pass


class InUseAsMetric(TensorError):
    pass


# transform
class DimensionMismatch(TensorError):
    pass


class RuleTargetsNonSourceSymbol(TensorError):
    pass


class NoTransformPath(TensorError):
    pass


# calc
class FormulaSyntaxError(TensorError):
    pass


class FreeIndexMismatch(TensorError):
    pass


class MixedMetrics(TensorError):
    pass


class CoordinateAddition(TensorError):
    pass


class TripleIndex(TensorError):
    pass


class DanglingDerivative(TensorError):
    pass


# geodesic
class CollidesWithCoordinate(TensorError):
    pass


# session files
class SchemaError(TensorError):
    exit_code = 3


class VersionUnsupported(TensorError):
    exit_code = 3


class DanglingReference(TensorError):
    pass


class FileWriteError(TensorError):
    exit_code = 2

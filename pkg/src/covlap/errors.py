"""Exception hierarchy shared by all covlap modules."""


class CovlapError(ValueError):
    """Base class for every error raised by covlap."""


# algebra validation

class AlgebraError(CovlapError):
    """Structure constants or metric fail one of the algebra identities.

    ``index`` is the worst-offending index tuple, ``residual`` its residual.
    """

    def __init__(self, message, index=None, residual=None):
        super().__init__(message)
        self.index = index
        self.residual = residual


class JacobiViolation(AlgebraError):
    pass


class AntisymmetryViolation(AlgebraError):
    pass


class MetricNotPositiveDefinite(AlgebraError):
    pass


class MetricNotInvariant(AlgebraError):
    pass


class DimensionMismatch(CovlapError):
    pass


# grids and fields

class GridMismatch(CovlapError):
    pass


class AlgebraMismatch(CovlapError):
    pass


class AxisOutOfRange(CovlapError):
    pass


class DeltaNonpositive(CovlapError):
    pass


class MNonpositive(CovlapError):
    pass


class BallOutsideBox(CovlapError):
    pass


class FieldFormatError(CovlapError):
    pass


# norms

class POutOfRange(CovlapError):
    pass


class OrderTooLargeForGrid(CovlapError):
    pass


# solver

class GridTooSmall(CovlapError):
    pass


class BasisDegenerate(CovlapError):
    pass


class MaxIterationsExceeded(CovlapError):
    """CG stopped before reaching the tolerance.

    The best iterate and its report travel with the exception so callers can
    still write artifacts.
    """

    def __init__(self, message, field=None, report=None):
        super().__init__(message)
        self.field = field
        self.report = report


# inequality lab

class EmptyFamily(CovlapError):
    pass


class PNotGreaterThanOne(CovlapError):
    pass


class OrderUnsupported(CovlapError):
    pass


class ExponentOutOfRange(CovlapError):
    pass


class DeltaListEmpty(CovlapError):
    pass


# cli

class ConfigError(CovlapError):
    pass

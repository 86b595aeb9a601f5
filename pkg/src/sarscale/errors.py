"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
3 for document/parse problems, 4 for numerical problems.
"""


class SarScaleError(Exception):
    exit_code = 1


class CalibrationError(SarScaleError):
    """Base class for calibration document problems.

    ``path`` names the offending element, e.g.
    ``noiseRangeVectorList/noiseRangeVector[2]/pixel``.
    """

    exit_code = 3

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class MalformedDocument(CalibrationError):
    pass


class SchemaViolation(CalibrationError):
    pass


class InvariantViolation(CalibrationError):
    pass


class RasterFormatError(SarScaleError):
    exit_code = 3


class NumericalError(SarScaleError):
    exit_code = 4


class GeometryMismatch(NumericalError):
    pass


class ExtremaNotFound(NumericalError):
    pass


class DegenerateSystem(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class DegenerateRange(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class DegenerateField(NumericalError):
    pass


class ShapeMismatch(NumericalError):
    pass

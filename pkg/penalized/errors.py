"""Error kinds raised by the library.

Every error carries a short ``code`` so the command line can report it
without parsing messages.
"""


class PenalizedError(ValueError):
    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def as_dict(self) -> dict:
        return {"status": "error", "code": self.code, "message": self.message}


class InvalidParameter(PenalizedError):
    code = "invalid-parameter"


class InvalidMeasure(PenalizedError):
    code = "invalid-measure"


class UnsupportedMetric(PenalizedError):
    code = "unsupported-metric"


class InstanceTooLarge(PenalizedError):
    code = "instance-too-large"


class InvalidTestFunction(PenalizedError):
    code = "invalid-test-function"


class InvalidState(PenalizedError):
    code = "invalid-state"


class InvalidPenalty(PenalizedError):
    code = "invalid-penalty"


class UnsupportedModel(PenalizedError):
    code = "unsupported-model"


class NumericalUnderflow(PenalizedError):
    code = "numerical-underflow"


class InvalidCurve(PenalizedError):
    code = "invalid-curve"


class NonConverged(PenalizedError):
    code = "non-converged"


class DegenerateConstants(PenalizedError):
    code = "degenerate-constants"


class InvalidConstants(PenalizedError):
    code = "invalid-constants"


class RequiresExactArithmetic(PenalizedError):
    code = "requires-exact-arithmetic"

"""Exceptions raised by aggmin.

Every exception carries a ``code`` that doubles as the CLI exit status:
2 for bad parameters or configuration, 3 for numerical failures and
4 for verification failures.
"""

CONFIG_ERROR = 2
NUMERIC_ERROR = 3
VERIFICATION_ERROR = 4


class AggminException(Exception):
    code = CONFIG_ERROR

    def __init__(self, msg=None, code=None):
        self.msg = msg
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return "{}:{}".format(self.code, self.msg)

    __repr__ = __str__


# parameter / configuration errors


class ParameterError(AggminException):
    """A potential, measure or run parameter violates its invariants."""


class DomainError(AggminException):
    """An argument lies outside the domain of the operation (e.g. r <= 0)."""


class UnsupportedSpecError(AggminException):
    """The requested operation has no closed form for this potential family."""


class SingularityError(AggminException):
    """A measure charges a point where the kernel is not integrable."""


class RangeError(AggminException):
    """Exponents fall outside the window where an explicit minimizer exists."""


class DegenerateMeasureError(AggminException):
    """The measure is zero, or not mean-zero where that is required."""


class DimensionError(AggminException):
    pass


class ResolutionError(AggminException):
    pass


class ProbeOnSupportError(AggminException):
    def __init__(self, probes):
        super().__init__("probes lie on the support: {}".format(list(probes)))
        self.probes = list(probes)


# numerical failures


class NumericalError(AggminException):
    code = NUMERIC_ERROR


class BlowUpError(NumericalError):
    def __init__(self, step, time, max_abs):
        super().__init__(
            "trajectory blew up at step {} (t={:.6g}, max |x|={:.3g})".format(step, time, max_abs)
        )
        self.step = step
        self.time = time
        self.max_abs = max_abs


class BreakpointOverflowError(NumericalError):
    pass


# verification failures


class VerificationError(AggminException):
    code = VERIFICATION_ERROR


class WitnessNotFoundError(VerificationError):
    def __init__(self, delta, tried):
        super().__init__(
            "no concavity witness found for delta={} ({} windows tried)".format(delta, len(tried))
        )
        self.delta = delta
        self.tried = tried

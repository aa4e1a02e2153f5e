"""Exception hierarchy shared by the analytic, simulation and codec layers."""


class SignageError(ValueError):
    """Base class for data and validation errors (CLI exit code 2)."""


class UnstableQueue(SignageError):
    """Offered load reaches or exceeds the channel capacity of a display."""


class DimensionMismatch(SignageError):
    pass


class InvalidConfig(SignageError):
    pass


class NonPositiveRate(InvalidConfig):
    pass


class InvalidGrid(SignageError):
    pass


class PayloadSizeMismatch(SignageError):
    pass


class InsufficientFrames(SignageError):
    pass


class PayloadTooLong(SignageError):
    pass


class NonPrintablePayload(SignageError):
    pass


class NoPreamble(SignageError):
    pass


class LengthOutOfRange(SignageError):
    pass


class CrcMismatch(SignageError):
    pass


class UnsupportedFormat(SignageError):
    pass


class MalformedHeader(SignageError):
    pass

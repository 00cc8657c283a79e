"""Exception hierarchy shared by all modules."""


class BangRegError(Exception):
    """Base class for every error raised by this package."""


class ExpressionError(BangRegError):
    """Parse or evaluation failure of a problem-data expression."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class PolytopeError(BangRegError):
    pass


class ProblemError(BangRegError):
    pass


class IntegrationError(BangRegError):
    """Non-finite state or adjoint value during integration."""

    def __init__(self, message, time=None):
        self.time = time
        if time is not None:
            message = f"{message} (t = {time:.6g})"
        super().__init__(message)


class TieError(BangRegError):
    """The pointwise minimizer is not unique on an interval of positive length."""

    def __init__(self, message, interval=None):
        self.interval = interval
        super().__init__(message)


class SweepError(BangRegError):
    """Forward-backward sweep did not reach a fixed point."""

    def __init__(self, message, last_distance=None, iterations=None):
        self.last_distance = last_distance
        self.iterations = iterations
        super().__init__(message)


class NonIsolatedZeroError(BangRegError):
    pass


class CertificationError(BangRegError):
    pass


class ConfigError(BangRegError):
    pass

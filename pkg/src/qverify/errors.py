"""Exception hierarchy shared by all qverify modules."""


class QVerifyError(Exception):
    """Base class for every error raised by this package."""


class InvalidState(QVerifyError):
    pass


class InvalidParameter(QVerifyError):
    pass


class QubitIndexError(QVerifyError, IndexError):
    pass


class NumericalError(QVerifyError):
    pass


class EncodingError(QVerifyError):
    pass


class ParameterError(QVerifyError):
    pass


class ConfigError(QVerifyError):
    pass


class ExplosionError(QVerifyError):
    """Raised when state enumeration passes the configured ceiling."""


class PolicyError(QVerifyError):
    pass


class PolicyDomainError(PolicyError):
    """A table policy was queried at a state it has no entry for."""


class TrainingDiverged(QVerifyError):
    pass


class ParseError(QVerifyError):
    def __init__(self, message, *, line=None, position=None):
        self.line = line
        self.position = position
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ValidationError(ParseError):
    """A syntactically valid file whose contents break a model invariant."""


class BindError(QVerifyError):
    pass


class SolverError(QVerifyError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")

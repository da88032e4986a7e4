"""Exception hierarchy shared by every pathml module.

Each error carries a ``kind`` (printed by the CLI as ``error[<kind>]:``) and
the process exit code its family maps to.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_DATA = 4


class PathMLError(Exception):
    exit_code = EXIT_USAGE

    @property
    def kind(self) -> str:
        return type(self).__name__


# configuration / schema family

class ConfigError(PathMLError):
    exit_code = EXIT_CONFIG


class MalformedIsdAs(ConfigError):
    pass


class IsdOutOfRange(ConfigError):
    pass


class DuplicateAs(ConfigError):
    pass


class DuplicateServer(ConfigError):
    pass


class InvalidIp(ConfigError):
    pass


class PortOutOfRange(ConfigError):
    pass


class UnknownCategory(ConfigError):
    pass


class DependencyViolation(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


class IoError(ConfigError):
    pass


class UnsupportedInterval(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class OverlappingEvents(ConfigError):
    pass


class EventInvariantError(ConfigError):
    pass


class InvalidCriteria(ConfigError):
    pass


class InvalidFraction(ConfigError):
    pass


class InvalidContamination(ConfigError):
    pass


class EmptyPath(ConfigError):
    pass


# backend / parsing family

class BackendError(PathMLError):
    exit_code = EXIT_BACKEND

    def __init__(self, message: str, reason: str | None = None, stderr_tail: str = ""):
        super().__init__(message)
        self.reason = reason or type(self).__name__
        self.stderr_tail = stderr_tail

    @property
    def kind(self) -> str:
        return self.reason


class ProbeTimeout(BackendError):
    def __init__(self, message: str, stderr_tail: str = ""):
        super().__init__(message, "Timeout", stderr_tail)


class ServerUnreachable(BackendError):
    def __init__(self, message: str, stderr_tail: str = ""):
        super().__init__(message, "ServerUnreachable", stderr_tail)


class UnknownFingerprint(BackendError):
    def __init__(self, message: str):
        super().__init__(message, "UnknownFingerprint")


class StoreUnavailable(BackendError):
    def __init__(self, message: str):
        super().__init__(message, "StoreUnavailable")


class ParseError(BackendError):
    def __init__(self, message: str, line: int | None = None, token: str | None = None):
        if line is not None:
            message += f" at line {line}"
            if token is not None:
                message += f": {token!r}"
        super().__init__(message, "ParseError")
        self.line = line
        self.token = token


class EmptyOutput(ParseError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message, line)
        self.reason = "EmptyOutput"


class InvariantViolation(ParseError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message, line)
        self.reason = "InvariantViolation"


# data / model family

class DataError(PathMLError):
    exit_code = EXIT_DATA


class InsufficientData(DataError):
    def __init__(self, message: str, required: int | None = None, actual: int | None = None):
        if required is not None:
            message = f"{message} (required {required}, got {actual})"
        super().__init__(message)
        self.required = required
        self.actual = actual


class DegenerateLabels(DataError):
    pass


class SingleClassAuc(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingularSystem(DataError):
    pass


class EmptyTraining(DataError):
    pass


class InsufficientHops(DataError):
    pass


class NoCandidates(DataError):
    pass

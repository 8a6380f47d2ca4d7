"""Exception hierarchy shared by the engine."""


class PathSumError(Exception):
    """Base class for every error raised by the engine."""


class MalformedXml(PathSumError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class EmptyDocument(PathSumError):
    pass


class NotAncestor(PathSumError, ValueError):
    pass


class BadMagic(PathSumError):
    pass


class UnsupportedVersion(PathSumError):
    pass


class TruncatedInput(PathSumError):
    pass


class SummaryMismatch(PathSumError):
    pass


class UnknownPath(PathSumError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class CorruptStore(PathSumError):
    pass


class VersionMismatch(PathSumError):
    pass


class PatternSyntaxError(PathSumError, SyntaxError):
    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)
        self.position = position

    def __str__(self):
        return self.msg


class UnsupportedFeature(PathSumError, ValueError):
    pass


class InvariantViolation(PathSumError, ValueError):
    pass


class TupleExplosion(PathSumError):
    pass


class UnsortedInput(PathSumError, AssertionError):
    pass


class MissingColumn(PathSumError):
    pass


class Unsatisfiable(PathSumError):
    pass


class OutOfBudget(PathSumError):
    pass


class SpecTooLarge(PathSumError, ValueError):
    pass


class CorruptSummary(PathSumError):
    pass

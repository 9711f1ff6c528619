"""Exception hierarchy for the taste graph engine."""


class TasteGraphError(ValueError):
    """Base class for every error raised by tastewalk."""


class ConfigError(TasteGraphError):
    pass


class DataFormatError(TasteGraphError):
    pass


class AllZeroRow(TasteGraphError):
    pass


class RowTooLong(TasteGraphError):
    pass


class MissingBalanceEntry(TasteGraphError):
    pass


class UnknownVertex(TasteGraphError):
    pass


class RowConflict(TasteGraphError):
    pass


class InvariantViolation(TasteGraphError):
    pass


class ColdUser(TasteGraphError):
    pass


class EmptyTarget(TasteGraphError):
    pass


class EmptySeed(TasteGraphError):
    pass


class EmptyDistribution(TasteGraphError):
    pass


class OutOfRange(TasteGraphError):
    pass


class InsufficientCandidates(TasteGraphError):
    pass


class FutureDate(TasteGraphError):
    pass


class CorruptSnapshot(TasteGraphError):
    pass

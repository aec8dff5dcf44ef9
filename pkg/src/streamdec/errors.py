"""Exception hierarchy. Every error raised by the engine derives from StreamDecError."""


class StreamDecError(Exception):
    pass


class NonDivisibleError(StreamDecError, ValueError):
    pass


class ZeroLengthError(StreamDecError, ValueError):
    pass


class EmptyPromptError(StreamDecError, ValueError):
    pass


class BlockOutOfRangeError(StreamDecError, IndexError):
    pass


class PositionOutOfRangeError(StreamDecError, IndexError):
    pass


class SlotAlreadyCommittedError(StreamDecError, ValueError):
    pass


class QueryNotInViewError(StreamDecError, ValueError):
    pass


class VocabMismatchError(StreamDecError, ValueError):
    pass


class MalformedScriptError(StreamDecError, ValueError):
    pass


class OddEmbedDimError(StreamDecError, ValueError):
    pass


class InconsistentIndexSetError(StreamDecError, ValueError):
    pass


class BlockRegressionError(StreamDecError, ValueError):
    pass


class ParamOutOfRangeError(StreamDecError, ValueError):
    pass


class EmptyPredictionsError(StreamDecError, ValueError):
    pass


class BlockAlreadyDoneError(StreamDecError, ValueError):
    pass


class ConfigInvalidError(StreamDecError, ValueError):
    """Invalid configuration. ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownKindError(StreamDecError, ValueError):
    pass


class InvalidCountsError(StreamDecError, ValueError):
    pass


class EmptyRunError(StreamDecError, ValueError):
    pass


class DivideByZeroError(StreamDecError, ZeroDivisionError):
    pass


class EmptyTraceError(StreamDecError, ValueError):
    pass


class NoAttentionDataError(StreamDecError, ValueError):
    pass


class IncomparableBundlesError(StreamDecError, ValueError):
    pass


class EmptyBundleError(StreamDecError, FileNotFoundError):
    pass

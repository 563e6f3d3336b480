"""Exception hierarchy shared by every module."""


class HybridEmbedError(Exception):
    """Base class for all errors raised by this package."""


# numerics
class ZeroNorm(HybridEmbedError, ValueError):
    pass


class LengthMismatch(HybridEmbedError, ValueError):
    pass


class EmptyInput(HybridEmbedError, ValueError):
    pass


class NonFiniteEvaluation(HybridEmbedError, ArithmeticError):
    pass


# encoder
class EmptyText(HybridEmbedError, ValueError):
    pass


class ShapeMismatch(HybridEmbedError, ValueError):
    pass


# losses / mrl
class EmptyBatch(HybridEmbedError, ValueError):
    pass


class EmptyNegatives(HybridEmbedError, ValueError):
    pass


class TaskBatchMismatch(HybridEmbedError, TypeError):
    pass


class DimOutOfRange(HybridEmbedError, ValueError):
    pass


# data
class DataError(HybridEmbedError, ValueError):
    """Problems with training or evaluation data files."""


class ParseError(DataError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SchemaError(DataError):
    def __init__(self, line, field, message=None):
        self.line = line
        self.field = field
        super().__init__(f"line {line}: field {field!r}: {message or 'invalid'}")


class EmptyDataset(DataError):
    pass


class UnknownLabel(DataError):
    pass


class DegenerateLabelSet(DataError):
    pass


class BatchTooSmall(HybridEmbedError, ValueError):
    pass


# mining
class EmptyCorpus(HybridEmbedError, ValueError):
    pass


class WindowEmpty(HybridEmbedError, ValueError):
    pass


# synth
class LLMError(HybridEmbedError, RuntimeError):
    """Failure talking to the completion endpoint."""


class AuthError(LLMError):
    pass


class RateLimited(LLMError):
    pass


class Timeout(LLMError):
    pass


class ServiceError(LLMError):
    def __init__(self, status, message=""):
        self.status = status
        super().__init__(f"endpoint returned HTTP {status} {message}".rstrip())


class TripletError(HybridEmbedError, ValueError):
    """A generated triplet failed validation."""


class NotJson(TripletError):
    pass


class MissingKey(TripletError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing key {name!r}")


class TooShort(TripletError):
    def __init__(self, which, words, required):
        self.which = which
        super().__init__(f"{which} has {words} words, need at least {required}")


# trainer
class NonFiniteGradient(HybridEmbedError, ArithmeticError):
    pass


class AbortOnNonFinite(HybridEmbedError, ArithmeticError):
    pass


class CheckpointError(HybridEmbedError, ValueError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class TruncatedFile(CheckpointError):
    pass


class HeaderShapeMismatch(CheckpointError):
    pass


# eval
class EvalError(HybridEmbedError, ValueError):
    pass


class MissingSplit(EvalError):
    pass


class DegenerateClusters(EvalError):
    pass


class SingleClass(EvalError):
    pass


class NoRelevantDocs(EvalError):
    pass


class ConstantInput(EvalError):
    pass

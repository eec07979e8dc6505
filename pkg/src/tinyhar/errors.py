"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all pipeline errors."""


class InvalidArgument(PipelineError):
    pass


class EmptyRecording(PipelineError):
    pass


class NoPeaksFound(PipelineError):
    pass


class FullyTrimmed(PipelineError):
    pass


class EmptySeries(PipelineError):
    pass


class SeriesTooShort(PipelineError):
    pass


class InvalidFraction(PipelineError):
    pass


class MaskOutOfRange(PipelineError):
    pass


class ParseError(PipelineError):
    def __init__(self, msg, row=None):
        super().__init__(msg if row is None else f"row {row}: {msg}")
        self.row = row


class RateMismatch(PipelineError):
    pass


class InvalidSpec(PipelineError):
    pass


class EmptyPool(PipelineError):
    pass


class ClassTooSmall(PipelineError):
    pass


class InvalidDims(PipelineError):
    pass


class DimMismatch(PipelineError):
    pass


class SingleClass(PipelineError):
    pass


class NonFiniteLoss(PipelineError):
    pass


class UnknownLabel(PipelineError):
    pass


class ModelTooLarge(PipelineError):
    pass


class BadMagic(PipelineError):
    pass


class UnsupportedVersion(PipelineError):
    pass


class ChecksumMismatch(PipelineError):
    pass


class StructuralInvariantViolated(PipelineError):
    pass


class ManifestMismatch(PipelineError):
    pass


class MaWidthMismatch(PipelineError):
    pass


class InferenceSlowerThanWindow(PipelineError):
    pass


class UnknownClass(PipelineError):
    pass


class TrainFnNondeterministic(PipelineError):
    pass

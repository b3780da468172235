"""Exception hierarchy shared by all stages."""


class VidsegError(Exception):
    """Base class for all errors raised by this package."""


class RejectedInputError(VidsegError):
    """An argument violates an operation's preconditions (e.g. dimension mismatch)."""


class EmptyMaskError(VidsegError):
    """A mask with no set pixels was passed where a nonempty one is required."""


class NormalizationError(VidsegError):
    """A zero vector cannot be normalized."""


class IngestionError(VidsegError):
    """Malformed or inconsistent on-disk input. Loaders reject, never repair."""


class ConfigurationError(VidsegError):
    """Invalid configuration values."""


class PipelineError(VidsegError):
    """A sequence-level failure with a machine-readable code.

    ``code`` feeds the CLI's JSON diagnostic; ``frame`` is set when the
    failure is tied to a specific frame index.
    """

    code = "pipeline-failure"

    def __init__(self, message: str, frame: int | None = None):
        super().__init__(message)
        self.frame = frame

    def diagnostic(self) -> dict:
        out = {"error": self.code}
        if self.frame is not None:
            out["frame"] = self.frame
        return out


class ClusterSelectionError(PipelineError):
    """No cluster satisfied the foreground selection rule."""

    code = "cluster-selection-failed"


class UnfillableSequenceError(PipelineError):
    """Every frame is undetected; there are no donor frames to fill from."""

    code = "unfillable-sequence"


class UnfillableFrameError(PipelineError):
    """A single frame could not be filled (no usable donors or empty prior)."""

    code = "unfillable-frame"

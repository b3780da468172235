"""Errors raised by the extraction package."""


class ExtractError(Exception):
    """Base class for extraction failures."""


class SetupError(ExtractError):
    """A required model is unavailable; the message carries setup steps."""


class FrameError(ExtractError):
    """One frame could not be processed (recorded per frame, not fatal)."""

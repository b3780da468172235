"""Proposal and descriptor extraction into the vidseg ingest layout."""

from .backends import ClassicalBackend, TorchvisionBackend, get_backend
from .errors import ExtractError, FrameError, SetupError
from .extract import ExtractManifest, extract_all

__version__ = "0.1.0"

__all__ = [
    "ClassicalBackend",
    "ExtractError",
    "ExtractManifest",
    "FrameError",
    "SetupError",
    "TorchvisionBackend",
    "extract_all",
    "get_backend",
]

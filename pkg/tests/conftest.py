import numpy as np
import pytest

from vidseg.core import BinaryMask, Frame, SoftMask
from vidseg.ingest import SynthConfig, generate_synthetic_case


def make_mask(rows):
    """BinaryMask from an iterable of 0/1 rows."""
    return BinaryMask(np.array(rows, dtype=np.uint8))


def make_soft(rows):
    return SoftMask(np.array(rows, dtype=np.float64))


def solid_frame(h, w, color):
    return Frame(np.broadcast_to(np.asarray(color, dtype=np.float64), (h, w, 3)).copy())


@pytest.fixture(scope="session")
def small_case():
    """Short synthetic case without drops, shared across tests."""
    return generate_synthetic_case(
        SynthConfig(n_frames=12, width=64, height=64, drop_fraction=0.0), seed=3
    )


@pytest.fixture(scope="session")
def dropped_case():
    """Synthetic case with dropped frames, shared across tests."""
    return generate_synthetic_case(
        SynthConfig(n_frames=16, width=64, height=64, drop_fraction=0.25), seed=5
    )

import numpy as np
import pytest
from PIL import Image


def paint_frames(frames_dir, n=3, size=(72, 96), seed=0):
    """Numbered frames: textured background plus a moving bright square."""
    frames_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    h, w = size
    background = rng.integers(40, 110, (h, w, 3), dtype=np.uint8)
    for i in range(n):
        arr = background.copy()
        side = 24
        x = 8 + 6 * i
        y = 10 + 4 * i
        arr[y : y + side, x : x + side] = (210, 60, 50)
        Image.fromarray(arr, mode="RGB").save(frames_dir / f"{i:05d}.png")
    return frames_dir


@pytest.fixture
def frames_dir(tmp_path):
    return paint_frames(tmp_path / "frames")

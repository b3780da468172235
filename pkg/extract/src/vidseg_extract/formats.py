"""Writers for the segmentation engine's on-disk ingest layout.

These mirror the consumer's documented formats exactly and are kept
independent of the consumer package: the files are the contract.

* proposals:  ``proposals/%05d/manifest.json`` + 8-bit grayscale PNGs,
  manifest ``{"frame": i, "proposals": [{"mask": ..., "score": ...}]}``
* descriptors: ``features/%05d.feat``: magic ``FEAT``, uint32-LE count,
  uint32-LE dim, count*dim float32-LE row-major, row r = manifest row r.

Per-frame writes are atomic: content goes to a temp name in the same
directory and is renamed into place.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

FEAT_MAGIC = b"FEAT"


def write_feat(path: Path, rows: np.ndarray) -> None:
    """Atomically write a (count, dim) float array as a FEAT file."""
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise ValueError("descriptor rows must be 2-D")
    count, dim = rows.shape
    payload = FEAT_MAGIC + struct.pack("<II", count, dim) + rows.tobytes()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_frame_proposals(
    proposals_root: Path,
    frame_index: int,
    score_maps: list[np.ndarray],
    scores: list[float],
) -> Path:
    """Atomically write one frame's proposal directory; returns its path."""
    if len(score_maps) != len(scores):
        raise ValueError("score map and score counts differ")
    proposals_root.mkdir(parents=True, exist_ok=True)
    final_dir = proposals_root / f"{frame_index:05d}"
    tmp_dir = Path(
        tempfile.mkdtemp(dir=proposals_root, prefix=f".{frame_index:05d}.")
    )
    try:
        entries = []
        for i, (smap, score) in enumerate(zip(score_maps, scores)):
            name = f"m_{i:02d}.png"
            gray = np.clip(np.rint(np.asarray(smap) * 255.0), 0, 255).astype(np.uint8)
            Image.fromarray(gray, mode="L").save(tmp_dir / name)
            entries.append({"mask": name, "score": float(score)})
        (tmp_dir / "manifest.json").write_text(
            json.dumps({"frame": frame_index, "proposals": entries}, indent=1)
        )
        if final_dir.exists():
            import shutil

            shutil.rmtree(final_dir)
        os.replace(tmp_dir, final_dir)
    except BaseException:
        import shutil

        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise
    return final_dir


def load_frame_image(path: Path) -> np.ndarray:
    """Decode an image to (H, W, 3) float RGB in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return arr.astype(np.float64) / 255.0


def numbered_frames(frames_dir: Path) -> list[tuple[int, Path]]:
    """Numbered image files in a directory, sorted by frame index."""
    out = []
    for p in frames_dir.iterdir():
        if p.suffix.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        try:
            out.append((int(p.stem), p))
        except ValueError:
            continue
    out.sort()
    return out

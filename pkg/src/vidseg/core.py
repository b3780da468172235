"""Raster and geometry primitives shared by all stages.

Conventions fixed here and adopted everywhere else:

* pixel rasters are row-major with origin at the top-left;
* binary masks resize with nearest-neighbor, soft masks with bilinear;
* resize sample positions are pixel centers (align-centers convention).

All values are immutable after construction (backing arrays are marked
read-only), so they are safe to share across frame-level workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMaskError, RejectedInputError


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass
class Frame:
    """One video frame: (H, W, 3) RGB values in [0, 1], row-major."""

    rgb: np.ndarray

    def __post_init__(self):
        self.rgb = np.ascontiguousarray(self.rgb, dtype=np.float64)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise RejectedInputError(f"frame must be (H, W, 3), got {self.rgb.shape}")
        if self.rgb.shape[0] < 1 or self.rgb.shape[1] < 1:
            raise RejectedInputError("frame must be at least 1x1")
        if self.rgb.min() < 0.0 or self.rgb.max() > 1.0:
            raise RejectedInputError("frame channels must lie in [0, 1]")
        _lock(self.rgb)

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @property
    def width(self) -> int:
        return self.rgb.shape[1]


@dataclass
class VideoSequence:
    """Ordered frames of identical dimensions."""

    frames: list[Frame]
    name: str = ""

    def __post_init__(self):
        if not self.frames:
            raise RejectedInputError("a sequence needs at least one frame")
        w, h = self.frames[0].width, self.frames[0].height
        for i, f in enumerate(self.frames):
            if f.width != w or f.height != h:
                raise RejectedInputError(
                    f"frame {i} is {f.width}x{f.height}, expected {w}x{h}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height


@dataclass
class BinaryMask:
    """Per-pixel {0, 1} foreground evidence, same grid as the frame it annotates."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise RejectedInputError(f"mask must be 2-D, got shape {self.bits.shape}")
        if self.bits.max(initial=0) > 1:
            raise RejectedInputError("mask bits must be 0 or 1")
        _lock(self.bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        return int(self.bits.sum())

    def is_empty(self) -> bool:
        return not self.bits.any()


@dataclass
class SoftMask:
    """Per-pixel foreground evidence in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise RejectedInputError(f"soft mask must be 2-D, got {self.values.shape}")
        if self.values.min(initial=0.0) < 0.0 or self.values.max(initial=0.0) > 1.0:
            raise RejectedInputError("soft mask values must lie in [0, 1]")
        _lock(self.values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box: top-left corner (x, y), size (w, h), all in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise RejectedInputError("box origin must be non-negative")
        if self.w < 1 or self.h < 1:
            raise RejectedInputError("box must be at least 1x1")

    def fits_within(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def as_slices(self) -> tuple[slice, slice]:
        """(row slice, column slice) for indexing a row-major raster."""
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


def mask_union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixel-wise OR. Inputs must share dimensions."""
    if a.bits.shape != b.bits.shape:
        raise RejectedInputError(
            f"mask dimensions differ: {a.bits.shape} vs {b.bits.shape}"
        )
    return BinaryMask(a.bits | b.bits)


def mask_intersection(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixel-wise AND. Inputs must share dimensions."""
    if a.bits.shape != b.bits.shape:
        raise RejectedInputError(
            f"mask dimensions differ: {a.bits.shape} vs {b.bits.shape}"
        )
    return BinaryMask(a.bits & b.bits)


def bbox_of(m: BinaryMask) -> BoundingBox:
    """Tightest box containing all set bits. Requires a nonempty mask."""
    rows = np.flatnonzero(m.bits.any(axis=1))
    if rows.size == 0:
        raise EmptyMaskError("cannot bound an empty mask")
    cols = np.flatnonzero(m.bits.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BoundingBox(x=x0, y=y0, w=x1 - x0 + 1, h=y1 - y0 + 1)


def crop_mask(m: BinaryMask, box: BoundingBox) -> BinaryMask:
    if not box.fits_within(m.width, m.height):
        raise RejectedInputError("crop box exceeds mask bounds")
    ys, xs = box.as_slices()
    return BinaryMask(m.bits[ys, xs])


def _center_coords(n_out: int, n_in: int) -> np.ndarray:
    """Source coordinates of output pixel centers (align-centers convention)."""
    return (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5


def _bilinear(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = a.shape
    ys = np.clip(_center_coords(out_h, h), 0.0, h - 1.0)
    xs = np.clip(_center_coords(out_w, w), 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    rows = a[y0, :] * (1.0 - ty) + a[y1, :] * ty
    return rows[:, x0] * (1.0 - tx) + rows[:, x1] * tx


def resize_soft(m: SoftMask, w: int, h: int) -> SoftMask:
    """Bilinear resize to w x h; output values stay in [0, 1]."""
    if w < 1 or h < 1:
        raise RejectedInputError("target size must be at least 1x1")
    out = _bilinear(m.values, h, w)
    return SoftMask(np.clip(out, 0.0, 1.0))


def resize_mask_nearest(m: BinaryMask, w: int, h: int) -> BinaryMask:
    """Nearest-neighbor resize to w x h; preserves binarity."""
    if w < 1 or h < 1:
        raise RejectedInputError("target size must be at least 1x1")
    ys = np.minimum(((np.arange(h) + 0.5) * (m.height / h)).astype(np.intp), m.height - 1)
    xs = np.minimum(((np.arange(w) + 0.5) * (m.width / w)).astype(np.intp), m.width - 1)
    return BinaryMask(m.bits[np.ix_(ys, xs)])

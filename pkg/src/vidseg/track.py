"""Bounding-box propagation between frames.

The default tracker is normalized cross-correlation template matching on
grayscale intensity with an exponentially updated template. It steps one
frame at a time from the source toward the destination, searching a
window of +/- ``search_radius`` pixels around the previous position; the
box size is held fixed. The tracker is a swappable strategy: anything
satisfying :class:`Tracker` can replace it without touching the fill
stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import BoundingBox, VideoSequence
from .errors import RejectedInputError

_LUMA = np.array([0.299, 0.587, 0.114])  # Rec. 601


@dataclass(frozen=True)
class TrackerParams:
    search_radius: int = 16
    template_update_rate: float = 0.05

    def __post_init__(self):
        if self.search_radius < 1:
            raise RejectedInputError("search_radius must be >= 1")
        if not 0.0 <= self.template_update_rate <= 1.0:
            raise RejectedInputError("template_update_rate must be in [0, 1]")


class Tracker(Protocol):
    """Anything that can carry a box from frame src to frame dst."""

    def __call__(
        self,
        seq: VideoSequence,
        src: int,
        box: BoundingBox,
        dst: int,
        params: TrackerParams,
    ) -> BoundingBox: ...


def _gray(seq: VideoSequence, index: int) -> np.ndarray:
    return seq.frames[index].rgb @ _LUMA


def _ncc_step(
    g: np.ndarray, template: np.ndarray, px: int, py: int, radius: int
) -> tuple[int, int]:
    """One matching step: best placement of template near (px, py).

    Ties in correlation are broken by smallest offset magnitude from the
    previous position, then by row-major candidate order, so flat regions
    track deterministically (and a static scene stays put).
    """
    h, w = template.shape
    frame_h, frame_w = g.shape
    x_lo, x_hi = max(0, px - radius), min(frame_w - w, px + radius)
    y_lo, y_hi = max(0, py - radius), min(frame_h - h, py + radius)
    region = g[y_lo : y_hi + h, x_lo : x_hi + w]
    windows = sliding_window_view(region, (h, w))
    num = np.einsum("ijkl,kl->ij", windows, template)
    win_sq = np.einsum("ijkl,ijkl->ij", windows, windows)
    tpl_sq = float(np.einsum("kl,kl->", template, template))
    den = np.sqrt(win_sq * tpl_sq)
    ncc = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
    best = ncc.max()
    tied = np.argwhere(ncc == best)
    dys = tied[:, 0] + y_lo - py
    dxs = tied[:, 1] + x_lo - px
    order = np.lexsort((dxs, dys, dys * dys + dxs * dxs))
    pick = order[0]
    return px + int(dxs[pick]), py + int(dys[pick])


def track_bbox(
    seq: VideoSequence,
    src: int,
    box: BoundingBox,
    dst: int,
    params: TrackerParams = TrackerParams(),
) -> BoundingBox:
    """Carry ``box`` from frame ``src`` to frame ``dst``, one frame at a time."""
    if src == dst:
        raise RejectedInputError("src and dst must differ")
    if box.w > seq.width or box.h > seq.height:
        raise RejectedInputError(
            f"box {box.w}x{box.h} exceeds frame {seq.width}x{seq.height}"
        )
    if not box.fits_within(seq.width, seq.height):
        raise RejectedInputError("box lies outside the frame")
    for i in (src, dst):
        if not 0 <= i < len(seq):
            raise RejectedInputError(f"frame index {i} out of range")

    template = _gray(seq, src)[box.as_slices()].copy()
    x, y = box.x, box.y
    rate = params.template_update_rate
    step = 1 if dst > src else -1
    for f in range(src + step, dst + step, step):
        g = _gray(seq, f)
        x, y = _ncc_step(g, template, x, y, params.search_radius)
        matched = g[y : y + box.h, x : x + box.w]
        template = (1.0 - rate) * template + rate * matched
    return BoundingBox(x=x, y=y, w=box.w, h=box.h)

"""Track-and-fill: segmentation transfer into undetected frames.

For an undetected frame, the masks of the nearest detected frames are
cropped to their tight boxes, resized to the tracked window, and
pixel-wise averaged into a soft mask. That soft mask initializes an
iterative GrabCut-style energy minimization: appearance terms come from
foreground/background RGB mixtures refit each round, the location term
comes from the (clamped) soft mask, the contrast-sensitive pairwise term
couples 8-neighbors, and each round's labeling is the exact minimum cut.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    BinaryMask,
    BoundingBox,
    Frame,
    SoftMask,
    VideoSequence,
    bbox_of,
    crop_mask,
    resize_mask_nearest,
)
from .errors import (
    RejectedInputError,
    UnfillableFrameError,
    UnfillableSequenceError,
)
from .gmm import DEFAULT_COV_REG, GaussianMixture, fit_gmm
from .graphcut import CapacityGraph, LabelField, labeling_energy, min_cut
from .track import TrackerParams, track_bbox

logger = logging.getLogger(__name__)

BACKGROUND_BAND_PX = 10
# Color-model fits see at most this many pixels (seeded subsample): a
# 5-component RGB mixture gains nothing from more, and fit time matters.
GMM_SAMPLE_CAP = 1 << 14


@dataclass(frozen=True)
class GrabCutParams:
    """Knobs of the fill stage; defaults follow standard GrabCut practice."""

    components: int = 5
    gamma: float = 50.0
    donor_count: int = 10
    prob_clamp: float = 1e-6
    max_rounds: int = 5
    convergence_frac: float = 0.001
    cov_reg: float = DEFAULT_COV_REG

    def __post_init__(self):
        if self.components < 1:
            raise RejectedInputError("components must be >= 1")
        if self.gamma < 0.0:
            raise RejectedInputError("gamma must be >= 0")
        if self.donor_count < 1:
            raise RejectedInputError("donor_count must be >= 1")
        if not 0.0 < self.prob_clamp < 0.5:
            raise RejectedInputError("prob_clamp must lie in (0, 0.5)")
        if self.max_rounds < 1:
            raise RejectedInputError("max_rounds must be >= 1")


@dataclass
class UnaryField:
    """Per-pixel label costs; finite by construction."""

    phi_bg: np.ndarray  # cost of labeling background
    phi_fg: np.ndarray  # cost of labeling foreground

    def __post_init__(self):
        self.phi_bg = np.ascontiguousarray(self.phi_bg, dtype=np.float64)
        self.phi_fg = np.ascontiguousarray(self.phi_fg, dtype=np.float64)
        if self.phi_bg.shape != self.phi_fg.shape:
            raise RejectedInputError("unary fields must share a shape")
        if not (np.isfinite(self.phi_bg).all() and np.isfinite(self.phi_fg).all()):
            raise RejectedInputError("unary potentials must be finite")


def find_undetected(masks: list[BinaryMask | None]) -> list[int]:
    """Indices of frames whose mask is absent or empty, ascending."""
    out = [i for i, m in enumerate(masks) if m is None or m.is_empty()]
    if len(out) == len(masks):
        raise UnfillableSequenceError("every frame is undetected; nothing to fill from")
    return out


def nearest_detected(x: int, detected, p: int) -> list[int]:
    """The min(p, |detected|) detected frames closest to x.

    Sorted by distance then index, so equidistant neighbors list the
    earlier frame first.
    """
    det = sorted(int(i) for i in detected)
    if not det:
        raise RejectedInputError("detected set must be nonempty")
    if p < 1:
        raise RejectedInputError("p must be >= 1")
    det.sort(key=lambda i: (abs(i - x), i))
    return det[: min(p, len(det))]


def build_soft_mask(
    donors: list[tuple[BinaryMask, BoundingBox]], target: BoundingBox
) -> SoftMask:
    """Average of donor windows resized (nearest-neighbor) to the target size."""
    if not donors:
        raise RejectedInputError("donors must be nonempty")
    acc = np.zeros((target.h, target.w), dtype=np.float64)
    used = 0
    for mask, box in donors:
        if mask.is_empty():
            logger.warning("skipping empty donor mask")
            continue
        window = crop_mask(mask, box)
        resized = resize_mask_nearest(window, target.w, target.h)
        acc += resized.bits
        used += 1
    if used == 0:
        raise UnfillableFrameError("all donor masks are empty")
    return SoftMask(acc / used)


def estimate_beta(region: np.ndarray) -> float:
    """Contrast scale: 1 / (2 * mean squared 8-neighbor color difference).

    A constant region gives beta = 0, which makes the pairwise
    exponential term 1 everywhere.
    """
    region = np.asarray(region, dtype=np.float64)
    if region.ndim != 3 or region.shape[2] != 3:
        raise RejectedInputError("region must be (H, W, 3)")
    h, w = region.shape[:2]
    if h * w < 2:
        raise RejectedInputError("region needs at least 2 pixels")
    sq = []
    if w > 1:
        sq.append(np.sum((region[:, 1:] - region[:, :-1]) ** 2, axis=2).ravel())
    if h > 1:
        sq.append(np.sum((region[1:, :] - region[:-1, :]) ** 2, axis=2).ravel())
    if w > 1 and h > 1:
        sq.append(np.sum((region[1:, 1:] - region[:-1, :-1]) ** 2, axis=2).ravel())
        sq.append(np.sum((region[1:, :-1] - region[:-1, 1:]) ** 2, axis=2).ravel())
    mean_sq = float(np.concatenate(sq).mean())
    return 0.0 if mean_sq == 0.0 else 1.0 / (2.0 * mean_sq)


def pairwise_weight(
    xi: np.ndarray, xj: np.ndarray, dij: float, beta: float, gamma: float
) -> float:
    """Cost charged when neighbors i, j take different labels."""
    if dij <= 0.0:
        raise RejectedInputError("pixel distance must be positive")
    delta = np.asarray(xi, dtype=np.float64) - np.asarray(xj, dtype=np.float64)
    return gamma / dij * float(np.exp(-beta * float(np.sum(delta * delta))))


def unary_potentials(
    region: np.ndarray,
    m: SoftMask,
    fg: GaussianMixture,
    bg: GaussianMixture,
    clamp: float,
) -> UnaryField:
    """Negative log appearance likelihood plus negative log location prior."""
    region = np.asarray(region, dtype=np.float64)
    h, w = region.shape[:2]
    if (m.height, m.width) != (h, w):
        raise RejectedInputError("soft mask must match the region")
    if not 0.0 < clamp < 0.5:
        raise RejectedInputError("clamp must lie in (0, 0.5)")
    q_fg = np.clip(m.values, clamp, 1.0 - clamp)
    q_bg = 1.0 - q_fg
    flat = region.reshape(-1, 3)
    log_p_fg = fg.log_density(flat).reshape(h, w)
    log_p_bg = bg.log_density(flat).reshape(h, w)
    return UnaryField(
        phi_bg=-log_p_bg - np.log(q_bg),
        phi_fg=-log_p_fg - np.log(q_fg),
    )


def _pairwise_capacities(region: np.ndarray, beta: float, gamma: float):
    """Per-direction neighbor capacities: gamma * d^-1 * exp(-beta |dx|^2)."""
    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    def w(diff: np.ndarray, dist_factor: float) -> np.ndarray:
        return gamma * dist_factor * np.exp(-beta * np.sum(diff**2, axis=2))

    h, wd = region.shape[:2]
    right = w(region[:, 1:] - region[:, :-1], 1.0) if wd > 1 else np.zeros((h, 0))
    down = w(region[1:, :] - region[:-1, :], 1.0) if h > 1 else np.zeros((0, wd))
    if h > 1 and wd > 1:
        down_right = w(region[1:, 1:] - region[:-1, :-1], inv_sqrt2)
        down_left = w(region[1:, :-1] - region[:-1, 1:], inv_sqrt2)
    else:
        down_right = np.zeros((max(h - 1, 0), max(wd - 1, 0)))
        down_left = np.zeros((max(h - 1, 0), max(wd - 1, 0)))
    return right, down, down_right, down_left


def build_capacity_graph(
    unary: UnaryField,
    pairwise: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
) -> CapacityGraph:
    """Standard reduction: source arc carries phi_bg, sink arc phi_fg.

    Unaries may be negative (densities above 1), so the per-pixel minimum
    is subtracted from both terminal arcs. That shifts every labeling's
    energy by the same constant, keeps capacities nonnegative, and leaves
    the argmin cut unchanged.
    """
    h, w = unary.phi_bg.shape
    base = np.minimum(unary.phi_bg, unary.phi_fg)
    right, down, down_right, down_left = pairwise
    return CapacityGraph(
        width=w,
        height=h,
        source_cap=unary.phi_bg - base,
        sink_cap=unary.phi_fg - base,
        right=right,
        down=down,
        down_right=down_right,
        down_left=down_left,
    )


def _band_samples(frame: Frame, box: BoundingBox, band: int) -> np.ndarray:
    """RGB samples from a band around the box, clipped to the frame."""
    y0 = max(0, box.y - band)
    y1 = min(frame.height, box.y + box.h + band)
    x0 = max(0, box.x - band)
    x1 = min(frame.width, box.x + box.w + band)
    outer = frame.rgb[y0:y1, x0:x1]
    inside = np.zeros(outer.shape[:2], dtype=bool)
    inside[box.y - y0 : box.y - y0 + box.h, box.x - x0 : box.x - x0 + box.w] = True
    return outer[~inside]


def _subsample(samples: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    if samples.shape[0] <= cap:
        return samples
    idx = rng.choice(samples.shape[0], size=cap, replace=False)
    return samples[np.sort(idx)]


@dataclass
class GrabCutResult:
    """Full output of one fill, kept around for inspection and testing."""

    mask: BinaryMask
    labels: LabelField
    initial_labels: LabelField
    fg_model: GaussianMixture
    bg_model: GaussianMixture
    graph: CapacityGraph
    energy: float
    rounds: int
    fell_back: bool = False


def grabcut_fill(
    frame: Frame,
    box: BoundingBox,
    m: SoftMask,
    params: GrabCutParams,
    seed: int,
) -> BinaryMask:
    """Segment the boxed region, initialized from the soft mask.

    Returns a full-frame mask that is all-background outside the box. The
    foreground is forced nonempty: if the cut empties it, the (m >= 0.5)
    initialization is returned instead.
    """
    return grabcut_fill_detailed(frame, box, m, params, seed).mask


def grabcut_fill_detailed(
    frame: Frame,
    box: BoundingBox,
    m: SoftMask,
    params: GrabCutParams,
    seed: int,
) -> GrabCutResult:
    if not box.fits_within(frame.width, frame.height):
        raise RejectedInputError("box lies outside the frame")
    if (m.height, m.width) != (box.h, box.w):
        raise RejectedInputError("soft mask must match the box dimensions")

    region = frame.rgb[box.as_slices()]
    initial = (m.values >= 0.5).astype(np.uint8)
    if not initial.any():
        raise UnfillableFrameError("soft mask initializes an empty foreground")

    band = _band_samples(frame, box, BACKGROUND_BAND_PX)
    beta = estimate_beta(region) if region.shape[0] * region.shape[1] >= 2 else 0.0
    pairwise = _pairwise_capacities(region, beta, params.gamma)
    rng = np.random.default_rng(seed)

    labels = initial
    fell_back = False
    fg_model = bg_model = None
    graph = None
    rounds = 0
    for rnd in range(params.max_rounds):
        fg_samples = region[labels.astype(bool)]
        bg_region = region[~labels.astype(bool)]
        bg_samples = np.concatenate([band.reshape(-1, 3), bg_region.reshape(-1, 3)])
        if fg_samples.shape[0] == 0:
            raise UnfillableFrameError("no foreground samples to model")
        if bg_samples.shape[0] == 0:
            raise UnfillableFrameError("no background samples to model")
        fg_model = fit_gmm(
            _subsample(fg_samples, GMM_SAMPLE_CAP, rng),
            params.components,
            seed=seed * 4 + 2 * rnd,
            reg=params.cov_reg,
        )
        bg_model = fit_gmm(
            _subsample(bg_samples, GMM_SAMPLE_CAP, rng),
            params.components,
            seed=seed * 4 + 2 * rnd + 1,
            reg=params.cov_reg,
        )
        unary = unary_potentials(region, m, fg_model, bg_model, params.prob_clamp)
        graph = build_capacity_graph(unary, pairwise)
        new_labels, _ = min_cut(graph)
        rounds = rnd + 1
        if not new_labels.any():
            logger.warning("min cut emptied the foreground; falling back to prior")
            labels = initial
            fell_back = True
            break
        changed = float(np.mean(new_labels != labels))
        labels = new_labels
        if changed < params.convergence_frac:
            break

    full = np.zeros((frame.height, frame.width), dtype=np.uint8)
    ys, xs = box.as_slices()
    full[ys, xs] = labels
    return GrabCutResult(
        mask=BinaryMask(full),
        labels=labels,
        initial_labels=initial,
        fg_model=fg_model,
        bg_model=bg_model,
        graph=graph,
        energy=labeling_energy(graph, labels),
        rounds=rounds,
        fell_back=fell_back,
    )


def fill_frames(
    seq: VideoSequence,
    masks: list[BinaryMask | None],
    grabcut: GrabCutParams,
    tracker_params: TrackerParams,
    seed: int,
    tracker=track_bbox,
) -> dict[int, BinaryMask]:
    """Fill every undetected frame from its detected neighbors.

    Frames are filled closest-to-a-donor first, and filled frames never
    become donors, so one bad fill cannot cascade. Per-frame randomness
    derives from ``seed + frame_index``.
    """
    undetected = find_undetected(masks)
    detected = [i for i in range(len(masks)) if i not in set(undetected)]
    order = sorted(undetected, key=lambda x: (min(abs(x - d) for d in detected), x))
    filled: dict[int, BinaryMask] = {}
    for x in order:
        src = nearest_detected(x, detected, 1)[0]
        src_box = bbox_of(masks[src])
        window = tracker(seq, src, src_box, x, tracker_params)
        donors_idx = nearest_detected(x, detected, grabcut.donor_count)
        donors = [(masks[d], bbox_of(masks[d])) for d in donors_idx]
        soft = build_soft_mask(donors, window)
        filled[x] = grabcut_fill(
            seq.frames[x], window, soft, grabcut, seed + x
        )
    return filled

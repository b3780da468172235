"""Grouping of visually similar segments and foreground selection.

Mean shift with a flat (uniform) kernel: every point repeatedly moves to
the mean of the original points within Euclidean radius ``h`` of its
current position, until the shift drops below ``tol`` or ``max_iter`` is
reached. Converged positions within ``h/2`` of each other collapse into
one mode. Everything is deterministic: points are processed in input
order and modes are numbered by first appearance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, mask_union
from .errors import NormalizationError, RejectedInputError
from .ingest import Descriptor
from .premask import SegmentRecord

DEFAULT_MIN_CLUSTER_FRAC = 0.6
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 300
BANDWIDTH_MEDIAN_FACTOR = 0.7


@dataclass
class ClusterAssignment:
    """Labels per input point plus the merged mode vectors."""

    labels: np.ndarray  # (n,) int
    modes: np.ndarray  # (n_modes, D)
    bandwidth: float

    @property
    def n_clusters(self) -> int:
        return self.modes.shape[0]


def l2_normalize(v: Descriptor) -> Descriptor:
    """Scale to unit Euclidean norm. Zero vectors are rejected."""
    norm = float(np.linalg.norm(v.values))
    if norm == 0.0:
        raise NormalizationError("cannot normalize a zero vector")
    return Descriptor(v.values / norm)


def auto_bandwidth(points: np.ndarray, factor: float = BANDWIDTH_MEDIAN_FACTOR) -> float:
    """factor x median pairwise Euclidean distance (0 distances included)."""
    n = points.shape[0]
    if n < 2:
        return 1.0
    sq = np.sum(points**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * points @ points.T, 0.0)
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    return factor * med if med > 0.0 else 1.0


def mean_shift(
    points: list[Descriptor] | np.ndarray,
    h: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ClusterAssignment:
    """Flat-kernel mean shift over unit-norm descriptors."""
    if isinstance(points, np.ndarray):
        data = np.ascontiguousarray(points, dtype=np.float64)
    else:
        data = np.stack([p.values for p in points]).astype(np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise RejectedInputError("points must be a non-empty 2-D set")
    if h <= 0.0:
        raise RejectedInputError(f"bandwidth must be positive, got {h}")

    n = data.shape[0]
    positions = data.copy()
    active = np.ones(n, dtype=bool)
    h2 = h * h
    data_sq = np.sum(data**2, axis=1)

    for _ in range(max_iter):
        if not active.any():
            break
        cur = positions[active]
        d2 = (
            np.sum(cur**2, axis=1)[:, None]
            + data_sq[None, :]
            - 2.0 * cur @ data.T
        )
        within = d2 <= h2
        counts = within.sum(axis=1)
        # Every point is within h of itself, so counts >= 1.
        new = (within @ data) / counts[:, None]
        shift = np.linalg.norm(new - cur, axis=1)
        positions[active] = new
        still = shift >= tol
        idx = np.flatnonzero(active)
        active[idx[~still]] = False

    # Merge converged positions: first appearance owns the mode.
    modes: list[np.ndarray] = []
    labels = np.empty(n, dtype=np.int64)
    merge_r = h / 2.0
    for i in range(n):
        pos = positions[i]
        assigned = -1
        for m, mode in enumerate(modes):
            if np.linalg.norm(pos - mode) <= merge_r:
                assigned = m
                break
        if assigned < 0:
            modes.append(pos)
            assigned = len(modes) - 1
        labels[i] = assigned
    return ClusterAssignment(
        labels=labels, modes=np.stack(modes), bandwidth=float(h)
    )


def _min_frame_span(min_frac: float, n_frames: int) -> int:
    # Guard against float noise, e.g. 0.1 * 10 -> 1.0000000000000002.
    return max(1, math.ceil(min_frac * n_frames - 1e-9))


def select_foreground(
    assign: ClusterAssignment,
    records: list[SegmentRecord],
    n_frames: int,
    min_frac: float = DEFAULT_MIN_CLUSTER_FRAC,
) -> int | None:
    """Pick the foreground cluster, or None when no cluster qualifies.

    Candidates must span at least ceil(min_frac * n_frames) distinct
    frames; among candidates the one with the most members wins, ties
    going to the lowest cluster id.
    """
    if len(records) != assign.labels.size:
        raise RejectedInputError("records and assignment must be index-aligned")
    need = _min_frame_span(min_frac, n_frames)
    spans: dict[int, set[int]] = {}
    sizes: dict[int, int] = {}
    for rec, label in zip(records, assign.labels):
        label = int(label)
        spans.setdefault(label, set()).add(rec.frame_index)
        sizes[label] = sizes.get(label, 0) + 1
    best: int | None = None
    for label in sorted(sizes):
        if len(spans[label]) < need:
            continue
        if best is None or sizes[label] > sizes[best]:
            best = label
    return best


def select_foreground_by_count(
    assign: ClusterAssignment,
    records: list[SegmentRecord],
    min_frac: float = DEFAULT_MIN_CLUSTER_FRAC,
) -> int | None:
    """Alternative rule: candidates must hold >= min_frac of all records."""
    if len(records) != assign.labels.size:
        raise RejectedInputError("records and assignment must be index-aligned")
    total = len(records)
    if total == 0:
        return None
    need = max(1, math.ceil(min_frac * total - 1e-9))
    sizes = np.bincount(assign.labels, minlength=assign.n_clusters)
    best: int | None = None
    for label in range(assign.n_clusters):
        if sizes[label] < need:
            continue
        if best is None or sizes[label] > sizes[best]:
            best = label
    return best


def cluster_masks(
    records: list[SegmentRecord], fg: int
) -> dict[int, BinaryMask]:
    """Per-frame union of the foreground cluster's masks.

    Frames without a foreground record are simply absent from the result.
    """
    out: dict[int, BinaryMask] = {}
    for rec in records:
        if rec.cluster_label != fg:
            continue
        if rec.frame_index in out:
            out[rec.frame_index] = mask_union(out[rec.frame_index], rec.mask)
        else:
            out[rec.frame_index] = rec.mask
    return out

"""Region-similarity evaluation: Jaccard index and its aggregates.

Aggregates are sequence-weighted: each sequence is reduced first, then
sequences are averaged, so long sequences do not dominate.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BinaryMask
from .errors import RejectedInputError

DEFAULT_RECALL_TAU = 0.5
RECALL_MODES = ("frame", "sequence")


def jaccard(m: BinaryMask, g: BinaryMask) -> float:
    """Intersection over union; 1 when both masks are empty, 0 when one is."""
    if m.bits.shape != g.bits.shape:
        raise RejectedInputError(
            f"mask dimensions differ: {m.bits.shape} vs {g.bits.shape}"
        )
    inter = int(np.count_nonzero(m.bits & g.bits))
    union = int(np.count_nonzero(m.bits | g.bits))
    if union == 0:
        return 1.0
    return inter / union


@dataclass
class SequenceScores:
    name: str
    per_frame_j: list[float]

    def __post_init__(self):
        if not self.per_frame_j:
            raise RejectedInputError(f"sequence {self.name!r} has no scored frames")
        if any(not 0.0 <= j <= 1.0 for j in self.per_frame_j):
            raise RejectedInputError("per-frame J values must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_frame_j))


@dataclass
class EvalReport:
    sequences: list[SequenceScores] = field(default_factory=list)

    def __post_init__(self):
        if not self.sequences:
            raise RejectedInputError("report must contain at least one sequence")


def j_mean(report: EvalReport) -> float:
    """Mean over sequences of the per-sequence mean J."""
    return float(np.mean([s.mean for s in report.sequences]))


def j_recall(
    report: EvalReport, tau: float = DEFAULT_RECALL_TAU, mode: str = "frame"
) -> float:
    """Fraction of scores above tau.

    ``frame`` mode (default, matches common benchmark tooling): per
    sequence, the fraction of frames with J > tau, averaged over
    sequences. ``sequence`` mode: the fraction of sequences whose mean J
    exceeds tau.
    """
    if not 0.0 < tau < 1.0:
        raise RejectedInputError("tau must lie in (0, 1)")
    if mode not in RECALL_MODES:
        raise RejectedInputError(f"recall mode must be one of {RECALL_MODES}")
    if mode == "frame":
        fracs = [
            float(np.mean([j > tau for j in s.per_frame_j])) for s in report.sequences
        ]
        return float(np.mean(fracs))
    return float(np.mean([s.mean > tau for s in report.sequences]))


def _quartile_bins(n: int) -> list[int]:
    """Four contiguous bin sizes; the remainder goes to the earlier bins."""
    base, rem = divmod(n, 4)
    return [base + (1 if i < rem else 0) for i in range(4)]


def sequence_decay(scores: SequenceScores) -> float:
    js = scores.per_frame_j
    if len(js) < 4:
        raise RejectedInputError(
            f"sequence {scores.name!r} has {len(js)} frames; decay needs >= 4"
        )
    sizes = _quartile_bins(len(js))
    first = js[: sizes[0]]
    last = js[len(js) - sizes[3] :]
    return float(np.mean(first) - np.mean(last))


def j_decay(report: EvalReport) -> float:
    """Mean over sequences of (first-quartile mean J - last-quartile mean J)."""
    return float(np.mean([sequence_decay(s) for s in report.sequences]))


def report_as_dict(
    report: EvalReport, tau: float = DEFAULT_RECALL_TAU, recall_mode: str = "frame"
) -> dict:
    return {
        "sequences": [
            {"name": s.name, "per_frame_j": list(s.per_frame_j)}
            for s in report.sequences
        ],
        "j_mean": j_mean(report),
        "j_recall": j_recall(report, tau, recall_mode),
        "j_decay": j_decay(report),
        "recall_mode": recall_mode,
        "tau": tau,
    }


def write_report_json(
    report: EvalReport,
    path: str | Path,
    tau: float = DEFAULT_RECALL_TAU,
    recall_mode: str = "frame",
) -> None:
    Path(path).write_text(json.dumps(report_as_dict(report, tau, recall_mode), indent=1))


def write_report_csv(
    report: EvalReport,
    path: str | Path,
    tau: float = DEFAULT_RECALL_TAU,
) -> None:
    """One row per sequence for spreadsheet comparison."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sequence", "frames", "j_mean", "j_recall", "j_decay"])
        for s in report.sequences:
            writer.writerow(
                [
                    s.name,
                    len(s.per_frame_j),
                    f"{s.mean:.6f}",
                    f"{float(np.mean([j > tau for j in s.per_frame_j])):.6f}",
                    f"{sequence_decay(s):.6f}",
                ]
            )

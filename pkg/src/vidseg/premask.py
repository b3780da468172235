"""Per-frame preliminary masks from the top-k proposals.

Each retained proposal is binarized and contributes one segment record;
the preliminary mask is the union of the retained binary masks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, SoftMask, mask_union
from .errors import RejectedInputError
from .ingest import Descriptor, ProposalSet

DEFAULT_TOP_K = 5
DEFAULT_BINARIZE_TAU = 0.2


@dataclass
class SegmentRecord:
    """One proposal instance that survived binarization."""

    frame_index: int
    proposal_index: int
    mask: BinaryMask
    descriptor: Descriptor
    cluster_label: int | None = None


def binarize(m: SoftMask, tau: float) -> BinaryMask:
    """Threshold a soft mask; the comparison is inclusive (>= tau)."""
    if not 0.0 < tau < 1.0:
        raise RejectedInputError(f"tau must be in (0, 1), got {tau}")
    return BinaryMask((m.values >= tau).astype(np.uint8))


def preliminary_mask(
    ps: ProposalSet,
    k: int = DEFAULT_TOP_K,
    tau: float = DEFAULT_BINARIZE_TAU,
) -> tuple[BinaryMask, list[SegmentRecord]]:
    """Union of the binarized top-k proposals plus their segment records.

    Proposals that binarize to empty are dropped and produce no record.
    A frame where everything binarizes to empty is proposal-free: the
    returned mask is empty and the record list is empty (not an error).
    """
    if k < 1:
        raise RejectedInputError(f"k must be >= 1, got {k}")
    retained = ps.proposals[: min(k, len(ps.proposals))]
    records: list[SegmentRecord] = []
    union: BinaryMask | None = None
    for idx, prop in enumerate(retained):
        if prop.descriptor is None:
            raise RejectedInputError(
                f"proposal {idx} of frame {ps.frame_index} has no descriptor"
            )
        bm = binarize(prop.score_map, tau)
        if bm.is_empty():
            continue
        records.append(
            SegmentRecord(
                frame_index=ps.frame_index,
                proposal_index=idx,
                mask=bm,
                descriptor=prop.descriptor,
            )
        )
        union = bm if union is None else mask_union(union, bm)
    if union is None:
        shape = (
            ps.proposals[0].score_map.height if ps.proposals else 1,
            ps.proposals[0].score_map.width if ps.proposals else 1,
        )
        union = BinaryMask(np.zeros(shape, dtype=np.uint8))
    return union, records

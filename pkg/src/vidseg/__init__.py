"""Flow-free video object segmentation.

Clusters visually similar object proposals across frames to isolate the
foreground, then fills undetected frames by tracking a window and running
soft-mask-initialized graph-cut segmentation transfer. Ships with a
DAVIS-style Jaccard evaluation harness and a synthetic-case generator.
"""

from .core import (
    BinaryMask,
    BoundingBox,
    Frame,
    SoftMask,
    VideoSequence,
    bbox_of,
    mask_union,
    resize_soft,
)
from .cluster import ClusterAssignment, l2_normalize, mean_shift, select_foreground
from .gmm import GaussianMixture, fit_gmm, gmm_density
from .graphcut import CapacityGraph, min_cut
from .ingest import Descriptor, ProposalSet, SynthCase, SynthConfig, generate_synthetic_case
from .metrics import EvalReport, j_decay, j_mean, j_recall, jaccard
from .pipeline import PipelineConfig, evaluate, run_pipeline
from .premask import SegmentRecord, binarize, preliminary_mask
from .track import TrackerParams, track_bbox
from .transfer import GrabCutParams, build_soft_mask, grabcut_fill, nearest_detected

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "BoundingBox",
    "CapacityGraph",
    "ClusterAssignment",
    "Descriptor",
    "EvalReport",
    "Frame",
    "GaussianMixture",
    "GrabCutParams",
    "PipelineConfig",
    "ProposalSet",
    "SegmentRecord",
    "SoftMask",
    "SynthCase",
    "SynthConfig",
    "TrackerParams",
    "VideoSequence",
    "bbox_of",
    "binarize",
    "build_soft_mask",
    "evaluate",
    "fit_gmm",
    "generate_synthetic_case",
    "gmm_density",
    "grabcut_fill",
    "j_decay",
    "j_mean",
    "j_recall",
    "jaccard",
    "l2_normalize",
    "mask_union",
    "mean_shift",
    "min_cut",
    "nearest_detected",
    "preliminary_mask",
    "resize_soft",
    "run_pipeline",
    "select_foreground",
    "track_bbox",
]

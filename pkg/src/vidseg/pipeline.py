"""End-to-end orchestration: load, premask, cluster, fill, write, score.

A run processes every sequence under an input root (or a single sequence
directory), writes one mask per frame under the output root, and emits a
JSON run summary. One failing sequence never aborts a batch; it is
recorded in the summary and reflected in the exit status.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cluster as _cluster
from . import ingest, metrics, premask, transfer
from .core import BinaryMask
from .errors import (
    ConfigurationError,
    IngestionError,
    PipelineError,
    ClusterSelectionError,
    RejectedInputError,
)
from .track import TrackerParams
from .transfer import GrabCutParams

logger = logging.getLogger(__name__)

CLUSTER_RULES = ("frames", "records")


@dataclass
class PipelineConfig:
    """All pipeline knobs; defaults reproduce the reference constants."""

    k: int = premask.DEFAULT_TOP_K
    tau_binarize: float = premask.DEFAULT_BINARIZE_TAU
    min_frac: float = _cluster.DEFAULT_MIN_CLUSTER_FRAC
    bandwidth: float | None = None  # None = auto from median pairwise distance
    p: int = 10
    grabcut: GrabCutParams = field(default_factory=GrabCutParams)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    seed: int = 0
    recall_mode: str = "frame"
    tau_recall: float = metrics.DEFAULT_RECALL_TAU
    exclude_endpoints: bool = False
    jobs: int = 1
    cluster_rule: str = "frames"  # "records" sizes clusters by record share

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if not 0.0 < self.tau_binarize < 1.0:
            raise ConfigurationError("tau_binarize must lie in (0, 1)")
        if not 0.0 < self.min_frac <= 1.0:
            raise ConfigurationError("min_frac must lie in (0, 1]")
        if self.bandwidth is not None and self.bandwidth <= 0.0:
            raise ConfigurationError("bandwidth must be positive")
        if self.p < 1:
            raise ConfigurationError("p must be >= 1")
        if self.recall_mode not in metrics.RECALL_MODES:
            raise ConfigurationError(f"recall_mode must be one of {metrics.RECALL_MODES}")
        if not 0.0 < self.tau_recall < 1.0:
            raise ConfigurationError("tau_recall must lie in (0, 1)")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        if self.cluster_rule not in CLUSTER_RULES:
            raise ConfigurationError(f"cluster_rule must be one of {CLUSTER_RULES}")

    def effective_grabcut(self) -> GrabCutParams:
        """Grab-cut params with the donor count taken from the pipeline-level p."""
        return replace(self.grabcut, donor_count=self.p)

    @classmethod
    def from_mapping(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        try:
            if "grabcut" in data:
                data["grabcut"] = GrabCutParams(**data["grabcut"])
            if "tracker" in data:
                data["tracker"] = TrackerParams(**data["tracker"])
            return cls(**data)
        except (TypeError, RejectedInputError) as e:
            raise ConfigurationError(f"bad configuration: {e}") from e

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        return cls.from_mapping(data)

    def as_dict(self) -> dict:
        return asdict(self)


def _load_frame_inputs(seq_dir: Path, cfg: PipelineConfig):
    seq = ingest.load_sequence(seq_dir / "frames", name=seq_dir.name)
    size = (seq.width, seq.height)
    proposal_sets = []
    for i in range(len(seq)):
        ps = ingest.load_proposal_set(seq_dir / "proposals", i, expected_size=size)
        descs = ingest.load_descriptor_file(seq_dir / "features" / f"{i:05d}.feat")
        if len(descs) != len(ps.proposals):
            raise IngestionError(
                f"frame {i}: {len(descs)} descriptors for {len(ps.proposals)} proposals"
            )
        for prop in ps.proposals:
            prop.descriptor = descs[prop.manifest_index]
        proposal_sets.append(ps)
    return seq, proposal_sets


def run_sequence(seq_dir: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> dict:
    """Run the full pipeline on one sequence; returns its summary entry."""
    seq_dir = Path(seq_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timing: dict[str, float] = {}

    t0 = time.perf_counter()
    seq, proposal_sets = _load_frame_inputs(seq_dir, cfg)
    n = len(seq)
    timing["load_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    records: list[premask.SegmentRecord] = []
    for ps in proposal_sets:
        _, recs = premask.preliminary_mask(ps, cfg.k, cfg.tau_binarize)
        records.extend(recs)
    timing["premask_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if not records:
        raise ClusterSelectionError("no usable segment records in the sequence")
    points = np.stack([_cluster.l2_normalize(r.descriptor).values for r in records])
    bandwidth = cfg.bandwidth if cfg.bandwidth is not None else _cluster.auto_bandwidth(points)
    assign = _cluster.mean_shift(points, bandwidth)
    for rec, label in zip(records, assign.labels):
        rec.cluster_label = int(label)
    if cfg.cluster_rule == "frames":
        fg = _cluster.select_foreground(assign, records, n, cfg.min_frac)
    else:
        fg = _cluster.select_foreground_by_count(assign, records, cfg.min_frac)
    if fg is None:
        raise ClusterSelectionError(
            f"no cluster spans enough of the sequence (min_frac={cfg.min_frac})"
        )
    by_frame = _cluster.cluster_masks(records, fg)
    masks: list[BinaryMask | None] = [by_frame.get(i) for i in range(n)]
    timing["cluster_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    filled = transfer.fill_frames(
        seq, masks, cfg.effective_grabcut(), cfg.tracker, cfg.seed
    )
    timing["fill_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    for i in range(n):
        mask = filled.get(i) or masks[i]
        ingest.write_binary_mask(mask, out_dir / f"{i:05d}.png")
    timing["write_s"] = time.perf_counter() - t0
    timing["per_frame_s"] = {
        stage: timing[stage] / n
        for stage in ("load_s", "premask_s", "cluster_s", "fill_s", "write_s")
    }

    sizes = np.bincount(assign.labels, minlength=assign.n_clusters)
    spans = [
        len({r.frame_index for r, l in zip(records, assign.labels) if int(l) == c})
        for c in range(assign.n_clusters)
    ]
    return {
        "name": seq.name,
        "frames": n,
        "filled_frames": sorted(filled),
        "cluster_stats": {
            "records": len(records),
            "n_clusters": int(assign.n_clusters),
            "foreground_cluster": int(fg),
            "cluster_sizes": [int(s) for s in sizes],
            "frames_spanned": spans,
            "bandwidth": float(bandwidth),
        },
        "error": None,
        "timing": timing,
    }


def _run_entry(args: tuple) -> dict:
    seq_dir, out_dir, cfg = args
    try:
        return run_sequence(seq_dir, out_dir, cfg)
    except (PipelineError,) as e:
        logger.error("sequence %s failed: %s", Path(seq_dir).name, e)
        return {
            "name": Path(seq_dir).name,
            "frames": None,
            "filled_frames": [],
            "cluster_stats": None,
            "error": e.diagnostic(),
            "timing": {},
        }
    except IngestionError as e:
        logger.error("sequence %s unreadable: %s", Path(seq_dir).name, e)
        return {
            "name": Path(seq_dir).name,
            "frames": None,
            "filled_frames": [],
            "cluster_stats": None,
            "error": {"error": "ingestion", "message": str(e)},
            "timing": {},
        }


def discover_sequences(input_root: str | Path) -> list[Path]:
    root = Path(input_root)
    if (root / "frames").is_dir():
        return [root]
    if not root.is_dir():
        raise IngestionError(f"input root {root} is not a directory")
    seqs = sorted(p for p in root.iterdir() if (p / "frames").is_dir())
    if not seqs:
        raise IngestionError(f"no sequences (directories with frames/) under {root}")
    return seqs


def run_pipeline(cfg: PipelineConfig, input_root: str | Path, output_root: str | Path) -> dict:
    """Run every sequence under input_root; write masks and a run summary."""
    t_start = time.perf_counter()
    seq_dirs = discover_sequences(input_root)
    out_root = Path(output_root)
    out_root.mkdir(parents=True, exist_ok=True)

    jobs = [(d, out_root / d.name, cfg) for d in seq_dirs]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            entries = list(pool.map(_run_entry, jobs))
    else:
        entries = [_run_entry(j) for j in jobs]
    entries.sort(key=lambda e: e["name"])

    summary = {
        "seed": cfg.seed,
        "config": cfg.as_dict(),
        "sequences": entries,
        "failures": sum(1 for e in entries if e["error"] is not None),
        "timing": {"total_s": time.perf_counter() - t_start},
    }
    (out_root / "run_summary.json").write_text(json.dumps(summary, indent=1))
    return summary


def _gt_sequences(gt_root: Path) -> list[tuple[str, Path]]:
    if (gt_root / "gt").is_dir():
        return [(gt_root.name, gt_root / "gt")]
    if not gt_root.is_dir():
        raise IngestionError(f"ground-truth root {gt_root} is not a directory")
    found = []
    for sub in sorted(gt_root.iterdir()):
        if not sub.is_dir():
            continue
        if (sub / "gt").is_dir():
            found.append((sub.name, sub / "gt"))
        elif any(p.suffix == ".png" for p in sub.iterdir()):
            found.append((sub.name, sub))
    if not found:
        raise IngestionError(f"no ground-truth sequences under {gt_root}")
    return found


def evaluate(
    pred_root: str | Path, gt_root: str | Path, cfg: PipelineConfig
) -> metrics.EvalReport:
    """Score predictions against ground truth, one J value per frame.

    A missing prediction scores against an empty mask (with a warning).
    ``cfg.exclude_endpoints`` drops the first and last frame of every
    sequence, matching common benchmark conventions.
    """
    pred_root = Path(pred_root)
    sequences = []
    for name, gt_dir in _gt_sequences(Path(gt_root)):
        gt_masks = ingest.load_mask_dir(gt_dir)
        if not gt_masks:
            raise IngestionError(f"no ground-truth masks in {gt_dir}")
        indices = sorted(gt_masks)
        if cfg.exclude_endpoints and len(indices) > 2:
            indices = indices[1:-1]
        js = []
        for i in indices:
            gt = gt_masks[i]
            pred_path = pred_root / name / f"{i:05d}.png"
            if pred_path.is_file():
                pred = ingest.load_binary_mask(pred_path)
            else:
                logger.warning("missing prediction %s; scoring empty mask", pred_path)
                pred = BinaryMask(np.zeros_like(gt.bits))
            js.append(metrics.jaccard(pred, gt))
        sequences.append(metrics.SequenceScores(name=name, per_frame_j=js))
    return metrics.EvalReport(sequences=sequences)


def cluster_dump(seq_dir: str | Path, cfg: PipelineConfig) -> dict:
    """Run premask + clustering only; JSON-friendly assignment for debugging."""
    seq, proposal_sets = _load_frame_inputs(Path(seq_dir), cfg)
    records = []
    for ps in proposal_sets:
        _, recs = premask.preliminary_mask(ps, cfg.k, cfg.tau_binarize)
        records.extend(recs)
    if not records:
        raise ClusterSelectionError("no usable segment records in the sequence")
    points = np.stack([_cluster.l2_normalize(r.descriptor).values for r in records])
    bandwidth = cfg.bandwidth if cfg.bandwidth is not None else _cluster.auto_bandwidth(points)
    assign = _cluster.mean_shift(points, bandwidth)
    for rec, label in zip(records, assign.labels):
        rec.cluster_label = int(label)
    if cfg.cluster_rule == "frames":
        fg = _cluster.select_foreground(assign, records, len(seq), cfg.min_frac)
    else:
        fg = _cluster.select_foreground_by_count(assign, records, cfg.min_frac)
    return {
        "sequence": seq.name,
        "frames": len(seq),
        "bandwidth": float(bandwidth),
        "n_clusters": int(assign.n_clusters),
        "foreground_cluster": None if fg is None else int(fg),
        "records": [
            {
                "frame": r.frame_index,
                "proposal": r.proposal_index,
                "label": r.cluster_label,
                "area": r.mask.area,
            }
            for r in records
        ],
    }

"""Batch extraction: frames directory -> proposals + FEAT descriptor files.

Output lands in the consumer's ingest layout under the output root:
``proposals/%05d/`` and ``features/%05d.feat``, plus an
``extract_manifest.json`` recording which model produced the data, its
preprocessing, and per-frame outcomes (including per-frame errors, which
do not abort the batch).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backends import Backend, get_backend
from .errors import ExtractError
from .formats import load_frame_image, numbered_frames, write_feat, write_frame_proposals

logger = logging.getLogger(__name__)

MANIFEST_NAME = "extract_manifest.json"


@dataclass
class ExtractManifest:
    model: dict
    k: int
    descriptor_dim: int
    frames: list[dict] = field(default_factory=list)

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=1))

    @classmethod
    def load(cls, path: Path) -> "ExtractManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def extract_all(
    frames_dir: str | Path,
    out_root: str | Path,
    k: int = 5,
    backend: str | Backend = "auto",
) -> ExtractManifest:
    """Extract k proposals + descriptors for every frame in a directory."""
    frames_dir = Path(frames_dir)
    out_root = Path(out_root)
    if k < 1:
        raise ExtractError("k must be >= 1")
    if not frames_dir.is_dir():
        raise ExtractError(f"not a directory: {frames_dir}")
    frames = numbered_frames(frames_dir)
    if not frames:
        raise ExtractError(f"no numbered frames under {frames_dir}")

    be = get_backend(backend) if isinstance(backend, str) else backend
    logger.info("extracting with backend %s v%s", be.name, be.version)

    proposals_root = out_root / "proposals"
    features_root = out_root / "features"
    features_root.mkdir(parents=True, exist_ok=True)

    manifest = ExtractManifest(
        model={
            "name": be.name,
            "version": be.version,
            "preprocessing": be.preprocessing(),
        },
        k=k,
        descriptor_dim=be.descriptor_dim,
    )
    for index, path in frames:
        entry: dict = {"index": index}
        try:
            rgb = load_frame_image(path)
            proposals = be.propose(rgb, k)
            proposals.sort(key=lambda p: -p.objectness)
            rows = be.describe(rgb, proposals)
            if rows.shape != (len(proposals), be.descriptor_dim):
                raise ExtractError(
                    f"backend returned descriptor shape {rows.shape}, "
                    f"expected {(len(proposals), be.descriptor_dim)}"
                )
            prop_dir = write_frame_proposals(
                proposals_root,
                index,
                [p.score_map for p in proposals],
                [p.objectness for p in proposals],
            )
            feat_path = features_root / f"{index:05d}.feat"
            write_feat(feat_path, rows)
            entry.update(
                {
                    "proposals_dir": str(prop_dir.relative_to(out_root)),
                    "feat_file": str(feat_path.relative_to(out_root)),
                    "proposals": len(proposals),
                    "error": None,
                }
            )
        except (ExtractError, OSError, ValueError) as e:
            logger.error("frame %05d failed: %s", index, e)
            entry.update({"proposals": 0, "error": str(e)})
        manifest.frames.append(entry)

    out_root.mkdir(parents=True, exist_ok=True)
    manifest.save(out_root / MANIFEST_NAME)
    return manifest

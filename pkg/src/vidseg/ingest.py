"""Disk I/O and synthetic test-case generation.

On-disk layout per sequence::

    <seq>/frames/%05d.png        8-bit RGB (or .jpg)
    <seq>/proposals/%05d/manifest.json + mask PNGs (8-bit grayscale)
    <seq>/features/%05d.feat     FEAT binary descriptor file
    <seq>/gt/%05d.png            8-bit grayscale, nonzero = foreground

FEAT format: magic ``FEAT``, uint32-LE count, uint32-LE dim, then
count*dim float32-LE values row-major; row r belongs to proposal r in
manifest order.

Loaders reject malformed input rather than repairing it.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BinaryMask, BoundingBox, Frame, SoftMask, VideoSequence, _bilinear
from .errors import ConfigurationError, IngestionError

FEAT_MAGIC = b"FEAT"
_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass
class Descriptor:
    """Fixed-dimension feature vector attached to one proposal."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size < 1:
            raise IngestionError("descriptor must be a non-empty 1-D vector")
        if not np.isfinite(self.values).all():
            raise IngestionError("descriptor contains non-finite values")
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass
class Proposal:
    """One region proposal: soft score map plus objectness score.

    ``manifest_index`` is the row index in the manifest (and FEAT file),
    kept so descriptors can be paired after sorting by objectness.
    """

    score_map: SoftMask
    objectness: float
    manifest_index: int
    descriptor: Descriptor | None = None


@dataclass
class ProposalSet:
    """Per-frame proposals, sorted by descending objectness."""

    frame_index: int
    proposals: list[Proposal] = field(default_factory=list)

    def __post_init__(self):
        # Stable sort: equal scores keep manifest order.
        self.proposals = sorted(self.proposals, key=lambda p: -p.objectness)


def _read_image(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im)
    except OSError as e:
        raise IngestionError(f"unreadable image {path}: {e}") from e


def _numbered_files(directory: Path, suffixes=_IMAGE_SUFFIXES) -> list[Path]:
    files = [p for p in directory.iterdir() if p.suffix.lower() in suffixes]
    keyed = []
    for p in files:
        try:
            keyed.append((int(p.stem), p))
        except ValueError:
            raise IngestionError(f"non-numeric frame filename: {p}")
    keyed.sort()
    return [p for _, p in keyed]


def load_sequence(path: str | Path, name: str | None = None) -> VideoSequence:
    """Load frames ordered by numeric filename; 8-bit channels map to v/255."""
    directory = Path(path)
    if not directory.is_dir():
        raise IngestionError(f"not a directory: {directory}")
    files = _numbered_files(directory)
    if not files:
        raise IngestionError(f"no frame images in {directory}")
    frames = []
    shape = None
    for p in files:
        arr = _read_image(p)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        if arr.ndim != 3 or arr.shape[2] < 3:
            raise IngestionError(f"frame {p} is not an RGB image")
        arr = arr[:, :, :3]
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise IngestionError(
                f"frame {p} is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
        frames.append(Frame(arr.astype(np.float64) / 255.0))
    if name is None:
        name = directory.parent.name if directory.name == "frames" else directory.name
    return VideoSequence(frames=frames, name=name)


def load_proposal_set(
    path: str | Path,
    frame_index: int,
    expected_size: tuple[int, int] | None = None,
) -> ProposalSet:
    """Load one frame's proposals from its manifest.

    ``expected_size`` is (width, height) of the frame; score maps that do
    not match are rejected.
    """
    frame_dir = Path(path) / f"{frame_index:05d}"
    manifest_path = frame_dir / "manifest.json"
    if not manifest_path.is_file():
        raise IngestionError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise IngestionError(f"bad manifest {manifest_path}: {e}") from e
    entries = manifest.get("proposals")
    if entries is None:
        raise IngestionError(f"manifest {manifest_path} lacks a 'proposals' list")
    proposals = []
    for idx, entry in enumerate(entries):
        mask_path = frame_dir / entry["mask"]
        if not mask_path.is_file():
            raise IngestionError(f"missing proposal mask: {mask_path}")
        arr = _read_image(mask_path)
        if arr.ndim != 2:
            raise IngestionError(f"proposal mask {mask_path} must be grayscale")
        if expected_size is not None and (arr.shape[1], arr.shape[0]) != expected_size:
            raise IngestionError(
                f"proposal mask {mask_path} is {arr.shape[1]}x{arr.shape[0]}, "
                f"frame is {expected_size[0]}x{expected_size[1]}"
            )
        proposals.append(
            Proposal(
                score_map=SoftMask(arr.astype(np.float64) / 255.0),
                objectness=float(entry["score"]),
                manifest_index=idx,
            )
        )
    return ProposalSet(frame_index=frame_index, proposals=proposals)


def load_descriptor_file(path: str | Path) -> list[Descriptor]:
    """Read a FEAT file into descriptors, in manifest order."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:4] != FEAT_MAGIC:
        raise IngestionError(f"{path}: bad FEAT magic")
    count, dim = struct.unpack_from("<II", data, 4)
    if dim < 1:
        raise IngestionError(f"{path}: descriptor dimension must be >= 1")
    payload = data[12:]
    expected = count * dim * 4
    if len(payload) != expected:
        raise IngestionError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    if not np.isfinite(flat).all():
        raise IngestionError(f"{path}: non-finite descriptor values")
    rows = flat.reshape(count, dim)
    return [Descriptor(rows[r]) for r in range(count)]


def write_descriptor_file(path: str | Path, descriptors: list[Descriptor]) -> None:
    """Write descriptors as a FEAT file (float32, manifest order)."""
    path = Path(path)
    if not descriptors:
        payload = b""
        count, dim = 0, 1
    else:
        dim = descriptors[0].dim
        if any(d.dim != dim for d in descriptors):
            raise IngestionError("descriptors have mixed dimensions")
        count = len(descriptors)
        mat = np.stack([d.values for d in descriptors]).astype("<f4")
        payload = mat.tobytes()
    path.write_bytes(FEAT_MAGIC + struct.pack("<II", count, dim) + payload)


def write_binary_mask(m: BinaryMask, path: str | Path) -> None:
    """Write as 8-bit grayscale PNG: 0 background, 255 foreground."""
    path = Path(path)
    try:
        Image.fromarray(m.bits * np.uint8(255), mode="L").save(path)
    except OSError as e:
        raise IngestionError(f"cannot write mask {path}: {e}") from e


def load_binary_mask(path: str | Path) -> BinaryMask:
    """Read an 8-bit grayscale mask; nonzero pixels are foreground."""
    arr = _read_image(Path(path))
    if arr.ndim != 2:
        raise IngestionError(f"mask {path} must be single-channel")
    return BinaryMask((arr != 0).astype(np.uint8))


def load_mask_dir(path: str | Path) -> dict[int, BinaryMask]:
    """All numbered masks in a directory, keyed by frame index."""
    directory = Path(path)
    if not directory.is_dir():
        raise IngestionError(f"not a directory: {directory}")
    return {int(p.stem): load_binary_mask(p) for p in _numbered_files(directory)}


# ---------------------------------------------------------------------------
# Synthetic cases
# ---------------------------------------------------------------------------


@dataclass
class SynthConfig:
    """Parameters of the synthetic moving-rectangle generator."""

    n_frames: int = 40
    width: int = 96
    height: int = 96
    drop_fraction: float = 0.0
    descriptor_dim: int = 64
    name: str = "synth"

    def __post_init__(self):
        if self.n_frames < 4:
            raise ConfigurationError("n_frames must be >= 4")
        if self.width < 32 or self.height < 32:
            raise ConfigurationError("frame size must be at least 32x32")
        if not 0.0 <= self.drop_fraction <= 0.5:
            raise ConfigurationError("drop_fraction must be in [0, 0.5]")
        if self.descriptor_dim < 10:
            raise ConfigurationError("descriptor_dim must be >= 10")


@dataclass
class SynthCase:
    """A fully in-memory test case with known ground truth."""

    sequence: VideoSequence
    ground_truth: list[BinaryMask]
    proposals: list[ProposalSet]
    dropped_frames: set[int]
    object_boxes: list[BoundingBox]


_N_DISTRACTORS = 4
_N_DISTRACTOR_IDENTITIES = 8


def _bounce_path(start: int, v: int, lo: int, hi: int, n: int) -> list[int]:
    """Integer position per step, reflecting off [lo, hi]."""
    pos, out = start, []
    for _ in range(n):
        out.append(pos)
        nxt = pos + v
        if nxt < lo or nxt > hi:
            v = -v
            nxt = pos + v
        pos = nxt
    return out


def _rect_mask(h: int, w: int, box: BoundingBox) -> BinaryMask:
    bits = np.zeros((h, w), dtype=np.uint8)
    ys, xs = box.as_slices()
    bits[ys, xs] = 1
    return BinaryMask(bits)


def _boxes_overlap(a: BoundingBox, b: BoundingBox) -> bool:
    return not (
        a.x + a.w <= b.x or b.x + b.w <= a.x or a.y + a.h <= b.y or b.y + b.h <= a.y
    )


def _unit_cluster_sample(rng, center: np.ndarray, sigma: float) -> np.ndarray:
    v = center + rng.normal(0.0, sigma, size=center.size)
    return v / np.linalg.norm(v)


def generate_synthetic_case(cfg: SynthConfig, seed: int) -> SynthCase:
    """Deterministic textured scene with one moving rectangle.

    Per frame: one proposal is the ground-truth rectangle jittered by at
    most one pixel (IoU >= 0.7 with truth), plus 4 distractor blobs placed
    away from the object. On dropped frames the true proposal is omitted.
    Descriptors live on the unit sphere: the object's proposals form one
    tight cluster, distractors are spread over 8 well-separated identities
    arranged so that no identity spans enough frames to be mistaken for
    the foreground.
    """
    rng = np.random.default_rng(seed)
    w, h, n = cfg.width, cfg.height, cfg.n_frames

    # Static textured background: coarse noise upsampled bilinearly.
    coarse = rng.uniform(0.10, 0.45, size=(h // 8 + 2, w // 8 + 2, 3))
    background = np.stack(
        [_upsample(coarse[:, :, c], h, w) for c in range(3)], axis=-1
    )

    # Rigid object patch: bright, with mild per-pixel texture.
    rect_w, rect_h = max(8, w // 4), max(8, h // 4)
    patch = np.clip(
        np.array([0.85, 0.20, 0.15]) + rng.normal(0.0, 0.03, size=(rect_h, rect_w, 3)),
        0.0,
        1.0,
    )

    xs = _bounce_path(2, 2, 0, w - rect_w, n)
    ys = _bounce_path(2, 1, 0, h - rect_h, n)
    object_boxes = [BoundingBox(x, y, rect_w, rect_h) for x, y in zip(xs, ys)]

    n_drop = int(np.floor(n * cfg.drop_fraction))
    dropped = set(int(i) for i in rng.choice(n, size=n_drop, replace=False))

    # Descriptor cluster centers: basis vectors are pairwise sqrt(2) apart.
    dim = cfg.descriptor_dim
    fg_center = np.zeros(dim)
    fg_center[0] = 1.0
    distractor_centers = []
    for c in range(_N_DISTRACTOR_IDENTITIES):
        v = np.zeros(dim)
        v[c + 1] = 1.0
        distractor_centers.append(v)

    frames, gts, proposal_sets = [], [], []
    for i in range(n):
        box = object_boxes[i]
        rgb = background.copy()
        ys_sl, xs_sl = box.as_slices()
        rgb[ys_sl, xs_sl] = patch
        frames.append(Frame(rgb))
        gts.append(_rect_mask(h, w, box))

        proposals = []
        manifest_idx = 0
        if i not in dropped:
            jx = int(rng.integers(-1, 2))
            jy = int(rng.integers(-1, 2))
            jbox = BoundingBox(
                min(max(box.x + jx, 0), w - rect_w),
                min(max(box.y + jy, 0), h - rect_h),
                rect_w,
                rect_h,
            )
            smap = np.zeros((h, w))
            jys, jxs = jbox.as_slices()
            smap[jys, jxs] = 0.9
            proposals.append(
                Proposal(
                    score_map=SoftMask(smap),
                    objectness=float(0.90 + 0.05 * rng.random()),
                    manifest_index=manifest_idx,
                    descriptor=Descriptor(_unit_cluster_sample(rng, fg_center, 0.01)),
                )
            )
            manifest_idx += 1

        for d in range(_N_DISTRACTORS):
            identity = (i * _N_DISTRACTORS + d) % _N_DISTRACTOR_IDENTITIES
            for _ in range(200):
                dw = int(rng.integers(6, max(7, w // 6)))
                dh = int(rng.integers(6, max(7, h // 6)))
                dx = int(rng.integers(0, w - dw + 1))
                dy = int(rng.integers(0, h - dh + 1))
                dbox = BoundingBox(dx, dy, dw, dh)
                if not _boxes_overlap(dbox, box):
                    break
            else:
                raise ConfigurationError("could not place distractor away from object")
            smap = np.zeros((h, w))
            dys, dxs = dbox.as_slices()
            smap[dys, dxs] = 0.8
            proposals.append(
                Proposal(
                    score_map=SoftMask(smap),
                    objectness=float(0.30 + 0.40 * rng.random()),
                    manifest_index=manifest_idx,
                    descriptor=Descriptor(
                        _unit_cluster_sample(rng, distractor_centers[identity], 0.01)
                    ),
                )
            )
            manifest_idx += 1

        proposal_sets.append(ProposalSet(frame_index=i, proposals=proposals))

    return SynthCase(
        sequence=VideoSequence(frames=frames, name=cfg.name),
        ground_truth=gts,
        proposals=proposal_sets,
        dropped_frames=dropped,
        object_boxes=object_boxes,
    )


def _upsample(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    return _bilinear(a, out_h, out_w)


def write_synth_case(case: SynthCase, root: str | Path) -> Path:
    """Materialize a case in the on-disk ingest layout. Returns the sequence dir."""
    seq_dir = Path(root) / case.sequence.name
    frames_dir = seq_dir / "frames"
    gt_dir = seq_dir / "gt"
    prop_dir = seq_dir / "proposals"
    feat_dir = seq_dir / "features"
    for d in (frames_dir, gt_dir, prop_dir, feat_dir):
        d.mkdir(parents=True, exist_ok=True)

    for i, frame in enumerate(case.sequence.frames):
        arr = np.clip(np.rint(frame.rgb * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(frames_dir / f"{i:05d}.png")
        write_binary_mask(case.ground_truth[i], gt_dir / f"{i:05d}.png")

        ps = case.proposals[i]
        fdir = prop_dir / f"{i:05d}"
        fdir.mkdir(exist_ok=True)
        # Manifest rows follow manifest_index so FEAT rows line up.
        ordered = sorted(ps.proposals, key=lambda p: p.manifest_index)
        entries = []
        for p in ordered:
            mask_name = f"m_{p.manifest_index:02d}.png"
            gray = np.clip(np.rint(p.score_map.values * 255.0), 0, 255).astype(np.uint8)
            Image.fromarray(gray, mode="L").save(fdir / mask_name)
            entries.append({"mask": mask_name, "score": p.objectness})
        (fdir / "manifest.json").write_text(
            json.dumps({"frame": i, "proposals": entries}, indent=1)
        )
        write_descriptor_file(
            feat_dir / f"{i:05d}.feat", [p.descriptor for p in ordered]
        )

    meta = {
        "dropped_frames": sorted(case.dropped_frames),
        "object_boxes": [[b.x, b.y, b.w, b.h] for b in case.object_boxes],
    }
    (seq_dir / "synth_meta.json").write_text(json.dumps(meta, indent=1))
    return seq_dir

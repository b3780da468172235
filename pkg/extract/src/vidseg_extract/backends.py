"""Proposal + descriptor backends.

Every backend turns one RGB frame into ranked soft score maps with
objectness scores, and embeds each proposal's tight-box crop into a
4096-dimensional descriptor. Which backend produced the data is recorded
in the extraction manifest, so models are swappable without touching the
consumer.

* ``torchvision``: Mask R-CNN (ResNet-50 FPN) instance masks ranked by
  detection score; descriptors from the first fully connected layer (fc6)
  of VGG-16 on 224x224 box crops. Needs pretrained weights; raises
  :class:`SetupError` with download instructions when they are missing.
* ``classical``: dependency-light deterministic stand-in for environments
  without model weights. Proposals are connected components of a
  color-quantized image ranked by color saliency; descriptors are 64x64
  tiny-image intensity crops (4096 values). Useful for format-contract
  tests and smoke runs, not for leaderboard numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

from .errors import SetupError

DESCRIPTOR_DIM = 4096
_LUMA = np.array([0.299, 0.587, 0.114])

_WEIGHT_HELP = """pretrained weights are unavailable in this environment.
To set them up, download on a machine with network access:
  https://download.pytorch.org/models/maskrcnn_resnet50_fpn_coco-bf2d0c1e.pth
  https://download.pytorch.org/models/vgg16-397923af.pth
and place both files under ~/.cache/torch/hub/checkpoints/ (or point
TORCH_HOME at a directory containing hub/checkpoints/ with them)."""


@dataclass
class Proposal:
    score_map: np.ndarray  # (H, W) float in [0, 1]
    objectness: float


class Backend(Protocol):
    name: str
    version: str
    descriptor_dim: int

    def propose(self, rgb: np.ndarray, k: int) -> list[Proposal]: ...

    def describe(self, rgb: np.ndarray, proposals: list[Proposal]) -> np.ndarray: ...

    def preprocessing(self) -> dict: ...


def _bilinear_resize(a: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = a.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    rows = a[y0, :] * (1.0 - ty) + a[y1, :] * ty
    return rows[:, x0] * (1.0 - tx) + rows[:, x1] * tx


def _tight_box(score_map: np.ndarray, tau: float = 0.2):
    """(y0, y1, x0, x1) bounds of the thresholded map; whole frame if empty."""
    mask = score_map >= tau
    if not mask.any():
        return 0, score_map.shape[0], 0, score_map.shape[1]
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return rows[0], rows[-1] + 1, cols[0], cols[-1] + 1


def _centered_box_proposals(h: int, w: int, count: int) -> list[Proposal]:
    """Deterministic low-score filler proposals at shrinking scales."""
    out = []
    for i in range(count):
        frac = 0.7 * (0.75**i)
        bh = max(2, int(round(h * frac)))
        bw = max(2, int(round(w * frac)))
        y0 = (h - bh) // 2
        x0 = (w - bw) // 2
        smap = np.zeros((h, w))
        smap[y0 : y0 + bh, x0 : x0 + bw] = 0.5
        out.append(Proposal(score_map=smap, objectness=0.01 / (i + 1)))
    return out


class ClassicalBackend:
    """Color-segment proposals + tiny-image descriptors; fully deterministic."""

    name = "classical-blobs"
    version = "1"
    descriptor_dim = DESCRIPTOR_DIM

    N_COLORS = 6
    KMEANS_ITERS = 10
    MIN_AREA = 16
    MAX_AREA_FRAC = 0.9
    SMOOTH_SIGMA = 1.0
    TINY_SIDE = 64  # 64 * 64 == DESCRIPTOR_DIM

    def preprocessing(self) -> dict:
        return {
            "proposals": "k-means color quantization (K=6, luminance-quantile "
            "init, 10 iterations), 8-connected components scored by distance "
            "from the median color, gaussian-smoothed masks (sigma=1)",
            "descriptors": "grayscale tight-box crop resized bilinearly to "
            "64x64 and flattened",
        }

    def _quantize(self, rgb: np.ndarray) -> np.ndarray:
        h, w = rgb.shape[:2]
        pixels = rgb.reshape(-1, 3)
        luma = pixels @ _LUMA
        order = np.argsort(luma, kind="stable")
        idx = order[
            np.minimum(
                ((np.arange(self.N_COLORS) + 0.5) * len(order) / self.N_COLORS).astype(int),
                len(order) - 1,
            )
        ]
        centers = pixels[idx]
        for _ in range(self.KMEANS_ITERS):
            d2 = ((pixels[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = d2.argmin(axis=1)
            for c in range(self.N_COLORS):
                sel = labels == c
                if sel.any():
                    centers[c] = pixels[sel].mean(axis=0)
        return labels.reshape(h, w)

    def propose(self, rgb: np.ndarray, k: int) -> list[Proposal]:
        h, w = rgb.shape[:2]
        n = h * w
        median = np.median(rgb.reshape(-1, 3), axis=0)
        saliency = np.linalg.norm(rgb - median, axis=2)
        peak = saliency.max()
        if peak > 0:
            saliency = saliency / peak

        quant = self._quantize(rgb)
        eight = np.ones((3, 3), dtype=int)
        candidates = []
        for c in range(self.N_COLORS):
            comp, n_comp = ndimage.label(quant == c, structure=eight)
            for cid in range(1, n_comp + 1):
                mask = comp == cid
                area = int(mask.sum())
                if area < self.MIN_AREA or area > self.MAX_AREA_FRAC * n:
                    continue
                score = float(saliency[mask].mean() * np.sqrt(area / n))
                smap = np.clip(
                    ndimage.gaussian_filter(mask.astype(float), self.SMOOTH_SIGMA),
                    0.0,
                    1.0,
                )
                candidates.append(Proposal(score_map=smap, objectness=score))
        candidates.sort(key=lambda p: -p.objectness)
        candidates = candidates[:k]
        if len(candidates) < k:
            candidates.extend(_centered_box_proposals(h, w, k - len(candidates)))
            candidates.sort(key=lambda p: -p.objectness)
        return candidates[:k]

    def describe(self, rgb: np.ndarray, proposals: list[Proposal]) -> np.ndarray:
        gray = rgb @ _LUMA
        rows = np.empty((len(proposals), self.descriptor_dim), dtype=np.float32)
        for i, prop in enumerate(proposals):
            y0, y1, x0, x1 = _tight_box(prop.score_map)
            crop = gray[y0:y1, x0:x1]
            tiny = _bilinear_resize(crop, self.TINY_SIDE, self.TINY_SIDE)
            vec = tiny.ravel().astype(np.float32)
            if not vec.any():
                vec[0] = 1.0
            rows[i] = vec
        return rows


class TorchvisionBackend:
    """Mask R-CNN proposals + VGG-16 fc6 descriptors (pretrained weights)."""

    name = "torchvision-maskrcnn-vgg16"
    descriptor_dim = DESCRIPTOR_DIM

    IMAGENET_MEAN = (0.485, 0.456, 0.406)
    IMAGENET_STD = (0.229, 0.224, 0.225)
    INPUT_SIDE = 224

    def __init__(self):
        try:
            import torch  # noqa: F401
            import torchvision
        except ImportError as e:
            raise SetupError(f"torch/torchvision are not installed: {e}") from e
        self.version = torchvision.__version__
        try:
            from torchvision.models import VGG16_Weights, vgg16
            from torchvision.models.detection import (
                MaskRCNN_ResNet50_FPN_Weights,
                maskrcnn_resnet50_fpn,
            )

            self._detector = maskrcnn_resnet50_fpn(
                weights=MaskRCNN_ResNet50_FPN_Weights.COCO_V1,
                box_score_thresh=0.0,
            ).eval()
            vgg = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).eval()
            self._vgg_features = vgg.features
            self._vgg_avgpool = vgg.avgpool
            self._fc6 = vgg.classifier[0]
        except Exception as e:
            raise SetupError(f"{self.name}: {_WEIGHT_HELP}\n(cause: {e})") from e

    def preprocessing(self) -> dict:
        return {
            "proposals": "maskrcnn_resnet50_fpn COCO_V1, soft instance masks "
            "ranked by detection score",
            "descriptors": "RGB tight-box crop, bilinear resize to 224x224, "
            "ImageNet mean/std normalization, VGG-16 fc6 pre-activation "
            "(classifier[0]) output",
        }

    def propose(self, rgb: np.ndarray, k: int) -> list[Proposal]:
        import torch

        h, w = rgb.shape[:2]
        with torch.no_grad():
            tensor = torch.from_numpy(np.ascontiguousarray(rgb.transpose(2, 0, 1))).float()
            (det,) = self._detector([tensor])
        masks = det["masks"].squeeze(1).numpy()  # (N, H, W) soft maps
        scores = det["scores"].numpy()
        order = np.argsort(-scores, kind="stable")[:k]
        out = [
            Proposal(
                score_map=np.clip(masks[i].astype(np.float64), 0.0, 1.0),
                objectness=float(scores[i]),
            )
            for i in order
        ]
        if len(out) < k:
            out.extend(_centered_box_proposals(h, w, k - len(out)))
            out.sort(key=lambda p: -p.objectness)
        return out[:k]

    def describe(self, rgb: np.ndarray, proposals: list[Proposal]) -> np.ndarray:
        import torch

        mean = np.array(self.IMAGENET_MEAN)
        std = np.array(self.IMAGENET_STD)
        crops = []
        for prop in proposals:
            y0, y1, x0, x1 = _tight_box(prop.score_map)
            crop = rgb[y0:y1, x0:x1]
            resized = np.stack(
                [
                    _bilinear_resize(crop[:, :, c], self.INPUT_SIDE, self.INPUT_SIDE)
                    for c in range(3)
                ],
                axis=0,
            )
            crops.append((resized - mean[:, None, None]) / std[:, None, None])
        batch = torch.from_numpy(np.stack(crops)).float()
        with torch.no_grad():
            feats = self._vgg_features(batch)
            pooled = torch.flatten(self._vgg_avgpool(feats), 1)
            fc6 = self._fc6(pooled)
        return fc6.numpy().astype(np.float32)


_BACKENDS = {
    "classical": ClassicalBackend,
    "torchvision": TorchvisionBackend,
}


def get_backend(name: str = "auto") -> Backend:
    """Instantiate a backend; ``auto`` prefers torchvision, else classical."""
    if name == "auto":
        try:
            return TorchvisionBackend()
        except SetupError:
            return ClassicalBackend()
    if name not in _BACKENDS:
        raise SetupError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
    return _BACKENDS[name]()

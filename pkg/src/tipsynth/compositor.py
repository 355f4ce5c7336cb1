"""Threat threshold, insertion-region intensity and the gated alpha blend."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateComposite, DomainError, EmptyMask, TipError
from .morphology import SegmentationParams, segment_bag_region
from .placement import DEFAULT_MAX_ATTEMPTS, derive_seed, insertion_mask, sample_placement
from .raster import as_rgb, to_grayscale
from .threat import rotate_signature

DEFAULT_ALPHA = 0.9
MAX_THREAT_THRESHOLD = 0.95
MIN_THREAT_THRESHOLD = 0.5


@dataclass(frozen=True)
class BlendParams:
    alpha: float
    g_hat: float
    threat_threshold: float


@dataclass(eq=False)
class CompositeRecord:
    image: np.ndarray
    bbox: tuple  # (x, y, width, height)
    label: str
    provenance: dict = field(default_factory=dict)

    def sidecar(self):
        """Provenance as a canonical JSON string."""
        doc = {"bbox": list(self.bbox), "label": self.label, **self.provenance}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @property
    def blend_params(self):
        prov = self.provenance
        return BlendParams(prov["alpha"], prov["g_hat"], prov["threat_threshold"])


def mean_insertion_intensity(gray, m):
    """Normalised mean grey level under ``m``, in [0, 1]."""
    gray = np.asarray(gray)
    m = np.asarray(m, dtype=bool)
    if gray.shape != m.shape:
        raise ValueError(f"grey image {gray.shape} and mask {m.shape} differ in size")
    count = int(np.count_nonzero(m))
    if count == 0:
        raise EmptyMask("insertion mask is empty")
    total = int(gray[m].sum(dtype=np.int64))
    return total / (255 * count)


def threat_threshold(g_hat):
    """``min(exp(g_hat**5) - 0.5, 0.95)``; always in [0.5, 0.95]."""
    g_hat = float(g_hat)
    if not 0.0 <= g_hat <= 1.0:
        raise DomainError(f"g_hat must lie in [0, 1], got {g_hat}")
    return min(math.exp(g_hat**5) - 0.5, MAX_THREAT_THRESHOLD)


def composite(target, sig, p, alpha=DEFAULT_ALPHA):
    """Blend ``sig`` into ``target`` at ``p``.

    Inside the insertion rectangle a target pixel is replaced by
    ``(1 - alpha) * target + alpha * source`` (per channel, rounded half up,
    clamped) when the source luma is below ``T * 255``; every other pixel is
    copied from the target unchanged.
    """
    target = as_rgb(target)
    height, width = target.shape[:2]
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if (p.sig_height, p.sig_width) != sig.foreground.shape:
        raise ValueError("placement size does not match the signature")
    m = insertion_mask(p, width, height)
    g_hat = mean_insertion_intensity(to_grayscale(target), m)
    t = threat_threshold(g_hat)

    sl = p.slices()
    source = np.ascontiguousarray(sig.image)
    blended, fired = kernels.blend(
        np.ascontiguousarray(target[sl]), source, to_grayscale(source), float(alpha), t * 255.0
    )
    if not fired.any():
        raise DegenerateComposite(
            f"no signature pixel darker than T*255 = {t * 255.0:.2f}; nothing to blend"
        )
    out = target.copy()
    out[sl] = blended

    rows = np.flatnonzero(fired.any(axis=1))
    cols = np.flatnonzero(fired.any(axis=0))
    bbox = (
        int(p.col0 + cols[0]),
        int(p.row0 + rows[0]),
        int(cols[-1] - cols[0] + 1),
        int(rows[-1] - rows[0] + 1),
    )
    provenance = {
        "theta": float(sig.theta),
        "placement": p.to_dict(),
        "alpha": float(alpha),
        "g_hat": g_hat,
        "threat_threshold": t,
        "blended_pixels": int(np.count_nonzero(fired)),
    }
    return CompositeRecord(out, bbox, sig.label, provenance)


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = DEFAULT_ALPHA
    rotation: tuple = (0.0, 360.0)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        lo, hi = self.rotation
        if not lo <= hi:
            raise ValueError(f"rotation range {self.rotation} is empty")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def draw_theta(seed, rotation=(0.0, 360.0)):
    lo, hi = rotation
    theta = float(np.random.default_rng(derive_seed(seed, 0)).uniform(lo, hi))
    return theta % 360.0


def compose_one(target, sig, seed, cfg=PipelineConfig(), region=None, target_name="<target>"):
    """Rotate, segment, place and blend: one synthetic threat image.

    ``region`` may carry a precomputed bag-region mask for ``target``.
    Failures are re-raised with the rejected (target, signature) pair in the
    message and the original exception type preserved.
    """
    try:
        rotated = rotate_signature(sig, draw_theta(seed, cfg.rotation))
        if region is None:
            region = segment_bag_region(target, cfg.segmentation)
        p = sample_placement(region, rotated, derive_seed(seed, 1), cfg.max_attempts)
        record = composite(target, rotated, p, cfg.alpha)
    except TipError as exc:
        pair = f"target {target_name}, signature {sig.source or sig.label}"
        raise type(exc)(f"{pair}: {exc}") from exc
    record.provenance["seed"] = int(seed)
    return record

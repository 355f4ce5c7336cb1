"""Binary morphology and the bag-region segmentation chain.

The chain is threshold -> dilate -> fill holes -> erode -> keep the largest
8-connected component. Its output is the only area where a threat may be
placed.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyMask
from .raster import to_grayscale


@dataclass(frozen=True)
class StructuringElement:
    shape: str = "square"
    radius: int = 2

    def __post_init__(self):
        if self.shape not in ("square", "disc"):
            raise ValueError(f"unknown structuring element shape {self.shape!r}")
        if int(self.radius) < 1:
            raise ValueError("structuring element radius must be >= 1")

    def offsets(self):
        """``(k, 2)`` int64 array of (drow, dcol) cells, centre included."""
        r = int(self.radius)
        dr, dc = np.mgrid[-r:r + 1, -r:r + 1]
        keep = np.ones(dr.shape, dtype=bool) if self.shape == "square" else dr**2 + dc**2 <= r * r
        return np.stack([dr[keep], dc[keep]], axis=1).astype(np.int64)

    def footprint(self):
        r = int(self.radius)
        fp = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
        off = self.offsets()
        fp[off[:, 0] + r, off[:, 1] + r] = True
        return fp


@dataclass(frozen=True)
class SegmentationParams:
    """Knobs for :func:`segment_bag_region`.

    The defaults are a declared choice: a 245 threshold suits the saturated
    white background of scanner output, and three passes of a radius-2
    square close typical scan noise at ~100k-pixel resolutions.
    """

    threshold: int = 245
    element: StructuringElement = field(default_factory=StructuringElement)
    dilate_iterations: int = 3
    erode_iterations: int = 3

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        se = d.pop("element", None) or {}
        if "shape" in d or "radius" in d:
            se = {"shape": d.pop("shape", "square"), "radius": d.pop("radius", 2)}
        return cls(element=StructuringElement(**se), **d)

    def to_dict(self):
        return {
            "threshold": int(self.threshold),
            "element": {"shape": self.element.shape, "radius": int(self.element.radius)},
            "dilate_iterations": int(self.dilate_iterations),
            "erode_iterations": int(self.erode_iterations),
        }


def _as_mask(mask):
    return np.ascontiguousarray(mask, dtype=np.bool_)


def binarise(gray, threshold):
    """Foreground is everything strictly darker than ``threshold``."""
    return np.asarray(gray) < threshold


def dilate(mask, se=StructuringElement(), iterations=1):
    out = _as_mask(mask)
    off = se.offsets()
    for _ in range(iterations):
        out = kernels.dilate(out, off)
    return out


def erode(mask, se=StructuringElement(), iterations=1):
    out = _as_mask(mask)
    off = se.offsets()
    for _ in range(iterations):
        out = kernels.erode(out, off)
    return out


def fill_holes(mask):
    return kernels.fill_holes(_as_mask(mask))


def label_components(mask, connectivity=8):
    """Return ``(labels, count)``; label ``k`` is the k-th component met in row-major order."""
    return kernels.label(_as_mask(mask), kernels.neighbour_offsets(connectivity))


def largest_region(mask):
    """Keep the biggest 8-connected component.

    Ties go to the component whose first pixel comes earliest in row-major
    order. Raises :class:`EmptyMask` if nothing is set.
    """
    labels, count = label_components(mask, 8)
    if count == 0:
        raise EmptyMask("mask has no set bits")
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def segmentation_stages(img, params=SegmentationParams()):
    """Run the chain and return every intermediate mask, keyed by stage name.

    Stage order: ``binary``, ``dilated``, ``filled``, ``eroded``, ``region``.
    ``region`` is missing when nothing survived erosion.
    """
    stages = {}
    stages["binary"] = binarise(to_grayscale(img), params.threshold)
    stages["dilated"] = dilate(stages["binary"], params.element, params.dilate_iterations)
    stages["filled"] = fill_holes(stages["dilated"])
    stages["eroded"] = erode(stages["filled"], params.element, params.erode_iterations)
    if stages["eroded"].any():
        stages["region"] = largest_region(stages["eroded"])
    return stages


def segment_bag_region(img, params=SegmentationParams()):
    stages = segmentation_stages(img, params)
    if "region" not in stages:
        raise EmptyMask("no foreground left to segment (blank scan?)")
    return stages["region"]

"""Threat signatures: extraction from plain-background scans, rotation, on-disk library."""
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import EmptySignature
from .morphology import binarise
from .raster import as_rgb, load_image, save_image, to_grayscale

log = logging.getLogger(__name__)

CLASSES = ("Firearm", "FirearmParts", "Knives")
DEFAULT_BACKGROUND_THRESHOLD = 245
_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True, eq=False)
class ThreatSignature:
    """A tightly cropped threat raster and its foreground mask.

    Raster pixels outside the foreground are pure white, so only foreground
    pixels can ever pass the compositing brightness test. ``theta`` is the
    rotation (degrees) applied so far; ``source`` is an optional provenance
    string, usually the file the signature came from.
    """

    image: np.ndarray
    foreground: np.ndarray
    label: str
    theta: float = 0.0
    background_threshold: int = DEFAULT_BACKGROUND_THRESHOLD
    source: str = ""

    def __post_init__(self):
        if self.image.shape[:2] != self.foreground.shape:
            raise ValueError("image and foreground dimensions differ")
        if not self.foreground.any():
            raise EmptySignature("signature has no foreground pixels")

    @property
    def height(self):
        return self.image.shape[0]

    @property
    def width(self):
        return self.image.shape[1]

    def __eq__(self, other):
        if not isinstance(other, ThreatSignature):
            return NotImplemented
        return (
            self.label == other.label
            and self.theta == other.theta
            and np.array_equal(self.image, other.image)
            and np.array_equal(self.foreground, other.foreground)
        )


def _tight_crop(image, mask):
    """Crop to the mask's bounding box and whiten everything outside the mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptySignature("no foreground pixels")
    sl = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    image, mask = image[sl].copy(), np.ascontiguousarray(mask[sl])
    image[~mask] = 255
    return image, mask


def extract_signature(scan, label, background_threshold=DEFAULT_BACKGROUND_THRESHOLD, source=""):
    """Threshold a plain-background scan and crop to the threat's bounding box."""
    scan = as_rgb(scan)
    fg = binarise(to_grayscale(scan), background_threshold)
    if not fg.any():
        raise EmptySignature(f"no pixel darker than {background_threshold} in scan {source or ''}".rstrip())
    image, mask = _tight_crop(scan, fg)
    return ThreatSignature(image, mask, label, 0.0, int(background_threshold), source)


def rotated_canvas_size(width, height, theta):
    """``(width, height)`` of the canvas that holds a ``width x height`` raster rotated by ``theta`` degrees."""
    rad = math.radians(theta)
    c, s = abs(math.cos(rad)), abs(math.sin(rad))
    # the slack keeps 90-degree cases from ceiling 1e-16 residue up a pixel
    new_w = math.ceil(width * c + height * s - 1e-9)
    new_h = math.ceil(width * s + height * c - 1e-9)
    return max(new_w, 1), max(new_h, 1)


def _rotate_general(image, mask, theta):
    """Inverse-map rotation: bilinear raster with white fill, nearest-neighbour mask.

    Positive ``theta`` turns the content counter-clockwise as displayed.
    """
    h, w = mask.shape
    new_w, new_h = rotated_canvas_size(w, h, theta)
    rad = math.radians(theta)
    cos, sin = math.cos(rad), math.sin(rad)

    v, u = np.mgrid[0:new_h, 0:new_w].astype(np.float64)
    dx = u - (new_w - 1) / 2.0
    dy = v - (new_h - 1) / 2.0
    sx = (w - 1) / 2.0 + dx * cos - dy * sin
    sy = (h - 1) / 2.0 + dx * sin + dy * cos

    # bilinear on a source padded with one ring of white
    padded = np.full((h + 2, w + 2, 3), 255.0)
    padded[1:-1, 1:-1] = image
    px, py = sx + 1.0, sy + 1.0
    inside = (px >= 0) & (px <= w + 1) & (py >= 0) & (py <= h + 1)
    x0 = np.clip(np.floor(px), 0, w).astype(np.int64)
    y0 = np.clip(np.floor(py), 0, h).astype(np.int64)
    fx = np.clip(px - x0, 0.0, 1.0)[..., None]
    fy = np.clip(py - y0, 0.0, 1.0)[..., None]
    top = padded[y0, x0] * (1 - fx) + padded[y0, x0 + 1] * fx
    bottom = padded[y0 + 1, x0] * (1 - fx) + padded[y0 + 1, x0 + 1] * fx
    value = top * (1 - fy) + bottom * fy
    value = np.where(inside[..., None], value, 255.0)
    raster = np.clip(np.floor(value + 0.5), 0, 255).astype(np.uint8)

    rx = np.floor(sx + 0.5).astype(np.int64)
    ry = np.floor(sy + 0.5).astype(np.int64)
    hit = (rx >= 0) & (rx < w) & (ry >= 0) & (ry < h)
    rot_mask = np.zeros((new_h, new_w), dtype=bool)
    rot_mask[hit] = mask[ry[hit], rx[hit]]
    return raster, rot_mask


def rotate_signature(sig, theta):
    """Rotate ``sig`` by ``theta`` degrees in [0, 360) and re-crop tight.

    Quarter turns are exact permutations. For other angles the new
    foreground is the nearest-neighbour mask restricted to interpolated
    pixels still darker than the background threshold; the rest of the
    canvas is white.
    """
    theta = float(theta)
    if not 0.0 <= theta < 360.0:
        raise ValueError(f"theta must lie in [0, 360), got {theta}")
    total = (sig.theta + theta) % 360.0
    if theta == 0.0:
        return replace(sig, theta=total)
    if theta % 90.0 == 0.0:
        k = int(theta // 90)
        image = np.ascontiguousarray(np.rot90(sig.image, k))
        mask = np.ascontiguousarray(np.rot90(sig.foreground, k))
        return replace(sig, image=image, foreground=mask, theta=total)
    raster, mask = _rotate_general(sig.image, sig.foreground, theta)
    mask &= binarise(to_grayscale(raster), sig.background_threshold)
    image, mask = _tight_crop(raster, mask)
    return replace(sig, image=image, foreground=mask, theta=total)


def iter_class_images(root):
    """Yield ``(class_name, path)`` for every raster in the per-class subdirectories of ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"threat directory {root} does not exist")
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() in _IMAGE_SUFFIXES:
                yield class_dir.name, path


def load_threat_library(root, background_threshold=DEFAULT_BACKGROUND_THRESHOLD):
    """Map class name -> list of signatures, in sorted file order."""
    library = {}
    for name, path in iter_class_images(root):
        sig = extract_signature(load_image(path), name, background_threshold, source=str(path))
        library.setdefault(name, []).append(sig)
    return library


def build_threat_library(scan_dir, out_dir, background_threshold=DEFAULT_BACKGROUND_THRESHOLD):
    """Crop every raw scan under ``scan_dir/<class>/`` into ``out_dir/<class>/<stem>.png``.

    Blank scans are skipped with a warning. Returns the number of signatures written.
    """
    out_dir = Path(out_dir)
    written = 0
    for name, path in iter_class_images(scan_dir):
        try:
            sig = extract_signature(load_image(path), name, background_threshold, source=str(path))
        except EmptySignature:
            log.warning("skipping %s: no threat pixels below %d", path, background_threshold)
            continue
        (out_dir / name).mkdir(parents=True, exist_ok=True)
        save_image(sig.image, out_dir / name / f"{path.stem}.png")
        written += 1
    return written

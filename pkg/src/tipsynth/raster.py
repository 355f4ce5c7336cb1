"""Raster primitives.

Images are plain numpy arrays:

* RGB image: ``uint8`` array of shape ``(height, width, 3)``
* grey image: ``uint8`` array of shape ``(height, width)``
* binary mask: ``bool`` array of shape ``(height, width)``
"""
import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError

_ACCEPTED_FORMATS = {"PNG", "JPEG"}
_EIGHT_BIT_MODES = {"1", "L", "LA", "P", "PA", "RGB", "RGBA", "RGBX", "CMYK", "YCbCr"}


def as_rgb(img):
    """Validate and return ``img`` as a contiguous ``(h, w, 3)`` uint8 array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected an (h, w, 3) RGB array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {arr.dtype}")
    return np.ascontiguousarray(arr)


def load_image(path):
    """Decode a PNG or JPEG file into an RGB array.

    Greyscale inputs are replicated across the three channels. Alpha is
    dropped. Rasters deeper than 8 bits per channel are rejected.
    """
    path = Path(path)
    data = path.read_bytes()
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format not in _ACCEPTED_FORMATS:
                raise DecodeError(f"{path}: unsupported format {im.format}")
            if im.mode not in _EIGHT_BIT_MODES:
                raise DecodeError(f"{path}: unsupported pixel mode {im.mode} (8-bit only)")
            im.load()
            rgb = im.convert("RGB")
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return np.array(rgb, dtype=np.uint8)


def save_image(img, path):
    """Write ``img`` losslessly as PNG. Missing parent directories raise ``FileNotFoundError``."""
    arr = np.asarray(img)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8) * 255
    if arr.ndim == 2:
        Image.fromarray(np.ascontiguousarray(arr, dtype=np.uint8), mode="L").save(path, format="PNG")
    else:
        Image.fromarray(as_rgb(arr), mode="RGB").save(path, format="PNG")


def to_grayscale(img):
    """Rec.601 luma, rounded half away from zero.

    Evaluated in integer arithmetic as ``(299 R + 587 G + 114 B + 500) // 1000``
    so that exact halves round up instead of drifting with float error.
    """
    arr = np.asarray(img)
    acc = (
        299 * arr[..., 0].astype(np.int32)
        + 587 * arr[..., 1].astype(np.int32)
        + 114 * arr[..., 2].astype(np.int32)
    )
    return ((acc + 500) // 1000).astype(np.uint8)

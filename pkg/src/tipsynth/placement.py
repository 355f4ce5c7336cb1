"""Random insertion positions inside a segmented bag region."""
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoValidPlacement, SignatureTooLarge

DEFAULT_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class Placement:
    """Top-left corner of the signature raster in the target frame.

    Target pixel ``(i, j)`` inside the rectangle corresponds to signature
    pixel ``(i - row0, j - col0)``.
    """

    row0: int
    col0: int
    sig_width: int
    sig_height: int

    def slices(self):
        return (
            slice(self.row0, self.row0 + self.sig_height),
            slice(self.col0, self.col0 + self.sig_width),
        )

    def fits(self, width, height):
        return (
            self.row0 >= 0
            and self.col0 >= 0
            and self.row0 + self.sig_height <= height
            and self.col0 + self.sig_width <= width
        )

    def to_dict(self):
        return {k: int(v) for k, v in asdict(self).items()}


def derive_seed(master, *keys):
    """Mix job/attempt indices into a master seed, giving an independent 64-bit seed."""
    seq = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def is_valid_placement(region, foreground, row0, col0):
    h, w = foreground.shape
    return bool(region[row0:row0 + h, col0:col0 + w][foreground].all())


def sample_placement(region, sig, seed, max_attempts=DEFAULT_MAX_ATTEMPTS):
    """Rejection-sample a top-left corner until the whole threat foreground sits in ``region``.

    Candidates are uniform over every in-bounds corner, so the accepted
    position is uniform over the valid set.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    region = np.asarray(region, dtype=bool)
    height, width = region.shape
    h, w = sig.foreground.shape
    if h > height or w > width:
        raise SignatureTooLarge(f"signature {w}x{h} does not fit target {width}x{height}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        row0 = int(rng.integers(0, height - h + 1))
        col0 = int(rng.integers(0, width - w + 1))
        if is_valid_placement(region, sig.foreground, row0, col0):
            return Placement(row0, col0, w, h)
    raise NoValidPlacement(f"no valid position for a {w}x{h} signature after {max_attempts} attempts")


def insertion_mask(p, target_width, target_height):
    if not p.fits(target_width, target_height):
        raise ValueError(f"{p} lies outside a {target_width}x{target_height} target")
    m = np.zeros((target_height, target_width), dtype=bool)
    m[p.slices()] = True
    return m

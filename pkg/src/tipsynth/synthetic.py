"""Procedural stand-ins for benign bag scans and plain-background threat scans.

Real scanner data is not redistributable, so the tests, the benchmark and
the README walkthrough run on these. Output mimics false-colour X-ray
imagery: near-white background, a cluttered mid-intensity bag, dark metal.

    python -m tipsynth.synthetic OUT_DIR [--bags N] [--threats N] [--seed S]
"""
import argparse
from pathlib import Path

import numpy as np

from .raster import save_image

_TINTS = np.array(
    [[1.00, 0.72, 0.38], [0.45, 0.62, 1.00], [0.55, 0.90, 0.45], [0.85, 0.85, 0.85]]
)


def _white(h, w, rng):
    return rng.integers(249, 256, size=(h, w, 3)).astype(np.float64)


def _ellipse(h, w, cy, cx, ry, rx):
    y, x = np.ogrid[:h, :w]
    return ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1.0


def make_bag(rng, height=180, width=240):
    """A rounded bag of clutter on a noisy white background, with a few stray specks."""
    img = _white(height, width, rng)
    y, x = np.ogrid[:height, :width]
    top, left = int(rng.integers(10, 25)), int(rng.integers(10, 25))
    bottom, right = height - int(rng.integers(10, 25)), width - int(rng.integers(10, 25))
    r = 18
    inner = (y >= top) & (y < bottom) & (x >= left) & (x < right)
    for cy, cx in ((top + r, left + r), (top + r, right - r), (bottom - r, left + r), (bottom - r, right - r)):
        corner = ((y < top + r) | (y >= bottom - r)) & ((x < left + r) | (x >= right - r))
        near = (np.abs(y - cy) <= r) & (np.abs(x - cx) <= r)
        inner &= ~(corner & near & ((y - cy) ** 2 + (x - cx) ** 2 > r * r))
    base = rng.uniform(175, 215)
    img[inner] = base * _TINTS[3] + rng.normal(0, 6, size=(int(inner.sum()), 3))
    for _ in range(int(rng.integers(6, 12))):
        cy, cx = rng.uniform(top, bottom), rng.uniform(left, right)
        blob = _ellipse(height, width, cy, cx, rng.uniform(6, 25), rng.uniform(6, 30)) & inner
        tint = _TINTS[int(rng.integers(len(_TINTS)))]
        img[blob] = rng.uniform(90, 190) * tint
    # handle
    hx = (left + right) // 2
    handle = _ellipse(height, width, top, hx, 9, 30) & ~_ellipse(height, width, top, hx, 5, 24) & (y < top)
    img[handle] = 160
    for _ in range(4):
        sy, sx = int(rng.integers(height)), int(rng.integers(width))
        img[sy:sy + 2, sx:sx + 2] = 200
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _metal(mask, rng, img):
    tint = _TINTS[int(rng.integers(2))]
    shade = rng.uniform(25, 80)
    img[mask] = shade * tint + rng.normal(0, 4, size=(int(mask.sum()), 3))


def make_threat(rng, kind, height=90, width=90):
    """A dark silhouette of ``kind`` (Firearm, FirearmParts, Knives) on plain white."""
    img = _white(height, width, rng)
    y, x = np.ogrid[:height, :width]
    cy, cx = height // 2, width // 2
    if kind == "Firearm":
        length = int(rng.integers(34, 46))
        barrel = (np.abs(y - (cy - 6)) <= 3) & (np.abs(x - cx) <= length // 2)
        grip = (y >= cy - 6) & (y <= cy + 14) & (x >= cx + length // 2 - 12) & (x <= cx + length // 2 - 3)
        trigger = _ellipse(height, width, cy, cx + length // 2 - 17, 4, 4) & ~_ellipse(
            height, width, cy, cx + length // 2 - 17, 2, 2
        )
        mask = barrel | grip | trigger
    elif kind == "FirearmParts":
        w2, h2 = int(rng.integers(8, 14)), int(rng.integers(5, 9))
        mask = (np.abs(y - cy) <= h2) & (np.abs(x - cx) <= w2)
        mask &= ~_ellipse(height, width, cy, cx, max(h2 - 3, 1), max(w2 - 4, 1))
    elif kind == "Knives":
        length = int(rng.integers(30, 42))
        tip = cx - length // 2
        blade = (x >= tip) & (x <= cx + 2) & (np.abs(y - cy) <= 1 + (x - tip) * 4 // length)
        handle = (x > cx + 2) & (x <= cx + length // 2) & (np.abs(y - cy) <= 3)
        mask = blade | handle
    else:
        raise ValueError(f"unknown threat kind {kind!r}")
    _metal(mask, rng, img)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_corpus(out_dir, n_bags=3, n_threats=2, seed=0, classes=("Firearm", "FirearmParts", "Knives")):
    """Write ``bags/*.png`` and ``scans/<class>/*.png`` under ``out_dir``."""
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "bags").mkdir(parents=True, exist_ok=True)
    for k in range(n_bags):
        save_image(make_bag(rng), out / "bags" / f"bag_{k:03d}.png")
    for c in classes:
        (out / "scans" / c).mkdir(parents=True, exist_ok=True)
        for k in range(n_threats):
            save_image(make_threat(rng, c), out / "scans" / c / f"{c.lower()}_{k:03d}.png")
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description="Write a toy corpus of bag and threat scans.")
    ap.add_argument("out_dir")
    ap.add_argument("--bags", type=int, default=3)
    ap.add_argument("--threats", type=int, default=2, help="signatures per class")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    write_corpus(args.out_dir, args.bags, args.threats, args.seed)


if __name__ == "__main__":
    main()

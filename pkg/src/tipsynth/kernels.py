"""Per-pixel kernels behind the morphology and compositing modules.

Every kernel exists twice: an explicit-loop version compiled with numba
(``*_loops``) and a vectorised numpy version (``*_numpy``). The public names
at the bottom of the module are bound to one or the other according to
``tipsynth._accel.BACKEND``, except dilate and erode, which always use the
numpy version because it is the faster one. Both versions are importable directly so they
can be checked against each other.

Structuring elements are passed as an ``(k, 2)`` int64 array of
``(drow, dcol)`` offsets. Cells outside the image count as background.
"""
import numpy as np

from ._accel import BACKEND, njit

_N4 = np.array([[-1, 0], [0, -1], [0, 1], [1, 0]], dtype=np.int64)
_N8 = np.array(
    [[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 1], [1, -1], [1, 0], [1, 1]],
    dtype=np.int64,
)


def neighbour_offsets(connectivity):
    if connectivity == 4:
        return _N4
    if connectivity == 8:
        return _N8
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


# ---------------------------------------------------------------------------
# loop kernels (numba)
# ---------------------------------------------------------------------------


@njit
def dilate_loops(mask, offsets):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    k = offsets.shape[0]
    for i in range(h):
        for j in range(w):
            for n in range(k):
                r = i + offsets[n, 0]
                c = j + offsets[n, 1]
                if 0 <= r < h and 0 <= c < w and mask[r, c]:
                    out[i, j] = True
                    break
    return out


@njit
def erode_loops(mask, offsets):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    k = offsets.shape[0]
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            keep = True
            for n in range(k):
                r = i + offsets[n, 0]
                c = j + offsets[n, 1]
                if r < 0 or r >= h or c < 0 or c >= w or not mask[r, c]:
                    keep = False
                    break
            out[i, j] = keep
    return out


@njit
def fill_holes_loops(mask):
    """Flood the background from the border (4-connected); unreached background is a hole."""
    h, w = mask.shape
    reached = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty(h * w, dtype=np.int64)
    top = 0
    for i in range(h):
        for j in range(w):
            if (i == 0 or j == 0 or i == h - 1 or j == w - 1) and not mask[i, j] and not reached[i, j]:
                reached[i, j] = True
                stack[top] = i * w + j
                top += 1
    while top > 0:
        top -= 1
        p = stack[top]
        i = p // w
        j = p - i * w
        for n in range(4):
            r = i + _N4[n, 0]
            c = j + _N4[n, 1]
            if 0 <= r < h and 0 <= c < w and not mask[r, c] and not reached[r, c]:
                reached[r, c] = True
                stack[top] = r * w + c
                top += 1
    out = np.empty((h, w), dtype=np.bool_)
    for i in range(h):
        for j in range(w):
            out[i, j] = mask[i, j] or not reached[i, j]
    return out


@njit
def label_loops(mask, offsets):
    """Label connected components; labels follow the row-major order of each component's first pixel."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    k = offsets.shape[0]
    current = 0
    for i0 in range(h):
        for j0 in range(w):
            if not mask[i0, j0] or labels[i0, j0] != 0:
                continue
            current += 1
            labels[i0, j0] = current
            stack[0] = i0 * w + j0
            top = 1
            while top > 0:
                top -= 1
                p = stack[top]
                i = p // w
                j = p - i * w
                for n in range(k):
                    r = i + offsets[n, 0]
                    c = j + offsets[n, 1]
                    if 0 <= r < h and 0 <= c < w and mask[r, c] and labels[r, c] == 0:
                        labels[r, c] = current
                        stack[top] = r * w + c
                        top += 1
    return labels, current


@njit
def blend_loops(target, source, source_grey, alpha, cutoff):
    """Threshold-gated linear blend over one insertion rectangle.

    ``target`` and ``source`` have equal ``(h, w, 3)`` shapes. A pixel is
    blended when its source luma is strictly below ``cutoff``; each channel
    becomes ``floor((1 - alpha) * t + alpha * s + 0.5)`` clamped to [0, 255].
    """
    h, w, nch = target.shape
    out = target.copy()
    fired = np.zeros((h, w), dtype=np.bool_)
    beta = 1.0 - alpha
    for i in range(h):
        for j in range(w):
            if source_grey[i, j] < cutoff:
                fired[i, j] = True
                for ch in range(nch):
                    v = np.floor(beta * target[i, j, ch] + alpha * source[i, j, ch] + 0.5)
                    if v < 0.0:
                        v = 0.0
                    elif v > 255.0:
                        v = 255.0
                    out[i, j, ch] = np.uint8(v)
    return out, fired


# ---------------------------------------------------------------------------
# numpy kernels
# ---------------------------------------------------------------------------


def _shifted(mask, dr, dc, fill):
    """``out[i, j] = mask[i + dr, j + dc]`` with ``fill`` outside the image."""
    h, w = mask.shape
    out = np.full((h, w), fill, dtype=np.bool_)
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = mask[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    return out


def dilate_numpy(mask, offsets):
    out = np.zeros(mask.shape, dtype=np.bool_)
    for dr, dc in offsets:
        out |= _shifted(mask, int(dr), int(dc), False)
    return out


def erode_numpy(mask, offsets):
    out = np.ones(mask.shape, dtype=np.bool_)
    for dr, dc in offsets:
        out &= _shifted(mask, int(dr), int(dc), False)
    return out


def label_numpy(mask, offsets):
    """Union-find over the pixel adjacency edges, hooking larger roots onto smaller.

    A component's root ends up being its first row-major pixel, so ranking
    the roots gives the same labels as the loop kernel.
    """
    h, w = mask.shape
    n = h * w
    flat = np.arange(n, dtype=np.int64).reshape(h, w)
    us, vs = [], []
    for dr, dc in offsets:
        dr, dc = int(dr), int(dc)
        if (dr, dc) <= (0, 0):  # each undirected edge once
            continue
        both = mask & _shifted(mask, dr, dc, False)
        us.append(flat[both])
        vs.append(flat[both] + dr * w + dc)
    u = np.concatenate(us) if us else np.empty(0, np.int64)
    v = np.concatenate(vs) if vs else np.empty(0, np.int64)
    parent = np.arange(n, dtype=np.int64)
    while u.size:
        ru, rv = parent[u], parent[v]
        live = ru != rv
        u, v, ru, rv = u[live], v[live], ru[live], rv[live]
        if not u.size:
            break
        np.minimum.at(parent, np.maximum(ru, rv), np.minimum(ru, rv))
        while True:
            hop = parent[parent]
            if np.array_equal(hop, parent):
                break
            parent = hop
    labels = np.zeros(n, dtype=np.int32)
    flat_mask = mask.ravel()
    if not flat_mask.any():
        return labels.reshape(h, w), 0
    roots, inverse = np.unique(parent[flat_mask], return_inverse=True)
    labels[flat_mask] = inverse.astype(np.int32) + 1
    return labels.reshape(h, w), len(roots)


def fill_holes_numpy(mask):
    background = ~mask
    labels, _ = label_numpy(background, _N4)
    edge = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    outside = np.isin(labels, edge[edge > 0])
    return mask | (background & ~outside)


def blend_numpy(target, source, source_grey, alpha, cutoff):
    fired = source_grey < cutoff
    mixed = np.floor((1.0 - alpha) * target.astype(np.float64) + alpha * source.astype(np.float64) + 0.5)
    mixed = np.clip(mixed, 0.0, 255.0).astype(np.uint8)
    out = np.where(fired[..., None], mixed, target)
    return out, fired


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

# Shifted boolean OR/AND is already SIMD in numpy and beats the compiled
# per-pixel loops (see benchmarks/bench_kernels.py), so both backends share it.
dilate, erode = dilate_numpy, erode_numpy
if BACKEND == "numba":
    fill_holes, label, blend = fill_holes_loops, label_loops, blend_loops
else:
    fill_holes, label, blend = fill_holes_numpy, label_numpy, blend_numpy

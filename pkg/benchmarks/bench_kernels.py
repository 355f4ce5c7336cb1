"""Compare the numba loop kernels with the vectorised numpy kernels.

    python benchmarks/bench_kernels.py [--size 480x640] [--repeat 5]

Times each hot kernel, plus the whole bag segmentation chain, on a
synthetic bag mask. The numba column is only meaningful when numba is
installed and JIT is not disabled; compile time is excluded by a warm-up call.
"""
import argparse
import timeit

import numpy as np

from tipsynth import _accel, kernels, morphology
from tipsynth.morphology import StructuringElement
from tipsynth.raster import to_grayscale
from tipsynth.synthetic import make_bag

BACKENDS = {
    "numba": {
        "dilate": kernels.dilate_loops,
        "erode": kernels.erode_loops,
        "fill_holes": kernels.fill_holes_loops,
        "label": kernels.label_loops,
        "blend": kernels.blend_loops,
    },
    "numpy": {
        "dilate": kernels.dilate_numpy,
        "erode": kernels.erode_numpy,
        "fill_holes": kernels.fill_holes_numpy,
        "label": kernels.label_numpy,
        "blend": kernels.blend_numpy,
    },
}


def _use(backend):
    for name, fn in BACKENDS[backend].items():
        setattr(kernels, name, fn)


def _best(fn, repeat):
    fn()  # warm-up, triggers JIT compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", default="480x640", help="HxW of the synthetic bag")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    h, w = (int(v) for v in args.size.split("x"))

    rng = np.random.default_rng(0)
    bag = make_bag(rng, h, w)
    mask = morphology.binarise(to_grayscale(bag), 245)
    offsets8 = kernels.neighbour_offsets(8)
    se = StructuringElement().offsets()
    source = rng.integers(0, 256, size=bag.shape).astype(np.uint8)
    grey = to_grayscale(source)

    cases = {
        "dilate r=2": lambda k: k["dilate"](mask, se),
        "erode r=2": lambda k: k["erode"](mask, se),
        "fill_holes": lambda k: k["fill_holes"](mask),
        "label 8-conn": lambda k: k["label"](mask, offsets8),
        "blend": lambda k: k["blend"](bag, source, grey, 0.9, 0.8 * 255.0),
    }

    if not _accel.HAVE_NUMBA or _accel.BACKEND != "numba":
        print("note: numba unavailable or disabled; the numba column runs interpreted loops")
    print(f"bag {h}x{w}, best of {args.repeat}")
    print(f"{'kernel':<16} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    original = {name: getattr(kernels, name) for name in BACKENDS["numpy"]}
    try:
        rows = list(cases.items()) + [("segment bag", None)]
        for label, case in rows:
            times = {}
            for backend, table in BACKENDS.items():
                if case is None:
                    _use(backend)
                    times[backend] = _best(lambda: morphology.segment_bag_region(bag), args.repeat)
                else:
                    times[backend] = _best(lambda: case(table), args.repeat)
            ratio = times["numpy"] / times["numba"]
            print(f"{label:<16} {times['numba'] * 1e3:>10.2f} {times['numpy'] * 1e3:>10.2f} {ratio:>7.1f}x")
    finally:
        for name, fn in original.items():
            setattr(kernels, name, fn)


if __name__ == "__main__":
    main()

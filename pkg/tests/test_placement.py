import numpy as np
import pytest
from scipy import stats

import oracles
from tipsynth.compositor import mean_insertion_intensity
from tipsynth.errors import NoValidPlacement, SignatureTooLarge
from tipsynth.placement import Placement, derive_seed, insertion_mask, sample_placement
from tipsynth.threat import ThreatSignature


def _sig(h, w, fg=None):
    fg = np.ones((h, w), bool) if fg is None else fg
    return ThreatSignature(np.zeros((h, w, 3), np.uint8), fg, "Firearm")


def test_all_ones_region_first_attempt():
    p = sample_placement(np.ones((10, 12), bool), _sig(1, 1), seed=5, max_attempts=1)
    assert p.fits(12, 10)


def test_signature_too_large():
    with pytest.raises(SignatureTooLarge):
        sample_placement(np.ones((40, 40), bool), _sig(50, 50), seed=0)


def test_impossible_region():
    with pytest.raises(NoValidPlacement):
        sample_placement(np.zeros((20, 20), bool), _sig(3, 3), seed=0, max_attempts=50)


def test_max_attempts_must_be_positive():
    with pytest.raises(ValueError):
        sample_placement(np.ones((5, 5), bool), _sig(1, 1), seed=0, max_attempts=0)


def _pocket():
    region = np.zeros((64, 64), bool)
    region[22:42, 30:50] = True
    return region


def test_placement_in_enumerated_valid_set():
    region = _pocket()
    sig = _sig(8, 8)
    valid = set(oracles.valid_placements(region, sig.foreground))
    assert len(valid) == 13 * 13
    for seed in range(50):
        p = sample_placement(region, sig, seed, max_attempts=2000)
        assert (p.row0, p.col0) in valid


def test_irregular_foreground_may_overhang():
    region = np.zeros((12, 12), bool)
    region[4:8, 4:8] = True
    fg = np.zeros((6, 6), bool)
    fg[1:5, 1:5] = True  # corners of the canvas are background
    sig = _sig(6, 6, fg)
    valid = oracles.valid_placements(region, fg)
    assert valid == [(3, 3)]
    assert sample_placement(region, sig, 1, max_attempts=5000) == Placement(3, 3, 6, 6)


def test_determinism():
    region = _pocket()
    a = sample_placement(region, _sig(8, 8), 99, 2000)
    b = sample_placement(region, _sig(8, 8), 99, 2000)
    assert a == b


def test_uniform_over_valid_set():
    region = np.zeros((12, 12), bool)
    region[2:9, 3:10] = True
    sig = _sig(3, 3)
    valid = oracles.valid_placements(region, sig.foreground)
    index = {v: k for k, v in enumerate(valid)}
    counts = np.zeros(len(valid))
    for seed in range(10_000):
        p = sample_placement(region, sig, derive_seed(1234, seed), 1000)
        counts[index[(p.row0, p.col0)]] += 1
    _, pvalue = stats.chisquare(counts)
    assert pvalue > 0.01


def test_derived_seeds_differ():
    seeds = {derive_seed(7, k, a) for k in range(50) for a in range(3)}
    assert len(seeds) == 150
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)


def test_insertion_mask_examples():
    m = insertion_mask(Placement(0, 0, 1, 1), 3, 3)
    assert m.sum() == 1 and m[0, 0]
    m = insertion_mask(Placement(1, 1, 3, 2), 5, 4)
    expected = np.zeros((4, 5), bool)
    expected[1:3, 1:4] = True
    assert np.array_equal(m, expected)


def test_insertion_mask_popcount_and_bounds(rng):
    for _ in range(100):
        H, W = rng.integers(1, 30, size=2)
        h, w = rng.integers(1, H + 1), rng.integers(1, W + 1)
        p = Placement(int(rng.integers(0, H - h + 1)), int(rng.integers(0, W - w + 1)), int(w), int(h))
        assert insertion_mask(p, W, H).sum() == w * h
    with pytest.raises(ValueError):
        insertion_mask(Placement(2, 2, 3, 3), 4, 4)


def test_mask_mean_equals_rectangle_mean(rng):
    gray = rng.integers(0, 256, size=(30, 40)).astype(np.uint8)
    for _ in range(50):
        h, w = rng.integers(1, 20, size=2)
        p = Placement(int(rng.integers(0, 30 - h + 1)), int(rng.integers(0, 40 - w + 1)), int(w), int(h))
        direct = gray[p.row0:p.row0 + h, p.col0:p.col0 + w].astype(np.int64).sum() / (255 * w * h)
        assert mean_insertion_intensity(gray, insertion_mask(p, 40, 30)) == direct

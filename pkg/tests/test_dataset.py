import json
import warnings

import numpy as np
import pytest

from tipsynth.dataset import (
    Annotation,
    BuildConfig,
    DatasetManifest,
    ManifestEntry,
    _largest_remainder,
    build_dataset,
    coco_document,
    dumps_coco,
    read_coco,
    stratified_split,
    write_coco,
)
from tipsynth.morphology import SegmentationParams
from tipsynth.errors import ConfigError, DegenerateClassWarning, ExhaustedRetries, SchemaError
from tipsynth.raster import load_image

PAPER_COUNTS = {"Firearm": 3192, "FirearmParts": 1204, "Knives": 3207}


def _cfg(corpus, out, counts, seed=5, **kw):
    return BuildConfig(str(corpus / "bags"), str(corpus / "library"), str(out), counts, seed, **kw)


def _manifest(counts):
    entries = []
    for c, n in counts.items():
        for _ in range(n):
            k = len(entries) + 1
            entries.append(ManifestEntry(k, f"images/{k:06d}.png", 10, 10, c, (1, 1, 2, 2)))
    return DatasetManifest(entries, seed=1)


def test_zero_counts_give_empty_dataset(corpus, tmp_path):
    manifest, report = build_dataset(_cfg(corpus, tmp_path / "ds", {"Firearm": 0, "FirearmParts": 0, "Knives": 0}))
    assert manifest.entries == []
    assert list((tmp_path / "ds" / "images").iterdir()) == []
    doc = json.loads((tmp_path / "ds" / "annotations.json").read_text())
    assert doc["images"] == [] and doc["annotations"] == [] and doc["categories"] == []


def test_count_contract(corpus, tmp_path):
    manifest, report = build_dataset(_cfg(corpus, tmp_path / "ds", {"Firearm": 10}))
    assert len(manifest.entries) == 10
    anns = manifest.annotations()
    assert len(anns) == 10 and {a.category for a in anns} == {"Firearm"}
    assert len(list((tmp_path / "ds" / "images").glob("*.png"))) == 10
    assert report.produced == 10
    assert (tmp_path / "ds" / "build_report.txt").read_text().startswith("requested 10\nproduced 10")


def test_bboxes_validate_against_pngs(corpus, tmp_path):
    manifest, _ = build_dataset(_cfg(corpus, tmp_path / "ds", {"Knives": 6, "FirearmParts": 6}))
    for e in manifest.entries:
        img = load_image(tmp_path / "ds" / e.file_name)
        assert img.shape[:2] == (e.height, e.width)
        x, y, w, h = e.bbox
        assert w > 0 and h > 0 and x >= 0 and y >= 0 and x + w <= e.width and y + h <= e.height


def test_build_is_deterministic_and_independent_of_jobs(corpus, tmp_path):
    counts = {"Firearm": 4, "Knives": 4}
    m1, _ = build_dataset(_cfg(corpus, tmp_path / "a", counts))
    m2, _ = build_dataset(_cfg(corpus, tmp_path / "b", counts), jobs=2)
    assert [e.to_dict() for e in m1.entries] == [e.to_dict() for e in m2.entries]
    for e in m1.entries:
        assert (tmp_path / "a" / e.file_name).read_bytes() == (tmp_path / "b" / e.file_name).read_bytes()
    m3, _ = build_dataset(_cfg(corpus, tmp_path / "c", counts, seed=6))
    assert [e.bbox for e in m3.entries] != [e.bbox for e in m1.entries]


def test_failed_pairs_are_resampled_and_reported(corpus, tmp_path):
    # two attempts per placement make NoValidPlacement common; jobs must still complete
    cfg = _cfg(corpus, tmp_path / "ds", {"Firearm": 8}, max_attempts=1, retries=50)
    manifest, report = build_dataset(cfg)
    assert len(manifest.entries) == 8
    assert report.failures
    assert "NoValidPlacement" in (tmp_path / "ds" / "build_report.txt").read_text()


def test_exhausted_retries(corpus, tmp_path):
    cfg = _cfg(corpus, tmp_path / "ds", {"Firearm": 1}, rotation=(0.0, 0.0), max_attempts=1, retries=1,
               segmentation=SegmentationParams(threshold=1))
    with pytest.raises(ExhaustedRetries):
        build_dataset(cfg)


def test_config_errors(corpus, tmp_path):
    with pytest.raises(ConfigError):
        build_dataset(_cfg(corpus, tmp_path / "x", {"Guns": 1}))
    with pytest.raises(ConfigError):
        build_dataset(_cfg(corpus, tmp_path / "x", {"Firearm": 1}, seed=None))
    with pytest.raises(ConfigError):
        build_dataset(_cfg(corpus, tmp_path / "x", {"Firearm": -1}))
    with pytest.raises(ConfigError):
        BuildConfig.from_dict({"benign_dir": "a", "threat_dir": "b", "out_dir": "c", "count_per_class": {}, "colour": 1})
    with pytest.raises(ConfigError):
        BuildConfig.from_dict({"benign_dir": "a"})


def test_config_round_trips_through_dict(corpus, tmp_path):
    cfg = _cfg(corpus, tmp_path, {"Knives": 3}, alpha=0.8)
    assert BuildConfig.from_dict(cfg.to_dict()) == cfg


def test_full_scale_counts():
    # 3,192 firearms + 1,204 firearm parts + 3,207 knives
    assert sum(PAPER_COUNTS.values()) == 7603
    split = stratified_split(_manifest(PAPER_COUNTS), (0.6, 0.2, 0.2), seed=0)
    for c, per in split.split_counts().items():
        n = PAPER_COUNTS[c]
        for s, r in zip(("train", "val", "test"), (0.6, 0.2, 0.2)):
            assert abs(per[s] - r * n) < 1


def test_split_exact_division():
    split = stratified_split(_manifest({"A": 10, "B": 10}), (0.6, 0.2, 0.2), seed=3)
    assert split.split_counts() == {"A": {"train": 6, "val": 2, "test": 2}, "B": {"train": 6, "val": 2, "test": 2}}


def test_split_largest_remainder():
    assert _largest_remainder(5, (0.6, 0.2, 0.2)) == [3, 1, 1]
    assert _largest_remainder(7, (0.6, 0.2, 0.2)) == [4, 2, 1]  # 4.2/1.4/1.4: ties go to the earlier split
    assert _largest_remainder(1, (0.5, 0.25, 0.25)) == [1, 0, 0]
    split = stratified_split(_manifest({"A": 5}), (0.6, 0.2, 0.2), seed=0)
    assert split.split_counts() == {"A": {"train": 3, "val": 1, "test": 1}}


def test_split_is_deterministic_partition():
    m = _manifest({"A": 17, "B": 9, "C": 31})
    a = stratified_split(m, seed=11)
    b = stratified_split(m, seed=11)
    assert [e.split for e in a.entries] == [e.split for e in b.entries]
    assert {e.split for e in a.entries} == {"train", "val", "test"}
    assert [e.image_id for e in a.entries] == [e.image_id for e in m.entries]
    c = stratified_split(m, seed=12)
    assert [e.split for e in a.entries] != [e.split for e in c.entries]


def test_split_degenerate_class_goes_to_train():
    m = _manifest({"A": 2, "B": 10})
    with pytest.warns(DegenerateClassWarning):
        split = stratified_split(m)
    assert split.split_counts()["A"] == {"train": 2}


def test_split_rejects_bad_ratios():
    with pytest.raises(ValueError):
        stratified_split(_manifest({"A": 3}), (0.5, 0.2, 0.2))
    with pytest.raises(ValueError):
        stratified_split(_manifest({"A": 3}), (1.2, -0.1, -0.1))


def test_coco_empty_document(tmp_path):
    write_coco(DatasetManifest(), [], tmp_path / "a.json")
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc == {"images": [], "annotations": [], "categories": []}


def test_coco_area_and_ids():
    m = DatasetManifest([ManifestEntry(1, "images/1.png", 100, 100, "Knives")])
    doc = coco_document(m, [Annotation(1, "Knives", (10, 20, 30, 40), 1)])
    (ann,) = doc["annotations"]
    assert ann["area"] == 1200 and ann["bbox"] == [10, 20, 30, 40] and ann["iscrowd"] == 0
    assert doc["categories"] == [{"id": 1, "name": "Knives"}]


def test_category_ids_are_lexicographic():
    m = _manifest({"Knives": 1, "Firearm": 1, "FirearmParts": 1})
    doc = coco_document(m, m.annotations())
    assert [(c["id"], c["name"]) for c in doc["categories"]] == [(1, "Firearm"), (2, "FirearmParts"), (3, "Knives")]


def test_coco_round_trip_is_byte_identical(tmp_path):
    m = stratified_split(_manifest({"A": 4, "B": 3}), seed=1)
    write_coco(m, m.annotations(), tmp_path / "a.json")
    view, anns = read_coco(tmp_path / "a.json")
    write_coco(view, anns, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert anns == m.annotations()


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"images": []},
        {"images": [{"id": 1}], "annotations": [], "categories": []},
        {"images": [], "annotations": [{"id": 1, "image_id": 9, "category_id": 1, "bbox": [0, 0, 1, 1]}],
         "categories": [{"id": 1, "name": "A"}]},
        {"images": [{"id": 1, "file_name": "a", "width": 1, "height": 1}] * 2, "annotations": [], "categories": []},
    ],
)
def test_read_coco_schema_errors(tmp_path, doc):
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaError):
        read_coco(tmp_path / "bad.json")


def test_manifest_json_round_trip(tmp_path):
    m = stratified_split(_manifest({"A": 4}), seed=2)
    m.save(tmp_path / "m.json")
    assert DatasetManifest.load(tmp_path / "m.json").dumps() == m.dumps()

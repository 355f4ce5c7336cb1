"""Synthetic dataset builds, stratified splits and COCO interchange.

Output tree of a build, relative to ``out_dir``::

    images/000001.png ...
    annotations.json      COCO detection ground truth
    manifest.json         entries + seed + config snapshot
    build_report.txt      retries and failures
"""
import json
import logging
import math
import os
import warnings
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np

from .compositor import DEFAULT_ALPHA, PipelineConfig, compose_one
from .errors import ConfigError, DegenerateClassWarning, EmptyMask, ExhaustedRetries, SchemaError, TipError
from .morphology import SegmentationParams, segment_bag_region
from .placement import DEFAULT_MAX_ATTEMPTS, derive_seed
from .raster import load_image, save_image
from .threat import DEFAULT_BACKGROUND_THRESHOLD, load_threat_library

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.6, 0.2, 0.2)
_BENIGN_SUFFIXES = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class Annotation:
    image_id: int
    category: str
    bbox: tuple
    annotation_id: int


@dataclass
class ManifestEntry:
    image_id: int
    file_name: str
    width: int
    height: int
    category: str
    bbox: tuple = None
    split: str = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["bbox"] = None if self.bbox is None else [int(v) for v in self.bbox]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("bbox") is not None:
            d["bbox"] = tuple(int(v) for v in d["bbox"])
        return cls(**d)


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    seed: int = None
    config: dict = field(default_factory=dict)

    def annotations(self):
        """One annotation per entry that carries a box; annotation id equals image id."""
        return [
            Annotation(e.image_id, e.category, tuple(e.bbox), e.image_id)
            for e in self.entries
            if e.bbox is not None
        ]

    def class_counts(self):
        return Counter(e.category for e in self.entries)

    def split_counts(self):
        """``{class: {split: n}}`` including unassigned entries under ``None``."""
        out = defaultdict(Counter)
        for e in self.entries:
            out[e.category][e.split] += 1
        return {k: dict(v) for k, v in sorted(out.items())}

    def to_dict(self):
        return {
            "seed": self.seed,
            "config": self.config,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls([ManifestEntry.from_dict(e) for e in d["entries"]], d.get("seed"), d.get("config", {}))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed manifest: {exc}") from exc

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class BuildConfig:
    benign_dir: str
    threat_dir: str
    out_dir: str
    count_per_class: dict
    seed: int = None
    alpha: float = DEFAULT_ALPHA
    rotation: tuple = (0.0, 360.0)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    background_threshold: int = DEFAULT_BACKGROUND_THRESHOLD
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    retries: int = 10

    _FIELDS = (
        "benign_dir", "threat_dir", "out_dir", "count_per_class", "seed", "alpha", "rotation",
        "segmentation", "background_threshold", "max_attempts", "retries",
    )

    def validate(self):
        if self.seed is None:
            raise ConfigError("a seed is required (config 'seed' or --seed)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if any(int(n) < 0 for n in self.count_per_class.values()):
            raise ConfigError("count_per_class values must be >= 0")
        if self.max_attempts < 1 or self.retries < 1:
            raise ConfigError("max_attempts and retries must be >= 1")
        lo, hi = self.rotation
        if lo > hi:
            raise ConfigError(f"rotation range {self.rotation} is empty")
        return self

    def pipeline(self):
        return PipelineConfig(self.alpha, tuple(self.rotation), self.segmentation, self.max_attempts)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls._FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"benign_dir", "threat_dir", "out_dir", "count_per_class"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        try:
            d["count_per_class"] = {str(k): int(v) for k, v in (d["count_per_class"] or {}).items()}
            if "segmentation" in d:
                d["segmentation"] = SegmentationParams.from_dict(d["segmentation"])
            if "rotation" in d:
                lo, hi = d["rotation"]
                d["rotation"] = (float(lo), float(hi))
            for key in ("benign_dir", "threat_dir", "out_dir"):
                d[key] = str(d[key])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def to_dict(self):
        return {
            "benign_dir": self.benign_dir,
            "threat_dir": self.threat_dir,
            "out_dir": self.out_dir,
            "count_per_class": dict(sorted(self.count_per_class.items())),
            "seed": self.seed,
            "alpha": self.alpha,
            "rotation": list(self.rotation),
            "segmentation": self.segmentation.to_dict(),
            "background_threshold": self.background_threshold,
            "max_attempts": self.max_attempts,
            "retries": self.retries,
        }


@dataclass
class BuildReport:
    requested: int = 0
    produced: int = 0
    failures: list = field(default_factory=list)  # (job, attempt, error type, message)

    def text(self):
        lines = [
            f"requested {self.requested}",
            f"produced {self.produced}",
            f"retries {len(self.failures)}",
        ]
        for kind, n in sorted(Counter(f[2] for f in self.failures).items()):
            lines.append(f"  {kind}: {n}")
        for job, attempt, kind, msg in self.failures:
            lines.append(f"job {job} attempt {attempt} {kind}: {msg}")
        return "\n".join(lines) + "\n"


def list_benign_images(benign_dir):
    root = Path(benign_dir)
    if not root.is_dir():
        raise ConfigError(f"benign directory {root} does not exist")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in _BENIGN_SUFFIXES)


# per-process build state, filled by _init_worker
_STATE = {}


def _init_worker(cfg_dict, benign, library):
    _STATE.clear()
    _STATE["cfg"] = BuildConfig.from_dict(cfg_dict)
    _STATE["benign"] = benign
    _STATE["library"] = library
    _bag.cache_clear()


@lru_cache(maxsize=32)
def _bag(index):
    """Benign image and its segmented region (or the EmptyMask it raised)."""
    path = _STATE["benign"][index]
    img = load_image(path)
    try:
        region = segment_bag_region(img, _STATE["cfg"].segmentation)
    except EmptyMask as exc:
        region = exc
    return img, region


def _run_job(job):
    """Compose one image for ``job = (index, category)``; resample the pair on failure."""
    index, category = job
    cfg = _STATE["cfg"]
    benign = _STATE["benign"]
    sigs = _STATE["library"][category]
    pipeline = cfg.pipeline()
    failures = []
    for attempt in range(cfg.retries):
        seed = derive_seed(cfg.seed, index, attempt)
        rng = np.random.default_rng(seed)
        bag_index = int(rng.integers(len(benign)))
        sig = sigs[int(rng.integers(len(sigs)))]
        compose_seed = derive_seed(seed, 2)
        img, region = _bag(bag_index)
        try:
            if isinstance(region, EmptyMask):
                raise EmptyMask(f"target {benign[bag_index].name}: {region}")
            record = compose_one(img, sig, compose_seed, pipeline, region=region,
                                 target_name=benign[bag_index].name)
        except TipError as exc:
            failures.append((index, attempt, type(exc).__name__, str(exc)))
            continue
        image_id = index + 1
        file_name = f"images/{image_id:06d}.png"
        save_image(record.image, Path(cfg.out_dir) / file_name)
        h, w = record.image.shape[:2]
        provenance = dict(record.provenance)
        provenance["benign"] = benign[bag_index].name
        provenance["signature"] = Path(sig.source).name if sig.source else ""
        entry = ManifestEntry(image_id, file_name, w, h, category, tuple(record.bbox), None, provenance)
        return entry, failures
    raise ExhaustedRetries(
        f"job {index} ({category}) failed {cfg.retries} times; last error: {failures[-1][3]}"
    )


def build_dataset(cfg, jobs=1):
    """Generate ``count_per_class[c]`` composites per class and write the output tree.

    Jobs are numbered class by class in sorted class order; job ``k`` draws
    its bag, signature, angle and position from seeds derived from
    ``(cfg.seed, k, attempt)``, so the result does not depend on ``jobs``.
    Returns ``(manifest, report)``.
    """
    cfg.validate()
    requested = {c: n for c, n in sorted(cfg.count_per_class.items()) if n > 0}
    benign = list_benign_images(cfg.benign_dir) if requested else []
    if requested and not benign:
        raise ConfigError(f"no benign images in {cfg.benign_dir}")
    library = {}
    if requested:
        library = load_threat_library(cfg.threat_dir, cfg.background_threshold)
        empty = [c for c in requested if not library.get(c)]
        if empty:
            raise ConfigError(f"threat library {cfg.threat_dir} has no signatures for {empty}")
        library = {c: library[c] for c in requested}

    out = Path(cfg.out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    job_list = [(k, c) for k, c in enumerate(c for c, n in requested.items() for _ in range(n))]

    cfg_dict = cfg.to_dict()
    if jobs > 1 and len(job_list) > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(cfg_dict, benign, library)) as pool:
            results = list(pool.map(_run_job, job_list, chunksize=max(1, len(job_list) // (4 * jobs))))
    else:
        _init_worker(cfg_dict, benign, library)
        results = [_run_job(job) for job in job_list]

    report = BuildReport(requested=len(job_list))
    entries = []
    for entry, failures in results:
        entries.append(entry)
        report.failures.extend(failures)
    report.produced = len(entries)
    manifest = DatasetManifest(entries, cfg.seed, cfg_dict)

    write_coco(manifest, manifest.annotations(), out / "annotations.json")
    manifest.save(out / "manifest.json")
    (out / "build_report.txt").write_text(report.text())
    log.info("built %d images (%d retries) in %s", report.produced, len(report.failures), out)
    return manifest, report


def _largest_remainder(n, ratios):
    quotas = [Fraction(str(r)) * n for r in ratios]
    sizes = [math.floor(q) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def stratified_split(manifest, ratios=DEFAULT_RATIOS, seed=0):
    """Assign every entry to train/val/test, class by class.

    Each class is shuffled with a seed derived from ``seed`` and its rank in
    sorted class order, then cut by largest-remainder rounding of
    ``ratio * class_count``. A class smaller than the number of positive
    ratios goes wholly to train with a :class:`DegenerateClassWarning`.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLITS) or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    by_class = defaultdict(list)
    for e in manifest.entries:
        by_class[e.category].append(e.image_id)
    assignment = {}
    for rank, category in enumerate(sorted(by_class)):
        ids = sorted(by_class[category])
        positive = sum(r > 0 for r in ratios)
        if len(ids) < positive:
            warnings.warn(
                f"class {category!r} has {len(ids)} images, fewer than {positive} splits; all go to train",
                DegenerateClassWarning,
                stacklevel=2,
            )
            sizes = [len(ids), 0, 0]
        else:
            sizes = _largest_remainder(len(ids), ratios)
        order = np.random.default_rng(derive_seed(seed, rank)).permutation(len(ids))
        start = 0
        for split, size in zip(SPLITS, sizes):
            for k in order[start:start + size]:
                assignment[ids[k]] = split
            start += size
    entries = [replace(e, split=assignment[e.image_id]) for e in manifest.entries]
    config = dict(manifest.config)
    config["split"] = {"ratios": list(ratios), "seed": int(seed)}
    return DatasetManifest(entries, manifest.seed, config)


# ---------------------------------------------------------------------------
# COCO
# ---------------------------------------------------------------------------


def category_ids(names):
    """Lexicographic order, numbered from 1."""
    return {name: i for i, name in enumerate(sorted(set(names)), start=1)}


def coco_document(manifest, annotations):
    declared = list(manifest.config.get("categories", []))
    cats = category_ids(
        declared + [e.category for e in manifest.entries if e.category] + [a.category for a in annotations]
    )
    images = []
    for e in sorted(manifest.entries, key=lambda e: e.image_id):
        img = {"id": int(e.image_id), "file_name": e.file_name, "width": int(e.width), "height": int(e.height)}
        if e.split is not None:
            img["split"] = e.split
        images.append(img)
    anns = []
    for a in sorted(annotations, key=lambda a: a.annotation_id):
        x, y, w, h = (int(v) for v in a.bbox)
        anns.append({
            "id": int(a.annotation_id),
            "image_id": int(a.image_id),
            "category_id": cats[a.category],
            "bbox": [x, y, w, h],
            "area": w * h,
            "iscrowd": 0,
        })
    doc = {
        "images": images,
        "annotations": anns,
        "categories": [{"id": i, "name": n} for n, i in cats.items()],
    }
    if manifest.seed is not None:
        doc["info"] = {"description": "synthetic threat image projection dataset", "seed": int(manifest.seed)}
    return doc


def dumps_coco(doc):
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_coco(manifest, annotations, path):
    Path(path).write_text(dumps_coco(coco_document(manifest, annotations)))


def parse_coco(doc):
    """Validate a COCO ground-truth document and return ``(manifest_view, annotations)``."""
    if not isinstance(doc, dict):
        raise SchemaError("COCO document must be an object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise SchemaError(f"COCO document needs a '{key}' array")
    try:
        names = {int(c["id"]): str(c["name"]) for c in doc["categories"]}
        anns = []
        first_cat = {}
        for a in doc["annotations"]:
            bbox = a["bbox"]
            if len(bbox) != 4:
                raise SchemaError(f"annotation {a['id']}: bbox must have 4 numbers")
            cat = names[int(a["category_id"])]
            anns.append(Annotation(int(a["image_id"]), cat, tuple(int(v) for v in bbox), int(a["id"])))
            first_cat.setdefault(int(a["image_id"]), cat)
        entries = [
            ManifestEntry(
                int(im["id"]), str(im["file_name"]), int(im["width"]), int(im["height"]),
                first_cat.get(int(im["id"])), None, im.get("split"),
            )
            for im in doc["images"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed COCO document: {exc!r}") from exc
    ids = [e.image_id for e in entries]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate image ids")
    known = set(ids)
    for a in anns:
        if a.image_id not in known:
            raise SchemaError(f"annotation {a.annotation_id} references unknown image {a.image_id}")
    info = doc.get("info") or {}
    # declared categories survive even when nothing is annotated with them
    manifest = DatasetManifest(entries, info.get("seed"), {"categories": sorted(names.values())})
    return manifest, anns


def read_coco(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return parse_coco(doc)


def default_jobs():
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)

"""``tipsynth`` command line.

Exit status: 0 success, 1 domain failure (EmptyMask, NoValidPlacement, ...),
2 usage or configuration error. Diagnostics go to stderr.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .compositor import PipelineConfig, compose_one
from .dataset import (
    DEFAULT_RATIOS,
    BuildConfig,
    DatasetManifest,
    build_dataset,
    default_jobs,
    stratified_split,
    write_coco,
)
from .errors import ConfigError, SchemaError, TipError
from .evaluation import DEFAULT_IOU, evaluate
from .morphology import SegmentationParams, segmentation_stages
from .raster import load_image, save_image
from .threat import DEFAULT_BACKGROUND_THRESHOLD, build_threat_library, extract_signature

log = logging.getLogger("tipsynth")


class UsageError(Exception):
    pass


def load_config_document(path):
    """Read a YAML (or JSON) config; relative ``*_dir`` paths resolve against the file's directory."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    for key in ("benign_dir", "threat_dir", "out_dir"):
        if key in doc and not Path(str(doc[key])).is_absolute():
            doc[key] = str(path.parent / str(doc[key]))
    return doc


def _cmd_extract(args):
    n = build_threat_library(args.scan_dir, args.out_dir, args.background_threshold)
    log.info("wrote %d signatures to %s", n, args.out_dir)
    print(n)
    return 0


def _cmd_compose(args):
    doc = load_config_document(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else doc.get("seed")
    if seed is None:
        raise UsageError("compose needs --seed (or 'seed' in the config document)")
    cfg = PipelineConfig(
        alpha=args.alpha if args.alpha is not None else float(doc.get("alpha", 0.9)),
        rotation=tuple(doc.get("rotation", (0.0, 360.0))),
        segmentation=SegmentationParams.from_dict(doc.get("segmentation")),
        max_attempts=args.max_attempts or int(doc.get("max_attempts", 100)),
    )
    threshold = int(doc.get("background_threshold", args.background_threshold))
    label = args.label or Path(args.threat).parent.name
    bag = load_image(args.bag)
    sig = extract_signature(load_image(args.threat), label, threshold, source=str(args.threat))
    if args.debug_stages:
        out = Path(args.debug_stages)
        out.mkdir(parents=True, exist_ok=True)
        for k, (name, mask) in enumerate(segmentation_stages(bag, cfg.segmentation).items()):
            save_image(mask, out / f"{k}_{name}.png")
    record = compose_one(bag, sig, int(seed), cfg, target_name=str(args.bag))
    save_image(record.image, args.out)
    sidecar = args.sidecar or str(Path(args.out).with_suffix(".json"))
    Path(sidecar).write_text(record.sidecar())
    print(json.dumps({"bbox": list(record.bbox), "label": record.label}))
    return 0


def _cmd_build(args):
    doc = load_config_document(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out_dir"] = args.out
    if doc.get("seed") is None:
        raise UsageError("build needs --seed or 'seed' in the config document")
    cfg = BuildConfig.from_dict(doc)
    manifest, report = build_dataset(cfg, jobs=args.jobs or default_jobs())
    print(f"{report.produced} images, {len(report.failures)} retries -> {cfg.out_dir}")
    return 0


def _cmd_split(args):
    manifest = DatasetManifest.load(args.manifest)
    split = stratified_split(manifest, tuple(args.ratios), args.seed)
    out = Path(args.out or args.manifest)
    split.save(out)
    write_coco(split, split.annotations(), out.parent / "annotations.json")
    _print_counts(split)
    return 0


def _print_counts(manifest):
    counts = manifest.split_counts()
    print(f"{'class':<16} {'total':>6} {'train':>6} {'val':>6} {'test':>6} {'none':>6}")
    for name, per in counts.items():
        total = sum(per.values())
        cells = [per.get(s, 0) for s in ("train", "val", "test", None)]
        print(f"{name:<16} {total:>6} " + " ".join(f"{c:>6}" for c in cells))
    print(f"{'all':<16} {len(manifest.entries):>6}")


def _cmd_eval(args):
    report = evaluate(args.gt, args.dets, args.iou)
    print(report.table())
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_inspect(args):
    _print_counts(DatasetManifest.load(args.manifest))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="tipsynth", description="Threat image projection dataset tool.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="crop raw threat scans into a signature library")
    p.add_argument("scan_dir", help="directory with one subdirectory per class")
    p.add_argument("out_dir")
    p.add_argument("--background-threshold", type=int, default=DEFAULT_BACKGROUND_THRESHOLD)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("compose", help="project one threat into one bag image")
    p.add_argument("--bag", required=True)
    p.add_argument("--threat", required=True, help="threat scan or library signature")
    p.add_argument("--label", help="class name (default: the threat file's parent directory)")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--sidecar", help="provenance JSON (default: OUT with .json suffix)")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-attempts", type=int)
    p.add_argument("--background-threshold", type=int, default=DEFAULT_BACKGROUND_THRESHOLD)
    p.add_argument("--config")
    p.add_argument("--debug-stages", metavar="DIR", help="dump each segmentation stage as PNG")
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("build", help="build a dataset from a config document")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="override out_dir")
    p.add_argument("--jobs", type=int, help="worker processes (default: available processors)")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("split", help="stratified train/val/test assignment")
    p.add_argument("manifest")
    p.add_argument("--ratios", type=float, nargs=3, default=list(DEFAULT_RATIOS), metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="output manifest (default: overwrite input)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("eval", help="per-class AP and mAP of COCO detection results")
    p.add_argument("gt", help="COCO ground-truth document")
    p.add_argument("dets", help="COCO detection-results array")
    p.add_argument("--iou", type=float, default=DEFAULT_IOU)
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect", help="per-class and per-split counts of a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_inspect)
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except TipError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ConfigError, SchemaError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

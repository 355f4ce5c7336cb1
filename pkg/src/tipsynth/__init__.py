"""Synthetic X-ray threat imagery by threat image projection.

Isolated threat signatures are rotated, placed inside the segmented bag
region of a benign scan and blended in under a brightness-adaptive
threshold. Builds produce COCO ground truth, stratified splits and an
AP/mAP scorer for detections.
"""
from ._accel import BACKEND
from .compositor import CompositeRecord, PipelineConfig, composite, compose_one, mean_insertion_intensity, threat_threshold
from .dataset import BuildConfig, DatasetManifest, build_dataset, read_coco, stratified_split, write_coco
from .evaluation import EvalReport, average_precision, evaluate, iou
from .morphology import SegmentationParams, StructuringElement, segment_bag_region
from .placement import Placement, insertion_mask, sample_placement
from .raster import load_image, save_image, to_grayscale
from .threat import ThreatSignature, extract_signature, rotate_signature

__version__ = "0.1.0"

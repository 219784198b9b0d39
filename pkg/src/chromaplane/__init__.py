"""Operator-trained color segmentation of scanned documents.

Train a small named color model on a handful of windows, then split whole
batches of pages into per-class color planes, flagging documents whose
colors fall outside the model.
"""

from .colorlab import LabColor, Rgb8, delta_e, lab_to_srgb, srgb_to_lab
from .cluster import (ClusterConfig, ClusterResult, PointSet, cluster_window,
                      estimate_radius, kmeans_pp_init, lloyd)
from .model import (ColorClass, ColorModel, UNKNOWN_LABEL, WindowProvenance,
                    add_training_window, deserialize, fingerprint, merge_centroids,
                    new_model, serialize, validate_model)
from .raster import Image, load_image
from .segment import (LabelMap, NoveltyVerdict, SegmentOptions, SegmentationResult,
                      classify_pixel, extract_plane, novelty_report, segment_image,
                      smooth_labels)
from .pipeline import (BatchReport, Manifest, load_manifest, route_flagged,
                       run_batch, train_from_project)
from .synth import (DegradationSpec, PageSpec, degrade, generate_document, score)

__version__ = "0.1.0"

__all__ = [
    "LabColor", "Rgb8", "delta_e", "lab_to_srgb", "srgb_to_lab",
    "ClusterConfig", "ClusterResult", "PointSet", "cluster_window",
    "estimate_radius", "kmeans_pp_init", "lloyd",
    "ColorClass", "ColorModel", "UNKNOWN_LABEL", "WindowProvenance",
    "add_training_window", "deserialize", "fingerprint", "merge_centroids",
    "new_model", "serialize", "validate_model",
    "Image", "load_image",
    "LabelMap", "NoveltyVerdict", "SegmentOptions", "SegmentationResult",
    "classify_pixel", "extract_plane", "novelty_report", "segment_image",
    "smooth_labels",
    "BatchReport", "Manifest", "load_manifest", "route_flagged", "run_batch",
    "train_from_project",
    "DegradationSpec", "PageSpec", "degrade", "generate_document", "score",
]

"""Shared fixtures: a 4-class synthetic page family and operator-style training.

The page mimics an administrative scan: gradient paper background, a block
of dark text strokes, a red stamp disc, and yellow highlight bars with text
over them. Training emulates the operator loop: cluster a window, then name
each swatch after the nearest known reference color.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from chromaplane.cluster import ClusterConfig, PointSet, cluster_window
from chromaplane.colorlab import LabColor, Rgb8, delta_e, srgb_to_lab, srgb_to_lab_array
from chromaplane.model import ColorModel, WindowProvenance, add_training_window, new_model
from chromaplane.raster import Image, save_png
from chromaplane.synth import Background, DegradationSpec, Element, PageSpec, degrade, \
    generate_document, with_seed

BASE_SEED = 4200
CORPUS_SIZE = 20
NOVEL_IDS = frozenset({2, 5, 9, 13, 17})

PALETTE = {
    "background_top": (244, 242, 236),
    "background_bottom": (214, 212, 206),
    "printed_text": (38, 38, 46),
    "rubber_stamp": (186, 34, 42),
    "highlight": (248, 222, 62),
}
NOVEL_COLOR = (20, 150, 70)

# (rect, declared k, labels the window is expected to contain)
TRAIN_WINDOWS = [
    ((10, 10, 60, 1380), 2, frozenset({"background"})),
    ((300, 900, 300, 200), 2, frozenset({"background", "printed_text"})),
    ((690, 50, 200, 200), 2, frozenset({"background", "rubber_stamp"})),
    ((150, 420, 400, 70), 3, frozenset({"background", "printed_text", "highlight"})),
]

REFERENCE_LABS = {
    "background": srgb_to_lab(Rgb8(229, 227, 221)),
    "printed_text": srgb_to_lab(Rgb8(*PALETTE["printed_text"])),
    "rubber_stamp": srgb_to_lab(Rgb8(*PALETTE["rubber_stamp"])),
    "highlight": srgb_to_lab(Rgb8(*PALETTE["highlight"])),
}


def four_class_template(novel: bool = False, seed: int = BASE_SEED) -> PageSpec:
    elements = [
        Element("rect", "highlight", PALETTE["highlight"], rect=(120, 430, 620, 46)),
        Element("rect", "highlight", PALETTE["highlight"], rect=(120, 700, 520, 46)),
        Element("disc", "rubber_stamp", PALETTE["rubber_stamp"], center=(790, 150), radius=85),
        Element("strokes", "printed_text", PALETTE["printed_text"],
                rect=(80, 240, 840, 980), count=300, thickness=3, length=(18, 55)),
    ]
    if novel:
        elements.append(Element("rect", "novel_mark", NOVEL_COLOR, rect=(520, 1040, 180, 170)))
    return PageSpec(1000, 1400,
                    Background(PALETTE["background_top"], PALETTE["background_bottom"]),
                    tuple(elements), seed=seed)


def assign_by_nearest(centroids: np.ndarray, allowed: frozenset[str]) -> dict[int, str]:
    """Name each centroid after the nearest reference color, operator-style."""
    asg = {}
    for j in range(centroids.shape[0]):
        c = LabColor(*(float(v) for v in centroids[j]))
        asg[j] = min(allowed, key=lambda lbl: delta_e(c, REFERENCE_LABS[lbl]))
    return asg


def train_on_image(img: Image, doc_id: str = "p000",
                   cfg: ClusterConfig = ClusterConfig()) -> ColorModel:
    m = new_model(cfg)
    for i, (rect, k, allowed) in enumerate(TRAIN_WINDOWS):
        x, y, w, h = rect
        pts = PointSet(srgb_to_lab_array(img.pixels[y:y + h, x:x + w].reshape(-1, 3)))
        seed = 100 + i
        cr = cluster_window(pts, k, seed, cfg)
        asg = assign_by_nearest(cr.centroids, allowed)
        if set(asg.values()) != set(allowed):
            raise AssertionError(
                f"window {i} produced labels {set(asg.values())}, expected {set(allowed)}")
        m = add_training_window(m, WindowProvenance(doc_id, rect, k, seed), cr, asg)
    return m


DEGRADATION = DegradationSpec(gaussian_sigma=5.0, jpeg_quality=75)


def degrade_page(img: Image, page_seed: int) -> Image:
    return degrade(img, replace(DEGRADATION, seed=page_seed))


@pytest.fixture(scope="session")
def clean_pages():
    pages = []
    for i in range(CORPUS_SIZE):
        pages.append(generate_document(with_seed(four_class_template(), BASE_SEED + i)))
    return pages


@pytest.fixture(scope="session")
def clean_model(clean_pages):
    return train_on_image(clean_pages[0][0])


@pytest.fixture(scope="session")
def degraded_pages(clean_pages):
    return [(degrade_page(img, BASE_SEED + i), truth)
            for i, (img, truth) in enumerate(clean_pages)]


@pytest.fixture(scope="session")
def degraded_model(degraded_pages):
    return train_on_image(degraded_pages[0][0])


@pytest.fixture(scope="session")
def novel_corpus_dir(tmp_path_factory, clean_pages):
    """20 clean pages on disk, 5 of which carry the novel-color mark."""
    root = tmp_path_factory.mktemp("novel-corpus")
    for i in range(CORPUS_SIZE):
        if i in NOVEL_IDS:
            img, _ = generate_document(with_seed(four_class_template(novel=True), BASE_SEED + i))
        else:
            img = clean_pages[i][0]
        save_png(img, root / f"p{i:03d}.png")
    return root

"""Shared fixtures: tiny deterministic source corpora rendered to disk."""

from __future__ import annotations

import csv
import random
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from docsynth.annot_io import CLASS_ORDER

PAGE_W, PAGE_H = 900, 700


def element_pattern(width, height, tag):
    """Deterministic, structured pixel content so crops are distinguishable."""
    rng = random.Random(tag)
    base = np.full((height, width, 3), rng.randrange(40, 200), dtype=np.uint8)
    base[:, :, 1] = rng.randrange(0, 255)
    base[::4, :, 2] = rng.randrange(0, 255)  # horizontal stripes
    base[0, :, :] = 10  # dark border rows make off-by-one slips visible
    base[-1, :, :] = 10
    return base


def build_corpus(root: Path, crops_per_class=4, seed=7, page_w=PAGE_W, page_h=PAGE_H,
                 size_range=((60, 200), (30, 120))):
    """Write a manifest + images with crops_per_class elements per class.

    Elements are laid out on pages in non-overlapping rows; sizes vary
    deterministically within size_range ((w_lo, w_hi), (h_lo, h_hi)).
    Returns the manifest path (images sit alongside it).
    """
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    pending = [
        (cls, rng.randint(*size_range[0]), rng.randint(*size_range[1]))
        for cls in CLASS_ORDER
        for _ in range(crops_per_class)
    ]
    rng.shuffle(pending)

    rows = []
    page_idx = 0
    while pending:
        name = f"src_{page_idx:03d}.png"
        raster = np.full((page_h, page_w, 3), 245, dtype=np.uint8)
        x, y, row_h = 10, 10, 0
        while pending:
            cls, w, h = pending[0]
            if x + w > page_w - 10:
                x, y, row_h = 10, y + row_h + 8, 0
            if y + h > page_h - 10:
                break
            pending.pop(0)
            tag = f"{page_idx}:{len(rows)}"
            raster[y:y + h, x:x + w] = element_pattern(w, h, tag)
            rows.append([name, page_w, page_h, cls.value, x, y, x + w, y + h])
            x += w + 8
            row_h = max(row_h, h)
        Image.fromarray(raster).save(root / name)
        page_idx += 1

    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "image_path", "image_width", "image_height", "class_label",
            "x_min", "y_min", "x_max", "y_max",
        ])
        writer.writerows(rows)
    return manifest


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    build_corpus(root, crops_per_class=4)
    return root


@pytest.fixture(scope="session")
def corpus_manifest(corpus_dir):
    return corpus_dir / "manifest.csv"


@pytest.fixture(scope="session")
def big_corpus_dir(tmp_path_factory):
    """Corpus with 20+ crops per class, for distribution-level tests."""
    root = tmp_path_factory.mktemp("big_corpus")
    build_corpus(root, crops_per_class=24, seed=11)
    return root

"""Toy source corpus used by the demo scripts.

Draws document-looking pages (line-pattern text blocks, dark title bars,
bulleted lists, grid tables, framed figures) and writes the matching
manifest CSV, so every demo is runnable without any external data.
"""

from __future__ import annotations

import csv
import random
from pathlib import Path

import numpy as np
from PIL import Image

from docsynth import CLASS_ORDER, LayoutClass

PAGE_W, PAGE_H = 1000, 760


def draw_element(cls: LayoutClass, w: int, h: int, rng: random.Random) -> np.ndarray:
    block = np.full((h, w, 3), 255, dtype=np.uint8)
    ink = rng.randint(20, 90)
    if cls is LayoutClass.TEXT:
        for y in range(4, h - 2, 7):  # ruled lines of "text"
            block[y:y + 3, 3:w - rng.randint(3, max(4, w // 4))] = ink
    elif cls is LayoutClass.TITLE:
        block[h // 4: 3 * h // 4, 2:w - 2] = ink
    elif cls is LayoutClass.LIST:
        for y in range(4, h - 4, 11):
            block[y:y + 4, 4:10] = ink  # bullet
            block[y:y + 3, 14:w - rng.randint(4, max(5, w // 3))] = ink + 60
    elif cls is LayoutClass.TABLE:
        block[2:h - 2, 2:w - 2] = 240
        for y in range(2, h - 2, max(6, h // 6)):
            block[y:y + 1, 2:w - 2] = ink
        for x in range(2, w - 2, max(8, w // 5)):
            block[2:h - 2, x:x + 1] = ink
    else:  # FIGURE
        block[:, :] = (180, 205, 230)
        block[:3, :] = block[-3:, :] = 60
        block[:, :3] = block[:, -3:] = 60
    return block


def make_toy_corpus(root: Path, elements_per_class: int = 24, seed: int = 5) -> Path:
    """Render source pages + manifest under root; returns the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    size_by_class = {
        LayoutClass.TEXT: ((180, 420), (60, 160)),
        LayoutClass.TITLE: ((200, 500), (24, 48)),
        LayoutClass.LIST: ((160, 300), (70, 160)),
        LayoutClass.TABLE: ((220, 460), (90, 200)),
        LayoutClass.FIGURE: ((160, 380), (110, 240)),
    }
    pending = []
    for cls in CLASS_ORDER:
        (w_lo, w_hi), (h_lo, h_hi) = size_by_class[cls]
        pending += [(cls, rng.randint(w_lo, w_hi), rng.randint(h_lo, h_hi))
                    for _ in range(elements_per_class)]
    rng.shuffle(pending)

    rows = []
    page_idx = 0
    while pending:
        raster = np.full((PAGE_H, PAGE_W, 3), 255, dtype=np.uint8)
        name = f"source_{page_idx:03d}.png"
        x, y, row_h = 12, 12, 0
        while pending:
            cls, w, h = pending[0]
            if x + w > PAGE_W - 12:
                x, y, row_h = 12, y + row_h + 10, 0
            if y + h > PAGE_H - 12:
                break
            pending.pop(0)
            raster[y:y + h, x:x + w] = draw_element(cls, w, h, rng)
            rows.append([name, PAGE_W, PAGE_H, cls.value, x, y, x + w, y + h])
            x += w + 10
            row_h = max(row_h, h)
        Image.fromarray(raster).save(root / name)
        page_idx += 1

    manifest = root / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_path", "image_width", "image_height", "class_label",
                         "x_min", "y_min", "x_max", "y_max"])
        writer.writerows(rows)
    print(f"toy corpus: {page_idx} source pages, {len(rows)} elements -> {root}")
    return manifest

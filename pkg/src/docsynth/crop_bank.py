"""Extract labeled element crops from source pages and sample from them.

The bank keeps one RGB raster per extracted element, indexed by class, with
provenance back to the source page. Extraction never resamples pixels; any
scaling is the composer's business. Sampling is with replacement so an
arbitrarily large output corpus can be generated from a small source.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .annot_io import CLASS_ORDER, Dataset, LayoutClass
from .errors import DimensionMismatch, EmptyClass, ImageUnreadable, MalformedFile
from .geometry import BBox
from .rng import SplitMix64

# Elements smaller than this (either side, in px) are skipped at extraction.
DEFAULT_MIN_CROP_PX = 8

BANK_CACHE_VERSION = 1


@dataclass(frozen=True, eq=False)  # identity equality: pixels are arrays
class Crop:
    """One extracted element: pixels, class, and where it came from."""

    pixels: np.ndarray  # uint8, height x width x 3
    label: LayoutClass
    source_image: str
    source_bbox: BBox
    # Inner boxes for whole-page crops: (bbox relative to crop origin, class).
    sub_elements: tuple[tuple[BBox, LayoutClass], ...] | None = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass
class CropBank:
    """Class-indexed store of crops plus per-class skip tallies."""

    crops: dict[LayoutClass, list[Crop]] = field(
        default_factory=lambda: {c: [] for c in CLASS_ORDER}
    )
    skipped: dict[LayoutClass, int] = field(
        default_factory=lambda: {c: 0 for c in CLASS_ORDER}
    )

    def counts(self) -> dict[LayoutClass, int]:
        return {c: len(self.crops[c]) for c in CLASS_ORDER}

    def total(self) -> int:
        return sum(len(v) for v in self.crops.values())

    def classes_with_crops(self) -> list[LayoutClass]:
        return [c for c in CLASS_ORDER if self.crops[c]]


class ClassWeights:
    """Per-class sampling weights in the fixed class order, summing to 1."""

    def __init__(self, weights: dict[LayoutClass, float]):
        vals = [float(weights.get(c, 0.0)) for c in CLASS_ORDER]
        if any(v < 0 for v in vals):
            raise ValueError(f"negative class weight in {weights}")
        total = sum(vals)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"class weights must sum to 1, got {total}")
        self._weights = dict(zip(CLASS_ORDER, vals))

    @classmethod
    def normalized(cls, weights: dict[LayoutClass, float]) -> "ClassWeights":
        total = sum(float(v) for v in weights.values())
        if total <= 0:
            raise ValueError(f"class weights must have positive mass: {weights}")
        return cls({k: float(v) / total for k, v in weights.items()})

    @classmethod
    def from_counts(cls, counts: dict[LayoutClass, int]) -> "ClassWeights":
        return cls.normalized({k: float(v) for k, v in counts.items()})

    def __getitem__(self, c: LayoutClass) -> float:
        return self._weights[c]

    def as_dict(self) -> dict[LayoutClass, float]:
        return dict(self._weights)

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(self._weights[c] for c in CLASS_ORDER)

    def __eq__(self, other):
        return isinstance(other, ClassWeights) and self._weights == other._weights

    def __repr__(self):
        inner = ", ".join(f"{c.value}={w:.6g}" for c, w in self._weights.items())
        return f"ClassWeights({inner})"


# Default sampling weights: relative class frequencies of the reference
# synthetic corpus this generator models (counts per class).
REFERENCE_CLASS_COUNTS: dict[LayoutClass, int] = {
    LayoutClass.TEXT: 95_227,
    LayoutClass.TITLE: 45_306,
    LayoutClass.LIST: 23_090,
    LayoutClass.TABLE: 22_146,
    LayoutClass.FIGURE: 23_493,
}

DEFAULT_CLASS_WEIGHTS = ClassWeights.from_counts(REFERENCE_CLASS_COUNTS)


def round_half_up(v: float) -> int:
    """Round to nearest integer with .5 going up; used for rasterization."""
    return int(np.floor(v + 0.5))


def build_bank(
    dataset: Dataset,
    image_root,
    min_crop_px: int = DEFAULT_MIN_CROP_PX,
    whole_pages: bool = False,
) -> CropBank:
    """Extract one crop per element (or one per page with whole_pages).

    Elements smaller than min_crop_px on either side are counted in
    ``bank.skipped`` instead of stored. Source rasters must match their
    annotated dimensions exactly.

    With whole_pages=True each source page becomes a single crop carrying all
    its element boxes; its sampling class is the page's most frequent element
    class (ties broken by the fixed class order).
    """
    image_root = Path(image_root)
    bank = CropBank()
    for page in dataset.pages:
        path = image_root / page.image_path
        try:
            with Image.open(path) as img:
                raster = np.asarray(img.convert("RGB"))
        except (OSError, ValueError) as exc:
            raise ImageUnreadable(f"cannot read source image: {exc}", path=path)
        actual_h, actual_w = raster.shape[:2]
        if (actual_w, actual_h) != (page.width, page.height):
            raise DimensionMismatch(
                f"annotations say {page.width}x{page.height} but raster is "
                f"{actual_w}x{actual_h}", path=path,
            )
        if whole_pages:
            if not page.elements:
                continue
            tally = {c: 0 for c in CLASS_ORDER}
            for el in page.elements:
                tally[el.label] += 1
            label = max(CLASS_ORDER, key=lambda c: (tally[c], -CLASS_ORDER.index(c)))
            bank.crops[label].append(Crop(
                pixels=raster.copy(),
                label=label,
                source_image=page.image_path,
                source_bbox=BBox(0, 0, page.width, page.height),
                sub_elements=tuple((el.bbox, el.label) for el in page.elements),
            ))
            continue
        for el in page.elements:
            x0 = round_half_up(el.bbox.x_min)
            y0 = round_half_up(el.bbox.y_min)
            w = round_half_up(el.bbox.width)
            h = round_half_up(el.bbox.height)
            if w < min_crop_px or h < min_crop_px:
                bank.skipped[el.label] += 1
                continue
            # Border boxes can round one pixel past the raster; shift back in.
            x0 = min(x0, actual_w - w)
            y0 = min(y0, actual_h - h)
            pixels = raster[y0:y0 + h, x0:x0 + w].copy()
            bank.crops[el.label].append(Crop(
                pixels=pixels,
                label=el.label,
                source_image=page.image_path,
                source_bbox=el.bbox,
            ))
    return bank


def sample_class(weights: ClassWeights, rng: SplitMix64) -> LayoutClass:
    """Draw a class by inverse CDF over the fixed class order."""
    u = rng.random()
    acc = 0.0
    last_positive = None
    for cls in CLASS_ORDER:
        w = weights[cls]
        if w <= 0:
            continue
        acc += w
        last_positive = cls
        if u < acc:
            return cls
    # float slop can leave acc a hair under 1; the draw lands on the last
    # positive-weight class.
    if last_positive is None:
        raise ValueError("all class weights are zero")
    return last_positive


def sample_crop(bank: CropBank, cls: LayoutClass, rng: SplitMix64) -> Crop:
    """Uniform draw with replacement from the class's crop list."""
    crops = bank.crops[cls]
    if not crops:
        raise EmptyClass(f"no crops available for class {cls.value!r}")
    return crops[rng.randbelow(len(crops))]


# on-disk cache ----------------------------------------------------------------

def save_bank(bank: CropBank, out_dir) -> None:
    """Persist the bank: one PNG per crop plus a versioned JSON index."""
    out_dir = Path(out_dir)
    crops_dir = out_dir / "crops"
    crops_dir.mkdir(parents=True, exist_ok=True)
    index = {
        "version": BANK_CACHE_VERSION,
        "skipped": {c.value: bank.skipped[c] for c in CLASS_ORDER},
        "crops": [],
    }
    for cls in CLASS_ORDER:
        for i, crop in enumerate(bank.crops[cls]):
            name = f"{cls.value}_{i:06d}.png"
            Image.fromarray(crop.pixels).save(crops_dir / name)
            entry = {
                "file": f"crops/{name}",
                "class": cls.value,
                "source_image": crop.source_image,
                "source_bbox": list(crop.source_bbox.as_tuple()),
            }
            if crop.sub_elements is not None:
                entry["sub_elements"] = [
                    {"bbox": list(b.as_tuple()), "class": c.value}
                    for b, c in crop.sub_elements
                ]
            index["crops"].append(entry)
    with open(out_dir / "index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")


def load_bank(bank_dir) -> CropBank:
    """Load a bank previously written by save_bank."""
    bank_dir = Path(bank_dir)
    index_path = bank_dir / "index.json"
    try:
        with open(index_path, encoding="utf-8") as fh:
            index = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot read bank index: {exc}", path=index_path)
    if index.get("version") != BANK_CACHE_VERSION:
        raise MalformedFile(
            f"unsupported bank cache version {index.get('version')!r} "
            f"(expected {BANK_CACHE_VERSION})", path=index_path,
        )
    bank = CropBank()
    for c in CLASS_ORDER:
        bank.skipped[c] = int(index.get("skipped", {}).get(c.value, 0))
    for entry in index["crops"]:
        cls = LayoutClass(entry["class"])
        with Image.open(bank_dir / entry["file"]) as img:
            pixels = np.asarray(img.convert("RGB")).copy()
        sub = None
        if "sub_elements" in entry:
            sub = tuple(
                (BBox(*se["bbox"]), LayoutClass(se["class"]))
                for se in entry["sub_elements"]
            )
        bank.crops[cls].append(Crop(
            pixels=pixels,
            label=cls,
            source_image=entry["source_image"],
            source_bbox=BBox(*entry["source_bbox"]),
            sub_elements=sub,
        ))
    return bank

"""Page composition: shelf placement, rendering and label-noise injection.

Placement fills a blank canvas in rows: a cursor starts at the page margin,
sampled crops are laid left-to-right separated by the configured gap, and a
crop that no longer fits closes the row and retries at the next one. Placed
boxes therefore never overlap and never leave the margin-inset rectangle,
which the emitted annotations inherit.

Every random decision flows from a per-page seed derived from the master
seed, so page N's bytes do not depend on which other pages were generated or
on how many workers ran.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from PIL import Image

from .annot_io import (
    CLASS_ORDER,
    DEFAULT_CLASS_MAP,
    AnnotatedPage,
    Dataset,
    LayoutClass,
    LayoutElement,
    format_yolo_line,
    write_coco,
)
from .crop_bank import (
    DEFAULT_CLASS_WEIGHTS,
    DEFAULT_MIN_CROP_PX,
    ClassWeights,
    Crop,
    CropBank,
    round_half_up,
    sample_class,
)
from .errors import ConfigError, EmptyClass, UnplaceableConfig
from .geometry import BBox, to_yolo
from .rng import SplitMix64, derive_seed
from .stats import class_distribution

REPORT_VERSION = 1
CONFIG_VERSION = 1


def seed_derive(master_seed: int, page_index: int) -> int:
    """Per-page 64-bit seed; see rng.py for the frozen derivation."""
    return derive_seed(master_seed, page_index)


@dataclass(frozen=True)
class NoiseConfig:
    """Label corruption applied after rendering (both default to off)."""

    class_flip_prob: float = 0.0
    bbox_jitter_px: float = 0.0

    def __post_init__(self):
        if not 0 <= self.class_flip_prob <= 1:
            raise ValueError(f"class_flip_prob outside [0, 1]: {self.class_flip_prob}")
        if self.bbox_jitter_px < 0:
            raise ValueError(f"negative bbox_jitter_px: {self.bbox_jitter_px}")

    @property
    def active(self) -> bool:
        return self.class_flip_prob > 0 or self.bbox_jitter_px > 0


@dataclass(frozen=True)
class GenConfig:
    """All generation parameters; defaults give a portrait letter-like page."""

    canvas_w: int = 1224
    canvas_h: int = 1584
    gap: int = 10
    margin: int = 20
    max_elements_per_page: int = 30
    max_rejections: int = 50
    scale_to_fit: bool = True
    class_weights: ClassWeights = DEFAULT_CLASS_WEIGHTS
    page_count: int = 1
    master_seed: int = 0
    noise: NoiseConfig = NoiseConfig()

    def __post_init__(self):
        if self.gap < 0 or self.margin < 0:
            raise ValueError("gap and margin must be >= 0")
        if self.max_elements_per_page < 1 or self.max_rejections < 1:
            raise ValueError("max_elements_per_page and max_rejections must be >= 1")
        if self.page_count < 1:
            raise ValueError("page_count must be >= 1")
        # The canvas must fit at least a minimum-size crop inside the margins.
        if self.canvas_w <= 2 * self.margin + DEFAULT_MIN_CROP_PX:
            raise ValueError(
                f"canvas_w {self.canvas_w} leaves no usable width at margin {self.margin}"
            )
        if self.canvas_h <= 2 * self.margin + DEFAULT_MIN_CROP_PX:
            raise ValueError(
                f"canvas_h {self.canvas_h} leaves no usable height at margin {self.margin}"
            )

    def to_dict(self) -> dict:
        return {
            "canvas_w": self.canvas_w,
            "canvas_h": self.canvas_h,
            "gap": self.gap,
            "margin": self.margin,
            "max_elements_per_page": self.max_elements_per_page,
            "max_rejections": self.max_rejections,
            "scale_to_fit": self.scale_to_fit,
            "class_weights": {c.value: w for c, w in self.class_weights.as_dict().items()},
            "page_count": self.page_count,
            "master_seed": self.master_seed,
            "noise": {
                "class_flip_prob": self.noise.class_flip_prob,
                "bbox_jitter_px": self.noise.bbox_jitter_px,
            },
        }


@dataclass(frozen=True)
class Placement:
    """One crop placed on the canvas; target is integer-aligned."""

    crop_class: LayoutClass
    crop_index: int
    target: BBox
    scale: float = 1.0


@dataclass
class PlacementPlan:
    page_index: int
    page_seed: int
    placements: list[Placement] = field(default_factory=list)
    total_rejections: int = 0
    stop_reason: str = ""  # max_elements | max_rejections | vertical_exhausted


def _scaled_dims(crop: Crop, cfg: GenConfig) -> tuple[int, int, float]:
    """Target (w, h, scale) for a crop: downscale to the usable width when
    allowed and needed, aspect preserved, height rounded half-up."""
    usable_w = cfg.canvas_w - 2 * cfg.margin
    if cfg.scale_to_fit and crop.width > usable_w:
        scale = usable_w / crop.width
        return usable_w, max(1, round_half_up(crop.height * scale)), scale
    return crop.width, crop.height, 1.0


def smart_plot(
    bank: CropBank,
    cfg: GenConfig,
    page_seed: int,
    page_index: int = 0,
    rng: SplitMix64 | None = None,
) -> PlacementPlan:
    """Plan one page of shelf placements.

    Repeatedly samples a class (by weight) then a crop (uniform). A crop is
    placed at the cursor when it fits in the current row; otherwise the row
    closes (cursor drops by row height + gap) and the crop retries at the
    fresh row. A crop that fits nowhere counts as a rejection. The plan ends
    at max_elements_per_page placements, after max_rejections consecutive
    rejections, or when no further row can open above the bottom margin.
    """
    for cls in CLASS_ORDER:
        if cfg.class_weights[cls] > 0 and not bank.crops[cls]:
            raise EmptyClass(
                f"class {cls.value!r} has weight {cfg.class_weights[cls]} but no crops"
            )
    limit_x = cfg.canvas_w - cfg.margin
    limit_y = cfg.canvas_h - cfg.margin
    if not any(
        _scaled_dims(crop, cfg)[0] <= limit_x - cfg.margin
        and _scaled_dims(crop, cfg)[1] <= limit_y - cfg.margin
        for cls in CLASS_ORDER
        if cfg.class_weights[cls] > 0
        for crop in bank.crops[cls]
    ):
        raise UnplaceableConfig(
            "no crop of any positive-weight class fits an empty canvas "
            f"({cfg.canvas_w}x{cfg.canvas_h}, margin {cfg.margin})"
        )

    rng = rng if rng is not None else SplitMix64(page_seed)
    plan = PlacementPlan(page_index=page_index, page_seed=page_seed)
    x = y = float(cfg.margin)
    row_h = 0.0
    consecutive_rejections = 0

    while True:
        if len(plan.placements) >= cfg.max_elements_per_page:
            plan.stop_reason = "max_elements"
            break
        if consecutive_rejections >= cfg.max_rejections:
            plan.stop_reason = "max_rejections"
            break
        if y >= limit_y:
            plan.stop_reason = "vertical_exhausted"
            break

        cls = sample_class(cfg.class_weights, rng)
        crop_index = rng.randbelow(len(bank.crops[cls]))
        crop = bank.crops[cls][crop_index]
        w, h, scale = _scaled_dims(crop, cfg)

        if not (x + w <= limit_x and y + h <= limit_y) and row_h > 0:
            # Close the (non-empty) row and retry at the fresh one.
            y += row_h + cfg.gap
            x = float(cfg.margin)
            row_h = 0.0
        if x + w <= limit_x and y + h <= limit_y:
            plan.placements.append(Placement(
                crop_class=cls,
                crop_index=crop_index,
                target=BBox(x, y, x + w, y + h),
                scale=scale,
            ))
            x += w + cfg.gap
            row_h = max(row_h, float(h))
            consecutive_rejections = 0
        else:
            consecutive_rejections += 1
            plan.total_rejections += 1
    return plan


def render(plan: PlacementPlan, bank: CropBank, cfg: GenConfig):
    """Paste the planned crops onto a white canvas.

    Returns (PIL image, elements). Crops needing scaling are resampled
    bilinearly. Plain crops emit one element each; whole-page crops emit one
    element per inner box, remapped into the placement target.
    """
    canvas = Image.new("RGB", (cfg.canvas_w, cfg.canvas_h), (255, 255, 255))
    elements: list[LayoutElement] = []
    for pl in plan.placements:
        crop = bank.crops[pl.crop_class][pl.crop_index]
        x0, y0 = int(pl.target.x_min), int(pl.target.y_min)
        tw, th = int(pl.target.width), int(pl.target.height)
        img = Image.fromarray(crop.pixels)
        if (tw, th) != (crop.width, crop.height):
            img = img.resize((tw, th), Image.BILINEAR)
        canvas.paste(img, (x0, y0))
        if crop.sub_elements is None:
            elements.append(LayoutElement(
                bbox=pl.target,
                label=pl.crop_class,
                source_ref=(crop.source_image, crop.source_bbox),
            ))
        else:
            sx = pl.target.width / crop.width
            sy = pl.target.height / crop.height
            for rel_box, sub_cls in crop.sub_elements:
                elements.append(LayoutElement(
                    bbox=BBox(
                        pl.target.x_min + rel_box.x_min * sx,
                        pl.target.y_min + rel_box.y_min * sy,
                        pl.target.x_min + rel_box.x_max * sx,
                        pl.target.y_min + rel_box.y_max * sy,
                    ),
                    label=sub_cls,
                    source_ref=(crop.source_image, rel_box),
                ))
    return canvas, elements


def inject_label_noise(
    elements: list[LayoutElement],
    noise: NoiseConfig,
    rng: SplitMix64,
    canvas_w: int,
    canvas_h: int,
) -> list[LayoutElement]:
    """Corrupt labels for robustness experiments.

    Per element, independently: with class_flip_prob the label becomes a
    uniformly random different class; with positive bbox_jitter_px every
    corner shifts by uniform +/- jitter and is clamped to the canvas. A
    jitter draw that would invert the box is redrawn up to 10 times, then
    skipped. Inactive noise returns the input unchanged.
    """
    if not noise.active:
        return list(elements)
    out: list[LayoutElement] = []
    for el in elements:
        label = el.label
        if noise.class_flip_prob > 0 and rng.random() < noise.class_flip_prob:
            others = [c for c in CLASS_ORDER if c != label]
            label = others[rng.randbelow(len(others))]
        bbox = el.bbox
        if noise.bbox_jitter_px > 0:
            j = noise.bbox_jitter_px
            for _ in range(10):
                cand = (
                    min(max(bbox.x_min + rng.uniform(-j, j), 0.0), float(canvas_w)),
                    min(max(bbox.y_min + rng.uniform(-j, j), 0.0), float(canvas_h)),
                    min(max(bbox.x_max + rng.uniform(-j, j), 0.0), float(canvas_w)),
                    min(max(bbox.y_max + rng.uniform(-j, j), 0.0), float(canvas_h)),
                )
                if cand[0] < cand[2] and cand[1] < cand[3]:
                    bbox = BBox(*cand)
                    break
        out.append(replace(el, bbox=bbox, label=label))
    return out


# end-to-end generation ---------------------------------------------------------

def _generate_page(bank: CropBank, cfg: GenConfig, page_index: int, out_dir: Path):
    page_seed = seed_derive(cfg.master_seed, page_index)
    rng = SplitMix64(page_seed)
    plan = smart_plot(bank, cfg, page_seed, page_index=page_index, rng=rng)
    image, elements = render(plan, bank, cfg)
    # Tally what was actually composed, before any label noise touches it.
    placed_counts = {c: 0 for c in CLASS_ORDER}
    for el in elements:
        placed_counts[el.label] += 1
    if cfg.noise.active:
        elements = inject_label_noise(elements, cfg.noise, rng, cfg.canvas_w, cfg.canvas_h)

    name = f"page_{page_index:06d}"
    image.save(out_dir / "images" / f"{name}.png")
    lines = [
        format_yolo_line(to_yolo(el.bbox, DEFAULT_CLASS_MAP[el.label], cfg.canvas_w, cfg.canvas_h))
        for el in elements
    ]
    (out_dir / "labels" / f"{name}.txt").write_text("".join(lines), encoding="utf-8")

    page = AnnotatedPage(
        image_path=f"{name}.png",
        width=cfg.canvas_w,
        height=cfg.canvas_h,
        elements=elements,
    )
    return page, plan, placed_counts


def generate_dataset(
    bank: CropBank,
    cfg: GenConfig,
    out_dir,
    write_coco_file: bool = False,
    workers: int = 1,
) -> tuple[Dataset, dict]:
    """Generate cfg.page_count pages into out_dir and return (dataset, report).

    Output layout: images/page_NNNNNN.png, labels/page_NNNNNN.txt, report.json
    and optionally annotations.json. Pages are independent, so the result is
    byte-identical for any worker count.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)

    indices = range(cfg.page_count)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda i: _generate_page(bank, cfg, i, out_dir), indices
            ))
    else:
        results = [_generate_page(bank, cfg, i, out_dir) for i in indices]

    dataset = Dataset(pages=[page for page, _, _ in results])
    plans = [plan for _, plan, _ in results]
    if write_coco_file:
        write_coco(dataset, out_dir / "annotations.json")

    stats = class_distribution(dataset)
    stop_reasons = {"max_elements": 0, "max_rejections": 0, "vertical_exhausted": 0}
    for plan in plans:
        stop_reasons[plan.stop_reason] += 1
    placed_totals = {c.value: 0 for c in CLASS_ORDER}
    for _, _, placed in results:
        for c, n in placed.items():
            placed_totals[c.value] += n
    report = {
        "version": REPORT_VERSION,
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "stats": stats.to_dict(),
        "placements": {
            "per_class": placed_totals,
            "total": sum(placed_totals.values()),
        },
        "rejections": {
            "total": sum(p.total_rejections for p in plans),
            "pages_by_stop_reason": stop_reasons,
        },
    }
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return dataset, report


# config file --------------------------------------------------------------------

_CONFIG_FIELDS = {
    "canvas_w": int,
    "canvas_h": int,
    "gap": int,
    "margin": int,
    "max_elements_per_page": int,
    "max_rejections": int,
    "scale_to_fit": bool,
    "class_weights": "weights",
    "page_count": int,
    "master_seed": int,
    "noise_class_flip_prob": float,
    "noise_bbox_jitter_px": float,
}


def _parse_bool(raw: str, key: str, path) -> bool:
    if raw.lower() in ("true", "1", "yes"):
        return True
    if raw.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be true/false, got {raw!r}", path=path)


def parse_weights_csv(raw: str) -> ClassWeights:
    """Five comma-separated non-negative numbers in the fixed class order;
    normalized to sum to 1."""
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != len(CLASS_ORDER):
        raise ValueError(f"expected {len(CLASS_ORDER)} weights, got {len(parts)}")
    values = [float(p) for p in parts]
    return ClassWeights.normalized(dict(zip(CLASS_ORDER, values)))


def load_gen_config(path=None, overrides: dict | None = None) -> GenConfig:
    """Build a GenConfig from an optional key=value file plus overrides.

    The file needs a ``version = 1`` line; ``#`` comments and blank lines are
    ignored. Override keys win over file keys; both use the field names of
    GenConfig (noise fields flattened as noise_class_flip_prob /
    noise_bbox_jitter_px).
    """
    raw: dict[str, object] = {}
    if path is not None:
        path = Path(path)
        seen_version = False
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected key = value, got {line!r}", path=path, line=line_no)
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "version":
                if value != str(CONFIG_VERSION):
                    raise ConfigError(
                        f"unsupported config version {value!r} (expected {CONFIG_VERSION})",
                        path=path, line=line_no,
                    )
                seen_version = True
                continue
            if key not in _CONFIG_FIELDS:
                raise ConfigError(f"unknown config key {key!r}", path=path, line=line_no)
            kind = _CONFIG_FIELDS[key]
            try:
                if kind is bool:
                    raw[key] = _parse_bool(value, key, path)
                elif kind == "weights":
                    raw[key] = parse_weights_csv(value)
                else:
                    raw[key] = kind(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", path=path, line=line_no)
        if not seen_version:
            raise ConfigError("config file lacks a version line", path=path)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"unknown config override {key!r}")
        raw[key] = value

    kwargs: dict = {k: v for k, v in raw.items() if not k.startswith("noise_")}
    noise = NoiseConfig(
        class_flip_prob=float(raw.get("noise_class_flip_prob", 0.0)),
        bbox_jitter_px=float(raw.get("noise_bbox_jitter_px", 0.0)),
    )
    try:
        return GenConfig(noise=noise, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), path=path)

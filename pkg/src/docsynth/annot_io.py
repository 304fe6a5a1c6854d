"""Dataset descriptions: manifest CSV, COCO JSON and YOLO label directories.

All three formats round-trip through one in-memory shape: a Dataset of
AnnotatedPages holding class-labeled boxes in corner coordinates. Parsers are
strict and point errors at the offending file/line; boxes leaking at most
0.5 px past their page are clamped back with a warning (rasterization slop in
third-party annotations), anything worse is rejected.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from PIL import Image

from .errors import (
    DanglingImageId,
    ImageLabelMismatch,
    MalformedFile,
    MalformedRow,
    MissingImageDimension,
    NegativeOrInvertedBox,
    NonPositiveBoxDims,
    OutOfBoundsBox,
    OutOfRangeNormalizedValue,
    UnknownClassId,
    UnknownClassLabel,
    UnmappableCategory,
)
from .geometry import BBox, YoloBox, from_yolo, to_yolo


class LayoutClass(str, Enum):
    """The five supported layout element classes."""

    TEXT = "text"
    TITLE = "title"
    LIST = "list"
    TABLE = "table"
    FIGURE = "figure"


# Fixed class order used everywhere a deterministic ordering is needed
# (sampling CDFs, reports, serialized tables).
CLASS_ORDER: tuple[LayoutClass, ...] = (
    LayoutClass.TEXT,
    LayoutClass.TITLE,
    LayoutClass.LIST,
    LayoutClass.TABLE,
    LayoutClass.FIGURE,
)

DEFAULT_CLASS_MAP: dict[LayoutClass, int] = {c: i for i, c in enumerate(CLASS_ORDER)}

MANIFEST_COLUMNS = (
    "image_path",
    "image_width",
    "image_height",
    "class_label",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
)

# Boxes may exceed their page by at most this much before being rejected;
# anything within is clamped back onto the page with a warning.
BORDER_SLOP_PX = 0.5


@dataclass(frozen=True)
class LayoutElement:
    """One class-labeled box on a page, with optional source provenance."""

    bbox: BBox
    label: LayoutClass
    source_ref: tuple[str, BBox] | None = None


@dataclass
class AnnotatedPage:
    """A page image reference plus its layout elements."""

    image_path: str
    width: int
    height: int
    elements: list[LayoutElement] = field(default_factory=list)


@dataclass
class Dataset:
    """Pages plus the class-to-integer-id table used for serialization."""

    pages: list[AnnotatedPage] = field(default_factory=list)
    class_map: dict[LayoutClass, int] = field(default_factory=lambda: dict(DEFAULT_CLASS_MAP))

    def iter_elements(self):
        for page in self.pages:
            for element in page.elements:
                yield page, element

    def element_count(self) -> int:
        return sum(len(p.elements) for p in self.pages)


def resolve_class_name(name: str, aliases: dict[str, LayoutClass] | None = None) -> LayoutClass | None:
    """Match a class name case-insensitively, consulting the alias table first."""
    key = name.strip().lower()
    if aliases:
        for alias, cls in aliases.items():
            if alias.strip().lower() == key:
                return cls
    for cls in CLASS_ORDER:
        if cls.value == key:
            return cls
    return None


def _clamp_to_page(x_min, y_min, x_max, y_max, page_w, page_h, path, line):
    """Apply the border policy: exact-border boxes pass, <= 0.5 px slop is
    clamped with a warning, anything beyond is rejected."""
    if x_max <= x_min or y_max <= y_min:
        raise NegativeOrInvertedBox(
            f"box ({x_min}, {y_min}, {x_max}, {y_max}) has non-positive extent",
            path=path, line=line,
        )
    if x_min < -BORDER_SLOP_PX or y_min < -BORDER_SLOP_PX:
        raise NegativeOrInvertedBox(
            f"box ({x_min}, {y_min}, {x_max}, {y_max}) has negative coordinates",
            path=path, line=line,
        )
    if x_max > page_w + BORDER_SLOP_PX or y_max > page_h + BORDER_SLOP_PX:
        raise OutOfBoundsBox(
            f"box ({x_min}, {y_min}, {x_max}, {y_max}) exceeds page {page_w}x{page_h}",
            path=path, line=line,
        )
    clamped = (
        max(x_min, 0.0),
        max(y_min, 0.0),
        min(x_max, float(page_w)),
        min(y_max, float(page_h)),
    )
    if clamped != (x_min, y_min, x_max, y_max):
        warnings.warn(
            f"{path or 'box'}: clamped box {(x_min, y_min, x_max, y_max)} onto "
            f"page {page_w}x{page_h}"
            + (f" (line {line})" if line is not None else "")
        )
    x_min, y_min, x_max, y_max = clamped
    if x_max <= x_min or y_max <= y_min:
        raise NegativeOrInvertedBox(
            f"box collapsed to zero extent after clamping onto page {page_w}x{page_h}",
            path=path, line=line,
        )
    return BBox(x_min, y_min, x_max, y_max)


# manifest CSV ----------------------------------------------------------------

def parse_manifest(csv_path, class_map: dict[LayoutClass, int] | None = None) -> Dataset:
    """Parse the source manifest CSV into a Dataset.

    One row per element; rows sharing an image_path are grouped into one page
    (page order follows first appearance, element order follows row order).
    Raises MalformedRow / NegativeOrInvertedBox / UnknownClassLabel /
    MissingImageDimension / OutOfBoundsBox with the offending line number.
    """
    csv_path = Path(csv_path)
    pages: dict[str, AnnotatedPage] = {}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow("empty file, header row is mandatory", path=csv_path, line=1)
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise MalformedRow(
                f"header {header!r} does not match required columns "
                f"{','.join(MANIFEST_COLUMNS)}",
                path=csv_path, line=1,
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise MalformedRow(
                    f"expected {len(MANIFEST_COLUMNS)} columns, got {len(row)}",
                    path=csv_path, line=line_no,
                )
            image_path, w_str, h_str, label_str, *coord_strs = (c.strip() for c in row)
            if not image_path:
                raise MalformedRow("empty image_path", path=csv_path, line=line_no)
            if not w_str or not h_str:
                raise MissingImageDimension(
                    f"image {image_path!r} lacks width/height", path=csv_path, line=line_no
                )
            try:
                width, height = int(w_str), int(h_str)
            except ValueError:
                raise MalformedRow(
                    f"image dimensions must be integers, got ({w_str!r}, {h_str!r})",
                    path=csv_path, line=line_no,
                )
            if width <= 0 or height <= 0:
                raise MalformedRow(
                    f"image dimensions must be positive, got {width}x{height}",
                    path=csv_path, line=line_no,
                )
            label = resolve_class_name(label_str)
            if label is None:
                raise UnknownClassLabel(
                    f"unknown class label {label_str!r}", path=csv_path, line=line_no
                )
            try:
                coords = [float(c) for c in coord_strs]
            except ValueError:
                raise MalformedRow(
                    f"box coordinates must be numbers, got {coord_strs!r}",
                    path=csv_path, line=line_no,
                )
            page = pages.get(image_path)
            if page is None:
                page = AnnotatedPage(image_path=image_path, width=width, height=height)
                pages[image_path] = page
            elif (page.width, page.height) != (width, height):
                raise MalformedRow(
                    f"conflicting dimensions for {image_path!r}: "
                    f"{page.width}x{page.height} vs {width}x{height}",
                    path=csv_path, line=line_no,
                )
            bbox = _clamp_to_page(*coords, width, height, csv_path, line_no)
            page.elements.append(LayoutElement(bbox=bbox, label=label))
    return Dataset(pages=list(pages.values()), class_map=dict(class_map or DEFAULT_CLASS_MAP))


def write_manifest(dataset: Dataset, csv_path) -> None:
    """Write a Dataset back out in the manifest CSV schema."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for page in dataset.pages:
            for el in page.elements:
                writer.writerow([
                    page.image_path,
                    page.width,
                    page.height,
                    el.label.value,
                    _fmt_num(el.bbox.x_min),
                    _fmt_num(el.bbox.y_min),
                    _fmt_num(el.bbox.x_max),
                    _fmt_num(el.bbox.y_max),
                ])


def _fmt_num(v: float):
    """Render integral floats without a trailing .0 so files stay tidy."""
    return int(v) if float(v).is_integer() else v


# COCO JSON -------------------------------------------------------------------

def read_coco(json_path, aliases: dict[str, LayoutClass] | None = None) -> Dataset:
    """Read the supported COCO subset: images, categories, bbox annotations.

    Category names are matched case-insensitively onto the five classes,
    extended by the optional alias table. The resulting class_map keeps the
    file's category ids so a follow-up write reproduces them.
    """
    json_path = Path(json_path)
    try:
        with open(json_path, encoding="utf-8") as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"invalid JSON: {exc}", path=json_path)
    for key in ("images", "categories", "annotations"):
        if key not in blob or not isinstance(blob[key], list):
            raise MalformedFile(f"missing or non-list {key!r} section", path=json_path)

    cat_to_class: dict[int, LayoutClass] = {}
    class_map: dict[LayoutClass, int] = {}
    for cat in blob["categories"]:
        cls = resolve_class_name(str(cat.get("name", "")), aliases)
        if cls is None:
            raise UnmappableCategory(
                f"category {cat.get('name')!r} (id {cat.get('id')}) matches no "
                "supported class", path=json_path,
            )
        if cls in class_map:
            raise MalformedFile(
                f"class {cls.value!r} mapped by multiple categories", path=json_path
            )
        cat_to_class[int(cat["id"])] = cls
        class_map[cls] = int(cat["id"])

    pages_by_id: dict[int, AnnotatedPage] = {}
    seen_paths: set[str] = set()
    for img in blob["images"]:
        try:
            img_id = int(img["id"])
            file_name = str(img["file_name"])
            width, height = int(img["width"]), int(img["height"])
        except (KeyError, TypeError, ValueError):
            raise MalformedFile(f"malformed image entry {img!r}", path=json_path)
        if file_name in seen_paths:
            raise MalformedFile(f"duplicate image file_name {file_name!r}", path=json_path)
        if img_id in pages_by_id:
            raise MalformedFile(f"duplicate image id {img_id}", path=json_path)
        if width <= 0 or height <= 0:
            raise MalformedFile(
                f"non-positive dimensions for image {file_name!r}", path=json_path
            )
        seen_paths.add(file_name)
        pages_by_id[img_id] = AnnotatedPage(image_path=file_name, width=width, height=height)

    for ann in blob["annotations"]:
        try:
            image_id = int(ann["image_id"])
            category_id = int(ann["category_id"])
            x, y, w, h = (float(v) for v in ann["bbox"])
        except (KeyError, TypeError, ValueError):
            raise MalformedFile(f"malformed annotation entry {ann!r}", path=json_path)
        page = pages_by_id.get(image_id)
        if page is None:
            raise DanglingImageId(
                f"annotation {ann.get('id')} references missing image id {image_id}",
                path=json_path,
            )
        if category_id not in cat_to_class:
            raise UnmappableCategory(
                f"annotation {ann.get('id')} references unknown category id {category_id}",
                path=json_path,
            )
        if w <= 0 or h <= 0:
            raise NonPositiveBoxDims(
                f"annotation {ann.get('id')} bbox {[x, y, w, h]} has non-positive "
                "width/height", path=json_path,
            )
        bbox = _clamp_to_page(x, y, x + w, y + h, page.width, page.height, json_path, None)
        page.elements.append(LayoutElement(bbox=bbox, label=cat_to_class[category_id]))

    return Dataset(pages=list(pages_by_id.values()), class_map=class_map or dict(DEFAULT_CLASS_MAP))


def write_coco(dataset: Dataset, json_path) -> None:
    """Write the supported COCO subset.

    Image and annotation ids are numbered sequentially from 1 in dataset
    order; category ids come from the dataset's class_map and names are the
    canonical lowercase class names.
    """
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    categories = [
        {"id": dataset.class_map[c], "name": c.value}
        for c in CLASS_ORDER
        if c in dataset.class_map
    ]
    categories.sort(key=lambda c: c["id"])
    images = []
    annotations = []
    ann_id = 1
    for page_idx, page in enumerate(dataset.pages):
        image_id = page_idx + 1
        images.append({
            "id": image_id,
            "file_name": page.image_path,
            "width": page.width,
            "height": page.height,
        })
        for el in page.elements:
            annotations.append({
                "id": ann_id,
                "image_id": image_id,
                "category_id": dataset.class_map[el.label],
                "bbox": [
                    _fmt_num(el.bbox.x_min),
                    _fmt_num(el.bbox.y_min),
                    _fmt_num(el.bbox.width),
                    _fmt_num(el.bbox.height),
                ],
            })
            ann_id += 1
    blob = {"images": images, "categories": categories, "annotations": annotations}
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2)
        fh.write("\n")


# YOLO label directories -------------------------------------------------------

def read_yolo_labels(labels_dir, images_dir, class_map: dict[LayoutClass, int] | None = None) -> Dataset:
    """Read a YOLO label directory (one ``<stem>.txt`` per image).

    Image dimensions are taken from the actual rasters in images_dir. An
    image without a label file becomes an empty page; a label file without a
    matching image raises ImageLabelMismatch.
    """
    labels_dir, images_dir = Path(labels_dir), Path(images_dir)
    class_map = dict(class_map or DEFAULT_CLASS_MAP)
    id_to_class = {v: k for k, v in class_map.items()}

    images = sorted(
        p for p in images_dir.iterdir()
        if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
    )
    stems = {p.stem for p in images}
    for label_file in sorted(labels_dir.glob("*.txt")):
        if label_file.stem not in stems:
            raise ImageLabelMismatch(
                f"label file {label_file.name!r} has no matching image in {images_dir}",
                path=label_file,
            )

    pages = []
    for image_path in images:
        with Image.open(image_path) as img:
            width, height = img.size
        page = AnnotatedPage(image_path=image_path.name, width=width, height=height)
        label_file = labels_dir / f"{image_path.stem}.txt"
        if label_file.exists():
            page.elements.extend(
                _parse_yolo_lines(label_file, width, height, id_to_class)
            )
        pages.append(page)
    return Dataset(pages=pages, class_map=class_map)


def _parse_yolo_lines(label_file: Path, width, height, id_to_class, with_confidence=False):
    """Parse "class_id cx cy w h [conf]" lines; returns elements or
    (element, confidence) pairs when with_confidence is set."""
    expected = 6 if with_confidence else 5
    out = []
    with open(label_file, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) != expected:
                raise MalformedRow(
                    f"expected {expected} fields, got {len(tokens)}",
                    path=label_file, line=line_no,
                )
            try:
                class_id = int(tokens[0])
                values = [float(t) for t in tokens[1:5]]
            except ValueError:
                raise MalformedRow(
                    f"unparseable numeric field in {line!r}", path=label_file, line=line_no
                )
            cls = id_to_class.get(class_id)
            if cls is None:
                raise UnknownClassId(
                    f"class id {class_id} not in class map", path=label_file, line=line_no
                )
            try:
                ybox = YoloBox(class_id, *values)
            except ValueError as exc:
                raise OutOfRangeNormalizedValue(str(exc), path=label_file, line=line_no)
            element = LayoutElement(bbox=from_yolo(ybox, width, height), label=cls)
            if with_confidence:
                try:
                    conf = float(tokens[5])
                except ValueError:
                    raise MalformedRow(
                        f"unparseable confidence in {line!r}", path=label_file, line=line_no
                    )
                if not 0 <= conf <= 1:
                    raise OutOfRangeNormalizedValue(
                        f"confidence {conf} outside [0, 1]", path=label_file, line=line_no
                    )
                out.append((element, conf))
            else:
                out.append(element)
    return out


def write_yolo_labels(dataset: Dataset, out_dir) -> None:
    """Write one ``<stem>.txt`` per page: "class_id cx cy w h", 6 decimals.

    Empty pages get an empty file so the directory round-trips losslessly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for page in dataset.pages:
        lines = []
        for el in page.elements:
            ybox = to_yolo(el.bbox, dataset.class_map[el.label], page.width, page.height)
            lines.append(format_yolo_line(ybox))
        stem = Path(page.image_path).stem
        (out_dir / f"{stem}.txt").write_text("".join(lines), encoding="utf-8")


def format_yolo_line(ybox: YoloBox) -> str:
    return f"{ybox.class_id} {ybox.cx:.6f} {ybox.cy:.6f} {ybox.w:.6f} {ybox.h:.6f}\n"


# validation -------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationPolicy:
    no_overlap: bool = False


@dataclass(frozen=True)
class Violation:
    kind: str  # bounds | area | unknown_class | overlap | class_map | duplicate_path
    image_path: str
    message: str
    element_index: int | None = None
    other_index: int | None = None


def validate(dataset: Dataset, policy: ValidationPolicy = ValidationPolicy()) -> list[Violation]:
    """Collect every invariant violation in a dataset; empty list means valid.

    Checks box-in-page, positive area, class-map coverage/bijectivity,
    unique page paths and, when policy.no_overlap, pairwise zero overlap per
    page. Violations are data, not exceptions.
    """
    violations: list[Violation] = []

    ids = list(dataset.class_map.values())
    if len(set(ids)) != len(ids):
        violations.append(Violation(
            kind="class_map", image_path="",
            message=f"class map ids are not unique: {dataset.class_map}",
        ))
    seen_paths: set[str] = set()
    for page in dataset.pages:
        if page.image_path in seen_paths:
            violations.append(Violation(
                kind="duplicate_path", image_path=page.image_path,
                message=f"duplicate page image_path {page.image_path!r}",
            ))
        seen_paths.add(page.image_path)
        for idx, el in enumerate(page.elements):
            b = el.bbox
            if b.x_max - b.x_min <= 0 or b.y_max - b.y_min <= 0:
                violations.append(Violation(
                    kind="area", image_path=page.image_path, element_index=idx,
                    message=f"element {idx} has non-positive area {b.as_tuple()}",
                ))
            if b.x_min < 0 or b.y_min < 0 or b.x_max > page.width or b.y_max > page.height:
                violations.append(Violation(
                    kind="bounds", image_path=page.image_path, element_index=idx,
                    message=(
                        f"element {idx} box {b.as_tuple()} outside page "
                        f"{page.width}x{page.height}"
                    ),
                ))
            if el.label not in dataset.class_map:
                violations.append(Violation(
                    kind="unknown_class", image_path=page.image_path, element_index=idx,
                    message=f"element {idx} class {el.label!r} missing from class map",
                ))
        if policy.no_overlap:
            for i in range(len(page.elements)):
                for j in range(i + 1, len(page.elements)):
                    a, b = page.elements[i].bbox, page.elements[j].bbox
                    ow = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
                    oh = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
                    if ow > 0 and oh > 0:
                        violations.append(Violation(
                            kind="overlap", image_path=page.image_path,
                            element_index=i, other_index=j,
                            message=(
                                f"elements {i} and {j} overlap by area {ow * oh}"
                            ),
                        ))
    return violations

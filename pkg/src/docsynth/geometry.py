"""Axis-aligned bounding-box algebra shared by composition and evaluation.

Boxes are (x_min, y_min, x_max, y_max) in real-valued pixel coordinates with
an exclusive max edge; two boxes that merely share an edge or corner do not
overlap. Integer rasterization happens only at render time, so nothing here
rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfCanvas

# Tolerance for normalized-coordinate invariants; matches the 6-decimal
# quantization used when YOLO labels are serialized.
NORM_TOL = 1e-6


@dataclass(frozen=True)
class BBox:
    """Axis-aligned rectangle in pixel coordinates, strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates {coords}")
        if min(coords) < 0:
            raise ValueError(f"negative box coordinates {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"inverted or empty box {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class YoloBox:
    """Center/size box normalized by canvas dimensions, plus a class id."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (0 < self.w <= 1 + NORM_TOL and 0 < self.h <= 1 + NORM_TOL):
            raise ValueError(f"normalized size out of (0, 1]: w={self.w} h={self.h}")
        for c, s in ((self.cx, self.w), (self.cy, self.h)):
            if c - s / 2 < -NORM_TOL or c + s / 2 > 1 + NORM_TOL:
                raise ValueError(
                    f"normalized box extends outside the unit square: "
                    f"center={c} size={s}"
                )


def area(b: BBox) -> float:
    """Box area in square pixels."""
    return b.width * b.height


def intersect(a: BBox, b: BBox) -> BBox | None:
    """Overlap rectangle of two boxes, or None when the overlap area is zero.

    Edge or corner contact counts as no overlap.
    """
    x_min = max(a.x_min, b.x_min)
    y_min = max(a.y_min, b.y_min)
    x_max = min(a.x_max, b.x_max)
    y_max = min(a.y_max, b.y_max)
    if x_min < x_max and y_min < y_max:
        return BBox(x_min, y_min, x_max, y_max)
    return None


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in [0, 1]; 0 for disjoint boxes."""
    inter = intersect(a, b)
    if inter is None:
        return 0.0
    inter_area = area(inter)
    return inter_area / (area(a) + area(b) - inter_area)


def translate(b: BBox, dx: float, dy: float) -> BBox:
    """Shift a box by (dx, dy), preserving width and height exactly.

    Raises OutOfCanvas if any resulting coordinate would be negative.
    """
    if b.x_min + dx < 0 or b.y_min + dy < 0:
        raise OutOfCanvas(
            f"translating {b.as_tuple()} by ({dx}, {dy}) yields negative coordinates"
        )
    return BBox(b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy)


def to_yolo(b: BBox, class_id: int, canvas_w: float, canvas_h: float) -> YoloBox:
    """Convert a pixel box to normalized center/size form.

    Raises OutOfCanvas if the box exceeds the canvas bounds.
    """
    if b.x_max > canvas_w or b.y_max > canvas_h:
        raise OutOfCanvas(
            f"box {b.as_tuple()} exceeds canvas {canvas_w}x{canvas_h}"
        )
    return YoloBox(
        class_id=class_id,
        cx=(b.x_min + b.x_max) / (2 * canvas_w),
        cy=(b.y_min + b.y_max) / (2 * canvas_h),
        w=b.width / canvas_w,
        h=b.height / canvas_h,
    )


def from_yolo(y: YoloBox, canvas_w: float, canvas_h: float) -> BBox:
    """Denormalize a YOLO box back to pixel corners.

    Inverse of to_yolo up to quantization; values a hair outside the canvas
    (within the normalized tolerance) are clamped back onto it.
    """
    x_min = (y.cx - y.w / 2) * canvas_w
    y_min = (y.cy - y.h / 2) * canvas_h
    x_max = (y.cx + y.w / 2) * canvas_w
    y_max = (y.cy + y.h / 2) * canvas_h
    return BBox(
        x_min=min(max(x_min, 0.0), canvas_w),
        y_min=min(max(y_min, 0.0), canvas_h),
        x_max=min(max(x_max, 0.0), canvas_w),
        y_max=min(max(y_max, 0.0), canvas_h),
    )

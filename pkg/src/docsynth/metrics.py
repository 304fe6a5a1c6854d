"""Object-detection evaluation: per-class AP, mAP50 and mAP50-95.

Matching is greedy per class and per page: predictions in descending
confidence (ties by input order) claim the unmatched ground-truth box with
the highest IoU at or above the threshold. AP uses the 101-point
interpolation (mean over recall grid 0.00..1.00 of the maximum precision at
or beyond each recall), with the recall denominator fixed to the class's
ground-truth count. Classes with no ground truth are excluded from every
aggregate.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .annot_io import (
    CLASS_ORDER,
    DEFAULT_CLASS_MAP,
    Dataset,
    LayoutClass,
    LayoutElement,
    _parse_yolo_lines,
    resolve_class_name,
)
from .errors import (
    DanglingImageId,
    ImageLabelMismatch,
    MalformedFile,
    NonPositiveBoxDims,
    PageSetMismatchWarning,
    UnmappableCategory,
)
from .geometry import BBox, iou

IOU_THRESHOLDS: tuple[float, ...] = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))
DEFAULT_CONF_THRESH = 0.25


@dataclass(frozen=True)
class Detection:
    bbox: BBox
    label: LayoutClass
    confidence: float

    def __post_init__(self):
        if not 0 <= self.confidence <= 1:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


@dataclass
class MatchLedger:
    """Matching outcome at one IoU threshold, mergeable across pages.

    records holds (confidence, is_true_positive) per prediction in input
    order; gt_counts holds ground-truth totals per class.
    """

    iou_thresh: float
    records: dict[LayoutClass, list[tuple[float, bool]]] = field(
        default_factory=lambda: {c: [] for c in CLASS_ORDER}
    )
    gt_counts: dict[LayoutClass, int] = field(
        default_factory=lambda: {c: 0 for c in CLASS_ORDER}
    )

    def extend(self, other: "MatchLedger") -> None:
        if other.iou_thresh != self.iou_thresh:
            raise ValueError("cannot merge ledgers built at different IoU thresholds")
        for c in CLASS_ORDER:
            self.records[c].extend(other.records[c])
            self.gt_counts[c] += other.gt_counts[c]

    def tally(self, cls: LayoutClass, conf_thresh: float = 0.0) -> tuple[int, int, int]:
        """(TP, FP, FN) for a class counting predictions at conf >= thresh."""
        kept = [(c, tp) for c, tp in self.records[cls] if c >= conf_thresh]
        tp = sum(1 for _, is_tp in kept if is_tp)
        fp = len(kept) - tp
        fn = self.gt_counts[cls] - tp
        return tp, fp, fn


def match_detections(
    preds: list[Detection],
    gts: list[LayoutElement],
    iou_thresh: float,
) -> MatchLedger:
    """Greedy class-wise matching of one page's predictions to ground truth."""
    ledger = MatchLedger(iou_thresh=iou_thresh)
    for el in gts:
        ledger.gt_counts[el.label] += 1
    by_class: dict[LayoutClass, list[tuple[int, Detection]]] = {c: [] for c in CLASS_ORDER}
    for idx, det in enumerate(preds):
        by_class[det.label].append((idx, det))
    for cls in CLASS_ORDER:
        gt_boxes = [el.bbox for el in gts if el.label == cls]
        taken = [False] * len(gt_boxes)
        # (confidence, input order) per prediction; stable tie-break by order.
        order = sorted(by_class[cls], key=lambda p: (-p[1].confidence, p[0]))
        outcome: dict[int, bool] = {}
        for idx, det in order:
            best_iou = 0.0
            best_j = -1
            for j, gt_box in enumerate(gt_boxes):
                if taken[j]:
                    continue
                value = iou(det.bbox, gt_box)
                if value > best_iou:
                    best_iou = value
                    best_j = j
            if best_j >= 0 and best_iou >= iou_thresh:
                taken[best_j] = True
                outcome[idx] = True
            else:
                outcome[idx] = False
        ledger.records[cls] = [
            (det.confidence, outcome[idx]) for idx, det in by_class[cls]
        ]
    return ledger


def merge_ledgers(ledgers) -> MatchLedger:
    """Concatenate page ledgers in the given (page) order."""
    ledgers = list(ledgers)
    if not ledgers:
        raise ValueError("no ledgers to merge")
    merged = MatchLedger(iou_thresh=ledgers[0].iou_thresh)
    for ledger in ledgers:
        merged.extend(ledger)
    return merged


def average_precision(ledger: MatchLedger, cls: LayoutClass) -> float | None:
    """101-point interpolated AP for one class, or None when it has no gts."""
    n_gt = ledger.gt_counts[cls]
    if n_gt == 0:
        return None
    records = sorted(ledger.records[cls], key=lambda r: -r[0])  # stable: ties keep input order
    if not records:
        return 0.0
    precisions = []
    recalls = []
    tp = fp = 0
    for _, is_tp in records:
        if is_tp:
            tp += 1
        else:
            fp += 1
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_gt)
    # Running max of precision from the right: interpolated precision at any
    # recall level is the best precision achieved at that recall or beyond.
    best_right = [0.0] * len(precisions)
    running = 0.0
    for i in range(len(precisions) - 1, -1, -1):
        running = max(running, precisions[i])
        best_right[i] = running
    total = 0.0
    j = 0
    for i in range(101):
        r = i / 100
        while j < len(recalls) and recalls[j] < r:
            j += 1
        if j < len(recalls):
            total += best_right[j]
    return total / 101


@dataclass(frozen=True)
class ClassMetrics:
    ap_by_thresh: dict[float, float]
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    n_gt: int

    @property
    def ap50(self) -> float:
        return self.ap_by_thresh[IOU_THRESHOLDS[0]]

    @property
    def ap50_95(self) -> float:
        return sum(self.ap_by_thresh.values()) / len(self.ap_by_thresh)


@dataclass
class EvalReport:
    per_class: dict[LayoutClass, ClassMetrics]
    map50: float
    map50_95: float
    conf_thresh: float
    thresholds: tuple[float, ...]
    match_counts: dict[LayoutClass, dict[float, tuple[int, int, int]]]
    pages_evaluated: int
    gt_only_pages: list[str] = field(default_factory=list)
    pred_only_pages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "map50": self.map50,
            "map50_95": self.map50_95,
            "conf_thresh": self.conf_thresh,
            "thresholds": list(self.thresholds),
            "pages_evaluated": self.pages_evaluated,
            "gt_only_pages": self.gt_only_pages,
            "pred_only_pages": self.pred_only_pages,
            "classes": {
                cls.value: {
                    "ap_by_thresh": {f"{t:.2f}": ap for t, ap in m.ap_by_thresh.items()},
                    "ap50": m.ap50,
                    "ap50_95": m.ap50_95,
                    "precision": m.precision,
                    "recall": m.recall,
                    "tp": m.tp,
                    "fp": m.fp,
                    "fn": m.fn,
                    "n_gt": m.n_gt,
                }
                for cls, m in self.per_class.items()
            },
            "match_counts": {
                cls.value: {f"{t:.2f}": list(v) for t, v in by_t.items()}
                for cls, by_t in self.match_counts.items()
            },
        }

    def format_table(self) -> str:
        header = ("class", "precision", "recall", "mAP50", "mAP50-95")
        rows = [header]
        rows.append((
            "all",
            f"{self._mean('precision'):.3f}",
            f"{self._mean('recall'):.3f}",
            f"{self.map50:.3f}",
            f"{self.map50_95:.3f}",
        ))
        for cls in CLASS_ORDER:
            m = self.per_class.get(cls)
            if m is None:
                continue
            rows.append((
                cls.value,
                f"{m.precision:.3f}",
                f"{m.recall:.3f}",
                f"{m.ap50:.3f}",
                f"{m.ap50_95:.3f}",
            ))
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def _mean(self, attr: str) -> float:
        values = [getattr(m, attr) for m in self.per_class.values()]
        return sum(values) / len(values) if values else 0.0


def evaluate(
    predictions: dict[str, list[Detection]],
    gts: Dataset,
    conf_thresh: float = DEFAULT_CONF_THRESH,
) -> EvalReport:
    """Score predictions (keyed by page image path) against ground truth.

    Pages present on only one side are reported, warned about, and dropped;
    evaluation proceeds on the intersection in ground-truth page order.
    """
    gt_paths = [p.image_path for p in gts.pages]
    gt_only = sorted(set(gt_paths) - set(predictions))
    pred_only = sorted(set(predictions) - set(gt_paths))
    if gt_only or pred_only:
        warnings.warn(
            f"page sets differ: {len(gt_only)} ground-truth-only, "
            f"{len(pred_only)} prediction-only; evaluating the intersection",
            PageSetMismatchWarning,
        )
    common = [p for p in gts.pages if p.image_path in predictions]

    ledgers: dict[float, MatchLedger] = {}
    for thresh in IOU_THRESHOLDS:
        ledger = MatchLedger(iou_thresh=thresh)
        for page in common:
            ledger.extend(match_detections(predictions[page.image_path], page.elements, thresh))
        ledgers[thresh] = ledger

    per_class: dict[LayoutClass, ClassMetrics] = {}
    match_counts: dict[LayoutClass, dict[float, tuple[int, int, int]]] = {}
    for cls in CLASS_ORDER:
        n_gt = ledgers[IOU_THRESHOLDS[0]].gt_counts[cls]
        match_counts[cls] = {t: ledgers[t].tally(cls) for t in IOU_THRESHOLDS}
        if n_gt == 0:
            continue  # no ground truth: excluded from all aggregates
        ap_by_thresh = {t: average_precision(ledgers[t], cls) for t in IOU_THRESHOLDS}
        tp, fp, fn = ledgers[IOU_THRESHOLDS[0]].tally(cls, conf_thresh)
        per_class[cls] = ClassMetrics(
            ap_by_thresh=ap_by_thresh,
            precision=tp / (tp + fp) if tp + fp else 0.0,
            recall=tp / n_gt,
            tp=tp, fp=fp, fn=fn, n_gt=n_gt,
        )

    aps50 = [m.ap50 for m in per_class.values()]
    aps_all = [m.ap50_95 for m in per_class.values()]
    return EvalReport(
        per_class=per_class,
        map50=sum(aps50) / len(aps50) if aps50 else 0.0,
        map50_95=sum(aps_all) / len(aps_all) if aps_all else 0.0,
        conf_thresh=conf_thresh,
        thresholds=IOU_THRESHOLDS,
        match_counts=match_counts,
        pages_evaluated=len(common),
        gt_only_pages=gt_only,
        pred_only_pages=pred_only,
    )


# prediction input formats -------------------------------------------------------

def read_yolo_predictions(
    labels_dir,
    images_dir,
    class_map: dict[LayoutClass, int] | None = None,
) -> dict[str, list[Detection]]:
    """Read YOLO label files extended with a 6th confidence column.

    Keys are image file names; images without a prediction file get an empty
    list, prediction files without an image raise ImageLabelMismatch.
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
                f"prediction file {label_file.name!r} has no matching image",
                path=label_file,
            )
    predictions: dict[str, list[Detection]] = {}
    for image_path in images:
        with Image.open(image_path) as img:
            width, height = img.size
        label_file = labels_dir / f"{image_path.stem}.txt"
        dets: list[Detection] = []
        if label_file.exists():
            for element, conf in _parse_yolo_lines(
                label_file, width, height, id_to_class, with_confidence=True
            ):
                dets.append(Detection(bbox=element.bbox, label=element.label, confidence=conf))
        predictions[image_path.name] = dets
    return predictions


def read_coco_predictions(results_path, gt_coco_path) -> dict[str, list[Detection]]:
    """Read COCO results JSON: [{image_id, category_id, bbox, score}].

    Image ids and category ids resolve against the ground-truth COCO file.
    Every ground-truth image gets a key (empty list when nothing was
    predicted for it).
    """
    results_path, gt_coco_path = Path(results_path), Path(gt_coco_path)
    with open(gt_coco_path, encoding="utf-8") as fh:
        gt_blob = json.load(fh)
    id_to_name = {int(img["id"]): str(img["file_name"]) for img in gt_blob["images"]}
    cat_to_class = {}
    for cat in gt_blob["categories"]:
        cls = resolve_class_name(str(cat.get("name", "")))
        if cls is None:
            raise UnmappableCategory(
                f"category {cat.get('name')!r} matches no supported class",
                path=gt_coco_path,
            )
        cat_to_class[int(cat["id"])] = cls

    try:
        with open(results_path, encoding="utf-8") as fh:
            entries = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"invalid JSON: {exc}", path=results_path)
    if not isinstance(entries, list):
        raise MalformedFile("results file must be a JSON array", path=results_path)

    predictions: dict[str, list[Detection]] = {name: [] for name in id_to_name.values()}
    for entry in entries:
        try:
            image_id = int(entry["image_id"])
            category_id = int(entry["category_id"])
            x, y, w, h = (float(v) for v in entry["bbox"])
            score = float(entry["score"])
        except (KeyError, TypeError, ValueError):
            raise MalformedFile(f"malformed result entry {entry!r}", path=results_path)
        if image_id not in id_to_name:
            raise DanglingImageId(
                f"result references unknown image id {image_id}", path=results_path
            )
        if category_id not in cat_to_class:
            raise UnmappableCategory(
                f"result references unknown category id {category_id}", path=results_path
            )
        if w <= 0 or h <= 0:
            raise NonPositiveBoxDims(
                f"result bbox {[x, y, w, h]} has non-positive width/height",
                path=results_path,
            )
        # Detector outputs may leak slightly negative; clamp onto the canvas.
        x0, y0 = max(x, 0.0), max(y, 0.0)
        predictions[id_to_name[image_id]].append(Detection(
            bbox=BBox(x0, y0, max(x0 + 1e-6, x + w), max(y0 + 1e-6, y + h)),
            label=cat_to_class[category_id],
            confidence=score,
        ))
    return predictions

import json
import random

import numpy as np
import pytest
from PIL import Image

from docsynth.annot_io import (
    AnnotatedPage,
    Dataset,
    LayoutClass,
    LayoutElement,
    parse_manifest,
    write_coco,
)
from docsynth.errors import ImageLabelMismatch, PageSetMismatchWarning
from docsynth.geometry import BBox
from docsynth.metrics import (
    IOU_THRESHOLDS,
    Detection,
    average_precision,
    evaluate,
    match_detections,
    merge_ledgers,
    read_coco_predictions,
    read_yolo_predictions,
)

from oracles import ap_101, evaluate_bruteforce, greedy_match


def det(x0, y0, x1, y1, label=LayoutClass.TEXT, conf=0.9):
    return Detection(bbox=BBox(x0, y0, x1, y1), label=label, confidence=conf)


def gt(x0, y0, x1, y1, label=LayoutClass.TEXT):
    return LayoutElement(bbox=BBox(x0, y0, x1, y1), label=label)


# matching -----------------------------------------------------------------------

def test_exact_match_is_tp_at_any_threshold():
    for thresh in (0.5, 0.75, 1.0):
        ledger = match_detections([det(10, 10, 50, 50)], [gt(10, 10, 50, 50)], thresh)
        assert ledger.tally(LayoutClass.TEXT) == (1, 0, 0)


def test_two_preds_one_gt_keeps_higher_confidence():
    preds = [
        det(10, 10, 50, 50, conf=0.9),            # IoU 1.0
        det(10, 10, 50, 43, conf=0.8),            # IoU ~0.8
    ]
    ledger = match_detections(preds, [gt(10, 10, 50, 50)], 0.5)
    assert ledger.records[LayoutClass.TEXT] == [(0.9, True), (0.8, False)]
    assert ledger.tally(LayoutClass.TEXT) == (1, 1, 0)


def test_matching_is_class_wise():
    preds = [det(10, 10, 50, 50, LayoutClass.TABLE)]
    ledger = match_detections(preds, [gt(10, 10, 50, 50, LayoutClass.TEXT)], 0.5)
    assert ledger.tally(LayoutClass.TABLE) == (0, 1, 0)
    assert ledger.tally(LayoutClass.TEXT) == (0, 0, 1)


def test_greedy_matching_agrees_with_bruteforce_oracle():
    rng = random.Random(41)
    for _ in range(300):
        n_gt = rng.randint(0, 6)
        n_pred = rng.randint(0, 6)
        gts = []
        for _ in range(n_gt):
            x0, y0 = rng.randint(0, 80), rng.randint(0, 80)
            gts.append(gt(x0, y0, x0 + rng.randint(4, 40), y0 + rng.randint(4, 40)))
        preds = []
        for _ in range(n_pred):
            if gts and rng.random() < 0.6:
                base = rng.choice(gts).bbox
                dx, dy = rng.randint(-6, 6), rng.randint(-6, 6)
                box = (max(0, base.x_min + dx), max(0, base.y_min + dy),
                       base.x_max + dx, base.y_max + dy)
            else:
                x0, y0 = rng.randint(0, 80), rng.randint(0, 80)
                box = (x0, y0, x0 + rng.randint(4, 40), y0 + rng.randint(4, 40))
            preds.append(det(*box, conf=rng.choice([0.3, 0.5, 0.5, 0.7, 0.9])))
        thresh = rng.choice(IOU_THRESHOLDS)
        ledger = match_detections(preds, gts, thresh)
        flags = greedy_match(
            [(p.bbox.as_tuple(), p.confidence) for p in preds],
            [g.bbox.as_tuple() for g in gts],
            thresh,
        )
        assert [tp for _, tp in ledger.records[LayoutClass.TEXT]] == flags


# average precision -----------------------------------------------------------------

def test_ap_perfect_detector():
    ledger = match_detections(
        [det(0, 0, 10, 10, conf=0.9), det(20, 20, 40, 40, conf=0.8)],
        [gt(0, 0, 10, 10), gt(20, 20, 40, 40)],
        0.5,
    )
    assert average_precision(ledger, LayoutClass.TEXT) == 1.0


def test_ap_sweep_examples():
    # TP at 0.9 then FP at 0.8: precision 1.0 is reached at full recall.
    ledger = match_detections(
        [det(0, 0, 10, 10, conf=0.9), det(50, 50, 60, 60, conf=0.8)],
        [gt(0, 0, 10, 10)],
        0.5,
    )
    assert average_precision(ledger, LayoutClass.TEXT) == 1.0
    # Reversed confidences: FP first, so interpolated precision is 0.5 everywhere.
    ledger = match_detections(
        [det(50, 50, 60, 60, conf=0.9), det(0, 0, 10, 10, conf=0.8)],
        [gt(0, 0, 10, 10)],
        0.5,
    )
    assert average_precision(ledger, LayoutClass.TEXT) == pytest.approx(0.5)
    assert average_precision(ledger, LayoutClass.TEXT) == ap_101(
        [(0.9, False), (0.8, True)], 1
    )


def test_ap_no_predictions_or_no_gts():
    ledger = match_detections([], [gt(0, 0, 10, 10)], 0.5)
    assert average_precision(ledger, LayoutClass.TEXT) == 0.0
    ledger = match_detections([det(0, 0, 10, 10)], [], 0.5)
    assert average_precision(ledger, LayoutClass.TEXT) is None  # excluded


def test_ap_matches_oracle_on_random_sweeps():
    rng = random.Random(43)
    for _ in range(200):
        n = rng.randint(1, 12)
        records = [(round(rng.random(), 2), rng.random() < 0.5) for _ in range(n)]
        n_gt = rng.randint(1, 8)
        ledger = match_detections([], [], 0.5)
        ledger.records[LayoutClass.TEXT] = list(records)
        ledger.gt_counts[LayoutClass.TEXT] = n_gt
        assert average_precision(ledger, LayoutClass.TEXT) == pytest.approx(
            ap_101(records, n_gt), abs=1e-12
        )


def test_merge_ledgers_concatenates_in_page_order():
    a = match_detections([det(0, 0, 10, 10, conf=0.9)], [gt(0, 0, 10, 10)], 0.5)
    b = match_detections([det(0, 0, 10, 10, conf=0.4)], [gt(20, 20, 30, 30)], 0.5)
    merged = merge_ledgers([a, b])
    assert merged.records[LayoutClass.TEXT] == [(0.9, True), (0.4, False)]
    assert merged.gt_counts[LayoutClass.TEXT] == 2


# evaluate ---------------------------------------------------------------------------

def _page_set(rng, pages=4, max_gt=6, max_pred=6):
    gt_pages = []
    predictions = {}
    for i in range(pages):
        name = f"p{i}.png"
        gts = []
        for _ in range(rng.randint(0, max_gt)):
            x0, y0 = rng.randint(0, 150), rng.randint(0, 150)
            gts.append(gt(x0, y0, x0 + rng.randint(5, 60), y0 + rng.randint(5, 60),
                          rng.choice(list(LayoutClass))))
        preds = []
        for _ in range(rng.randint(0, max_pred)):
            if gts and rng.random() < 0.65:
                base = rng.choice(gts)
                dx, dy = rng.randint(-8, 8), rng.randint(-8, 8)
                box = (max(0, base.bbox.x_min + dx), max(0, base.bbox.y_min + dy),
                       base.bbox.x_max + dx, base.bbox.y_max + dy)
                label = base.label if rng.random() < 0.8 else rng.choice(list(LayoutClass))
            else:
                x0, y0 = rng.randint(0, 150), rng.randint(0, 150)
                box = (x0, y0, x0 + rng.randint(5, 60), y0 + rng.randint(5, 60))
                label = rng.choice(list(LayoutClass))
            preds.append(det(*box, label=label, conf=round(rng.uniform(0.05, 1.0), 3)))
        gt_pages.append(AnnotatedPage(name, 256, 256, gts))
        predictions[name] = preds
    return Dataset(pages=gt_pages), predictions


def test_perfect_predictions_score_one(corpus_manifest):
    ds = parse_manifest(corpus_manifest)
    predictions = {
        p.image_path: [Detection(el.bbox, el.label, 1.0) for el in p.elements]
        for p in ds.pages
    }
    report = evaluate(predictions, ds)
    assert report.map50 == 1.0
    assert report.map50_95 == 1.0
    for m in report.per_class.values():
        assert m.precision == 1.0 and m.recall == 1.0


def test_empty_predictions_score_zero(corpus_manifest):
    ds = parse_manifest(corpus_manifest)
    report = evaluate({p.image_path: [] for p in ds.pages}, ds)
    assert report.map50 == 0.0 and report.map50_95 == 0.0
    for m in report.per_class.values():
        assert m.precision == 0.0 and m.recall == 0.0 and m.tp == 0


def test_report_matches_bruteforce_evaluator():
    rng = random.Random(47)
    for _ in range(60):
        gts, predictions = _page_set(rng)
        report = evaluate(predictions, gts)
        oracle = evaluate_bruteforce(
            {k: [(d.bbox, d.label, d.confidence) for d in v] for k, v in predictions.items()},
            gts, conf_thresh=0.25, thresholds=IOU_THRESHOLDS,
        )
        assert report.map50 == pytest.approx(oracle["map50"], abs=1e-9)
        assert report.map50_95 == pytest.approx(oracle["map50_95"], abs=1e-9)
        assert set(report.per_class) == set(oracle["classes"])
        for cls, m in report.per_class.items():
            want = oracle["classes"][cls]
            assert m.precision == pytest.approx(want["precision"], abs=1e-9)
            assert m.recall == pytest.approx(want["recall"], abs=1e-9)
            for t in IOU_THRESHOLDS:
                assert m.ap_by_thresh[t] == pytest.approx(want["ap"][t], abs=1e-9)


def test_ap_monotone_in_iou_threshold_and_map_ordering():
    rng = random.Random(53)
    for _ in range(40):
        gts, predictions = _page_set(rng, pages=3)
        report = evaluate(predictions, gts)
        assert report.map50_95 <= report.map50 + 1e-12
        for m in report.per_class.values():
            aps = [m.ap_by_thresh[t] for t in IOU_THRESHOLDS]
            assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))


def test_duplicating_pages_preserves_metrics():
    rng = random.Random(59)
    gts, predictions = _page_set(rng, pages=3)
    doubled_pages = list(gts.pages) + [
        AnnotatedPage(p.image_path + ".copy.png", p.width, p.height, list(p.elements))
        for p in gts.pages
    ]
    doubled_preds = dict(predictions)
    doubled_preds.update({
        p.image_path + ".copy.png": list(predictions[p.image_path]) for p in gts.pages
    })
    a = evaluate(predictions, gts)
    b = evaluate(doubled_preds, Dataset(pages=doubled_pages))
    assert b.map50 == pytest.approx(a.map50, abs=1e-12)
    assert b.map50_95 == pytest.approx(a.map50_95, abs=1e-12)
    for cls in a.per_class:
        assert b.per_class[cls].precision == pytest.approx(a.per_class[cls].precision, abs=1e-12)
        assert b.per_class[cls].recall == pytest.approx(a.per_class[cls].recall, abs=1e-12)


def test_low_confidence_far_fp_never_raises_ap():
    rng = random.Random(61)
    for _ in range(30):
        gts, predictions = _page_set(rng, pages=2)
        base = evaluate(predictions, gts)
        polluted = {k: list(v) for k, v in predictions.items()}
        min_conf = min(
            (d.confidence for v in predictions.values() for d in v), default=0.5
        )
        first = gts.pages[0].image_path
        polluted[first] = polluted[first] + [
            det(200, 200, 250, 250, cls, conf=max(min_conf - 0.05, 0.0))
            for cls in LayoutClass
        ]
        worse = evaluate(polluted, gts)
        for cls in base.per_class:
            for t in IOU_THRESHOLDS:
                assert worse.per_class[cls].ap_by_thresh[t] <= \
                       base.per_class[cls].ap_by_thresh[t] + 1e-12


def test_page_set_mismatch_warns_and_proceeds():
    gts = Dataset(pages=[
        AnnotatedPage("a.png", 100, 100, [gt(0, 0, 10, 10)]),
        AnnotatedPage("b.png", 100, 100, [gt(0, 0, 10, 10)]),
    ])
    predictions = {
        "a.png": [det(0, 0, 10, 10, conf=1.0)],
        "c.png": [det(0, 0, 10, 10, conf=1.0)],
    }
    with pytest.warns(PageSetMismatchWarning):
        report = evaluate(predictions, gts)
    assert report.pages_evaluated == 1
    assert report.gt_only_pages == ["b.png"]
    assert report.pred_only_pages == ["c.png"]
    assert report.map50 == 1.0


# prediction readers -------------------------------------------------------------------

def test_read_yolo_predictions(tmp_path):
    (tmp_path / "labels").mkdir()
    (tmp_path / "images").mkdir()
    Image.fromarray(np.zeros((100, 200, 3), dtype=np.uint8)).save(tmp_path / "images" / "p.png")
    (tmp_path / "labels" / "p.txt").write_text("0 0.5 0.5 0.5 0.5 0.875\n")
    preds = read_yolo_predictions(tmp_path / "labels", tmp_path / "images")
    assert set(preds) == {"p.png"}
    d = preds["p.png"][0]
    assert d.label is LayoutClass.TEXT
    assert d.confidence == 0.875
    assert d.bbox == BBox(50, 25, 150, 75)

    (tmp_path / "labels" / "ghost.txt").write_text("0 0.5 0.5 0.5 0.5 0.5\n")
    with pytest.raises(ImageLabelMismatch):
        read_yolo_predictions(tmp_path / "labels", tmp_path / "images")


def test_read_coco_predictions(tmp_path, corpus_manifest):
    ds = parse_manifest(corpus_manifest)
    gt_json = tmp_path / "gt.json"
    write_coco(ds, gt_json)
    results = [
        {"image_id": 1, "category_id": ds.class_map[LayoutClass.TABLE],
         "bbox": [10, 20, 30, 40], "score": 0.75},
    ]
    results_path = tmp_path / "results.json"
    results_path.write_text(json.dumps(results))
    preds = read_coco_predictions(results_path, gt_json)
    assert set(preds) == {p.image_path for p in ds.pages}
    first_page = ds.pages[0].image_path
    assert preds[first_page][0].bbox == BBox(10, 20, 40, 60)
    assert preds[first_page][0].confidence == 0.75
    assert preds[first_page][0].label is LayoutClass.TABLE

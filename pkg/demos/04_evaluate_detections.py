"""Detection scoring: simulate an imperfect detector and print the
precision / recall / mAP50 / mAP50-95 table."""

import random
from pathlib import Path

from docsynth import (
    BBox,
    Detection,
    GenConfig,
    build_bank,
    evaluate,
    generate_dataset,
    parse_manifest,
)

from _shared import make_toy_corpus

here = Path(__file__).parent
out = here / "output" / "04_evaluate"

manifest = make_toy_corpus(out / "source", seed=9)
bank = build_bank(parse_manifest(manifest), out / "source")
gts, _ = generate_dataset(bank, GenConfig(page_count=12, master_seed=9), out / "dataset")

# A pretend detector: jitter most boxes a little, miss some, hallucinate a few.
rng = random.Random(123)
predictions = {}
for page in gts.pages:
    dets = []
    for el in page.elements:
        if rng.random() < 0.10:
            continue  # missed detection
        d = rng.uniform(-6, 6)
        b = el.bbox
        dets.append(Detection(
            bbox=BBox(max(0, b.x_min + d), max(0, b.y_min + d), b.x_max + d, b.y_max + d),
            label=el.label,
            confidence=round(rng.uniform(0.4, 0.99), 3),
        ))
    for _ in range(rng.randrange(2)):  # false positive
        x0, y0 = rng.randint(0, 900), rng.randint(0, 1300)
        dets.append(Detection(
            bbox=BBox(x0, y0, x0 + 80, y0 + 40),
            label=rng.choice(list(page.elements[0].label.__class__)),
            confidence=round(rng.uniform(0.05, 0.5), 3),
        ))
    predictions[page.image_path] = dets

report = evaluate(predictions, gts, conf_thresh=0.25)
print(report.format_table())
print(f"\nmAP50 {report.map50:.3f}, mAP50-95 {report.map50_95:.3f} "
      f"over {report.pages_evaluated} pages")

# Perfect predictions score exactly 1.0 everywhere:
perfect = {
    p.image_path: [Detection(el.bbox, el.label, 1.0) for el in p.elements]
    for p in gts.pages
}
print("perfect detector mAP50-95:", evaluate(perfect, gts).map50_95)

"""Annotation format round trips: manifest CSV <-> COCO JSON <-> YOLO labels.

The three formats share one in-memory dataset shape; corner boxes survive
COCO exactly and YOLO within its 6-decimal normalized quantization.
"""

from pathlib import Path

from docsynth import (
    parse_manifest,
    read_coco,
    read_yolo_labels,
    validate,
    write_coco,
    write_manifest,
    write_yolo_labels,
)

from _shared import make_toy_corpus

here = Path(__file__).parent
out = here / "output" / "03_roundtrip"

manifest = make_toy_corpus(out / "source", seed=8)
original = parse_manifest(manifest)

# manifest -> COCO -> back
write_coco(original, out / "as_coco.json")
from_coco = read_coco(out / "as_coco.json")
print("COCO round trip identical:", from_coco == original)

# manifest -> YOLO -> back (needs the images for their dimensions)
write_yolo_labels(original, out / "as_yolo")
from_yolo_dir = read_yolo_labels(out / "as_yolo", out / "source")

worst = 0.0
by_path = {p.image_path: p for p in from_yolo_dir.pages}
for page in original.pages:
    for a, b in zip(page.elements, by_path[page.image_path].elements):
        assert a.label == b.label
        worst = max(worst, *(abs(x - y) / s for x, y, s in zip(
            a.bbox.as_tuple(), b.bbox.as_tuple(),
            (page.width, page.height, page.width, page.height))))
print(f"YOLO round trip: worst normalized deviation {worst:.2e} (quantization is 1e-6)")

# and back out to a manifest again, still clean
write_manifest(from_coco, out / "again.csv")
print("re-parsed manifest violations:", len(validate(parse_manifest(out / "again.csv"))))

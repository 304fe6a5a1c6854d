"""Label-noise injection: class flips and box jitter for robustness studies.

Noise is applied after rendering, so the pixels stay truthful while the
labels lie, which is the point of the exercise.
"""

from pathlib import Path

from docsynth import (
    GenConfig,
    NoiseConfig,
    SplitMix64,
    build_bank,
    class_distribution,
    generate_dataset,
    inject_label_noise,
    parse_manifest,
)

from _shared import make_toy_corpus

here = Path(__file__).parent
out = here / "output" / "05_noise"

manifest = make_toy_corpus(out / "source", seed=10)
bank = build_bank(parse_manifest(manifest), out / "source")

clean, _ = generate_dataset(bank, GenConfig(page_count=10, master_seed=3), out / "clean")

# Same seed, same pages, but 30% class flips and 8 px of box jitter baked
# into the emitted labels.
noisy_cfg = GenConfig(
    page_count=10, master_seed=3,
    noise=NoiseConfig(class_flip_prob=0.3, bbox_jitter_px=8.0),
)
noisy, report = generate_dataset(bank, noisy_cfg, out / "noisy")

flips = moved = total = 0
for cp, np_ in zip(clean.pages, noisy.pages):
    for a, b in zip(cp.elements, np_.elements):
        total += 1
        flips += a.label != b.label
        moved += a.bbox != b.bbox
print(f"{total} elements: {flips} flipped labels ({flips / total:.1%}), "
      f"{moved} jittered boxes ({moved / total:.1%})")
noisy_pct = class_distribution(noisy).percentages
print("noisy distribution:", {c.value: p for c, p in noisy_pct.items()})

# The same operator works on in-memory elements, outside the generator:
elements = [el for page in clean.pages for el in page.elements]
flipped_only = inject_label_noise(
    elements, NoiseConfig(class_flip_prob=1.0), SplitMix64(99), 1224, 1584
)
print("flip_prob=1.0 changes every label:",
      all(a.label != b.label for a, b in zip(flipped_only, elements)))

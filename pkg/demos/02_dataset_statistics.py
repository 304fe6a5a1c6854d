"""Dataset statistics: class distribution, per-page fill, and the table that
the half-up percentage rounding reproduces from raw counts."""

from pathlib import Path

from docsynth import (
    GenConfig,
    LayoutClass,
    build_bank,
    class_distribution,
    generate_dataset,
    page_stats,
    parse_manifest,
    percentages_from_counts,
)

from _shared import make_toy_corpus

here = Path(__file__).parent
out = here / "output" / "02_stats"

manifest = make_toy_corpus(out / "source", seed=6)
bank = build_bank(parse_manifest(manifest), out / "source")
dataset, _ = generate_dataset(bank, GenConfig(page_count=16, master_seed=7), out / "dataset")

stats = class_distribution(dataset)
print(stats.format_table())
print(f"\npages: {stats.pages}")
print(f"mean elements/page: {stats.mean_elements_per_page:.2f}")
print(f"mean fill ratio:    {stats.mean_fill_ratio:.4f}")

per_page, _ = page_stats(dataset)
busiest = max(per_page, key=lambda p: p.fill_ratio)
print(f"fullest page: {busiest.image_path} "
      f"({busiest.element_count} elements, fill {busiest.fill_ratio:.3f})")

# The same rounding applied to a fixed count table (the published reference
# corpus distribution the default sampling weights come from):
reference = {
    LayoutClass.TEXT: 95_227,
    LayoutClass.TITLE: 45_306,
    LayoutClass.LIST: 23_090,
    LayoutClass.TABLE: 22_146,
    LayoutClass.FIGURE: 23_493,
}
reference_pct = percentages_from_counts(reference)
print("\nreference counts ->", {c.value: p for c, p in reference_pct.items()})

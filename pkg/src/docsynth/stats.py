"""Dataset summary statistics: class counts/percentages and page-level fill.

Percentages are rounded half-up to two decimals for presentation; the raw
ratios are kept alongside because rounding loses up to half a unit in the
last place and downstream tooling may want the exact values.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .annot_io import CLASS_ORDER, Dataset, LayoutClass


@dataclass(frozen=True)
class PageStats:
    image_path: str
    element_count: int
    fill_ratio: float  # sum of element areas / page area


@dataclass(frozen=True)
class DatasetStats:
    counts: dict[LayoutClass, int]
    ratios: dict[LayoutClass, float]
    percentages: dict[LayoutClass, float]  # half-up, 2 decimals
    total_elements: int
    pages: int
    mean_elements_per_page: float
    mean_fill_ratio: float

    def to_dict(self) -> dict:
        return {
            "counts": {c.value: self.counts[c] for c in CLASS_ORDER},
            "ratios": {c.value: self.ratios[c] for c in CLASS_ORDER},
            "percentages": {c.value: self.percentages[c] for c in CLASS_ORDER},
            "total_elements": self.total_elements,
            "pages": self.pages,
            "mean_elements_per_page": self.mean_elements_per_page,
            "mean_fill_ratio": self.mean_fill_ratio,
        }

    def format_table(self) -> str:
        rows = [("label", "count", "percent")]
        for c in CLASS_ORDER:
            rows.append((c.value, str(self.counts[c]), f"{self.percentages[c]:.2f}"))
        rows.append(("total", str(self.total_elements), "100.00" if self.total_elements else "0.00"))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def round_percent(count: int, total: int) -> float:
    """100 * count / total, rounded half-up to 2 decimals (0 for empty total)."""
    if total == 0:
        return 0.0
    value = Decimal(count * 100) / Decimal(total)
    return float(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def percentages_from_counts(counts: dict[LayoutClass, int]) -> dict[LayoutClass, float]:
    """Per-class percentage table straight from raw counts."""
    total = sum(counts.values())
    return {c: round_percent(counts.get(c, 0), total) for c in CLASS_ORDER}


def class_distribution(dataset: Dataset) -> DatasetStats:
    """Tally elements per class and derive percentages plus page aggregates."""
    counts = {c: 0 for c in CLASS_ORDER}
    for _, element in dataset.iter_elements():
        counts[element.label] += 1
    total = sum(counts.values())
    ratios = {c: (counts[c] / total if total else 0.0) for c in CLASS_ORDER}
    percentages = percentages_from_counts(counts)
    per_page, aggregates = page_stats(dataset)
    return DatasetStats(
        counts=counts,
        ratios=ratios,
        percentages=percentages,
        total_elements=total,
        pages=len(dataset.pages),
        mean_elements_per_page=aggregates["mean_elements_per_page"],
        mean_fill_ratio=aggregates["mean_fill_ratio"],
    )


def page_stats(dataset: Dataset) -> tuple[list[PageStats], dict]:
    """Per-page element counts and fill ratios, plus their arithmetic means."""
    per_page = []
    for page in dataset.pages:
        page_area = page.width * page.height
        covered = sum(el.bbox.width * el.bbox.height for el in page.elements)
        per_page.append(PageStats(
            image_path=page.image_path,
            element_count=len(page.elements),
            fill_ratio=covered / page_area if page_area else 0.0,
        ))
    n = len(per_page)
    aggregates = {
        "mean_elements_per_page": sum(p.element_count for p in per_page) / n if n else 0.0,
        "mean_fill_ratio": sum(p.fill_ratio for p in per_page) / n if n else 0.0,
    }
    return per_page, aggregates

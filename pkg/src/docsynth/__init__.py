"""docsynth: synthetic document-layout dataset generation and evaluation.

Pipeline in one breath: parse a labeled source corpus, extract element crops
into a class-indexed bank, compose new pages by shelf-placing sampled crops
on blank canvases with remapped annotations, then summarize, validate and
score datasets in manifest/COCO/YOLO form.
"""

from .annot_io import (
    CLASS_ORDER,
    DEFAULT_CLASS_MAP,
    AnnotatedPage,
    Dataset,
    LayoutClass,
    LayoutElement,
    ValidationPolicy,
    Violation,
    parse_manifest,
    read_coco,
    read_yolo_labels,
    validate,
    write_coco,
    write_manifest,
    write_yolo_labels,
)
from .composer import (
    GenConfig,
    NoiseConfig,
    Placement,
    PlacementPlan,
    generate_dataset,
    inject_label_noise,
    load_gen_config,
    render,
    seed_derive,
    smart_plot,
)
from .crop_bank import (
    DEFAULT_CLASS_WEIGHTS,
    ClassWeights,
    Crop,
    CropBank,
    build_bank,
    load_bank,
    sample_class,
    sample_crop,
    save_bank,
)
from .errors import DocsynthError
from .geometry import BBox, YoloBox, area, from_yolo, intersect, iou, to_yolo, translate
from .metrics import (
    Detection,
    EvalReport,
    average_precision,
    evaluate,
    match_detections,
    read_coco_predictions,
    read_yolo_predictions,
)
from .rng import SplitMix64, derive_seed
from .stats import DatasetStats, class_distribution, page_stats, percentages_from_counts

__version__ = "0.1.0"

__all__ = [
    "AnnotatedPage",
    "BBox",
    "CLASS_ORDER",
    "ClassWeights",
    "Crop",
    "CropBank",
    "DEFAULT_CLASS_MAP",
    "DEFAULT_CLASS_WEIGHTS",
    "Dataset",
    "DatasetStats",
    "Detection",
    "DocsynthError",
    "EvalReport",
    "GenConfig",
    "LayoutClass",
    "LayoutElement",
    "NoiseConfig",
    "Placement",
    "PlacementPlan",
    "SplitMix64",
    "ValidationPolicy",
    "Violation",
    "YoloBox",
    "area",
    "average_precision",
    "build_bank",
    "class_distribution",
    "derive_seed",
    "evaluate",
    "from_yolo",
    "generate_dataset",
    "inject_label_noise",
    "intersect",
    "iou",
    "load_bank",
    "load_gen_config",
    "match_detections",
    "page_stats",
    "parse_manifest",
    "percentages_from_counts",
    "read_coco",
    "read_coco_predictions",
    "read_yolo_labels",
    "read_yolo_predictions",
    "render",
    "sample_class",
    "sample_crop",
    "save_bank",
    "seed_derive",
    "smart_plot",
    "to_yolo",
    "translate",
    "validate",
    "write_coco",
    "write_manifest",
    "write_yolo_labels",
]

"""Command-line entry point: generate, bank, stats, validate, convert, evaluate.

Exit codes are part of the contract: 0 success, 1 data error (bad input
content, violations found), 2 usage error (bad flags, unresolvable paths).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .annot_io import (
    Dataset,
    ValidationPolicy,
    parse_manifest,
    read_coco,
    read_yolo_labels,
    validate,
    write_coco,
    write_manifest,
    write_yolo_labels,
)
from .composer import generate_dataset, load_gen_config, parse_weights_csv
from .crop_bank import DEFAULT_MIN_CROP_PX, build_bank, load_bank, save_bank
from .errors import DocsynthError
from .metrics import (
    DEFAULT_CONF_THRESH,
    evaluate,
    read_coco_predictions,
    read_yolo_predictions,
)
from .stats import class_distribution

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE = 2


def _detect_format(path: Path) -> str:
    if path.is_dir():
        return "yolo"
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return "manifest"
    if suffix == ".json":
        return "coco"
    raise ValueError(f"cannot auto-detect format of {path} (use --format)")


def _resolve_yolo_dirs(path: Path, images_flag) -> tuple[Path, Path]:
    """A YOLO input is either a root with images/ and labels/, or a labels
    dir plus an explicit --images."""
    if (path / "labels").is_dir() and (path / "images").is_dir():
        return path / "labels", path / "images"
    if images_flag is None:
        raise ValueError(
            f"{path} has no images/+labels/ layout; pass --images for the image directory"
        )
    return path, Path(images_flag)


def load_dataset(path, fmt: str | None = None, images=None) -> Dataset:
    """Load a dataset in any supported format (auto-detected by default)."""
    path = Path(path)
    fmt = fmt or _detect_format(path)
    if fmt == "manifest":
        return parse_manifest(path)
    if fmt == "coco":
        return read_coco(path)
    if fmt == "yolo":
        labels_dir, images_dir = _resolve_yolo_dirs(path, images)
        return read_yolo_labels(labels_dir, images_dir)
    raise ValueError(f"unknown format {fmt!r}")


def _require_exists(parser: argparse.ArgumentParser, path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        parser.error(f"{what} {path} does not exist")
    return path


def _add_input_args(sub, with_format=True):
    sub.add_argument("--input", required=True, help="dataset: manifest .csv, COCO .json, or YOLO dir")
    sub.add_argument("--images", help="image directory (YOLO inputs without an images/ subdir)")
    if with_format:
        sub.add_argument("--format", choices=["manifest", "coco", "yolo"],
                         help="override input format auto-detection")


def _gen_overrides(args) -> dict:
    weights = parse_weights_csv(args.class_weights) if args.class_weights else None
    return {
        "canvas_w": args.canvas_w,
        "canvas_h": args.canvas_h,
        "gap": args.gap,
        "margin": args.margin,
        "max_elements_per_page": args.max_elements,
        "max_rejections": args.max_rejections,
        "scale_to_fit": args.scale_to_fit,
        "class_weights": weights,
        "page_count": args.pages,
        "master_seed": args.seed,
        "noise_class_flip_prob": args.flip_prob,
        "noise_bbox_jitter_px": args.jitter_px,
    }


def _load_source_bank(parser, args):
    if args.bank:
        return load_bank(_require_exists(parser, args.bank, "bank directory"))
    source = _require_exists(parser, args.source, "source dataset")
    images = Path(args.images) if args.images else source.parent
    dataset = load_dataset(source, fmt=args.format, images=images)
    bank = build_bank(
        dataset, images,
        min_crop_px=args.min_crop_px,
        whole_pages=args.whole_pages,
    )
    return bank


def cmd_generate(parser, args) -> int:
    config_path = None
    if args.config:
        config_path = _require_exists(parser, args.config, "config file")
    if args.seed is None and "master_seed" not in _config_file_keys(config_path):
        parser.error("--seed is required (or set master_seed in the config file); "
                     "generation never draws silent entropy")
    cfg = load_gen_config(config_path, overrides=_gen_overrides(args))
    bank = _load_source_bank(parser, args)
    if bank.total() == 0:
        print("error: empty crop bank (no usable element crops in the source)",
              file=sys.stderr)
        return EXIT_DATA_ERROR
    dataset, report = generate_dataset(
        bank, cfg, args.out,
        write_coco_file=args.coco,
        workers=args.workers,
    )
    total = dataset.element_count()
    print(f"generated {len(dataset.pages)} pages, {total} elements -> {args.out}")
    if args.verbose:
        print(json.dumps(report["stats"]["percentages"], indent=2))
    return EXIT_OK


def _config_file_keys(config_path) -> set[str]:
    if config_path is None:
        return set()
    keys = set()
    for line in Path(config_path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if "=" in line:
            keys.add(line.split("=", 1)[0].strip())
    return keys


def cmd_bank(parser, args) -> int:
    source = _require_exists(parser, args.source, "source dataset")
    images = Path(args.images) if args.images else source.parent
    dataset = load_dataset(source, fmt=args.format, images=images)
    bank = build_bank(
        dataset, images,
        min_crop_px=args.min_crop_px,
        whole_pages=args.whole_pages,
    )
    save_bank(bank, args.out)
    counts = bank.counts()
    for cls, n in counts.items():
        print(f"{cls.value}: {n} crops, {bank.skipped[cls]} skipped")
    print(f"saved {bank.total()} crops -> {args.out}")
    return EXIT_OK


def cmd_stats(parser, args) -> int:
    path = _require_exists(parser, args.input, "input dataset")
    dataset = load_dataset(path, fmt=args.format, images=args.images)
    stats = class_distribution(dataset)
    print(stats.format_table())
    print(f"\npages: {stats.pages}  "
          f"mean elements/page: {stats.mean_elements_per_page:.2f}  "
          f"mean fill ratio: {stats.mean_fill_ratio:.4f}")
    if args.json:
        Path(args.json).write_text(
            json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def cmd_validate(parser, args) -> int:
    path = _require_exists(parser, args.input, "input dataset")
    dataset = load_dataset(path, fmt=args.format, images=args.images)
    violations = validate(dataset, ValidationPolicy(no_overlap=args.no_overlap))
    for v in violations:
        print(f"{v.kind}: {v.image_path}: {v.message}")
    if violations:
        print(f"{len(violations)} violation(s) found", file=sys.stderr)
        return EXIT_DATA_ERROR
    print(f"OK: {len(dataset.pages)} pages, {dataset.element_count()} elements, "
          f"0 violations")
    return EXIT_OK


def cmd_convert(parser, args) -> int:
    path = _require_exists(parser, args.input, "input dataset")
    dataset = load_dataset(path, fmt=args.format, images=args.images)
    out = Path(args.output)
    if args.to == "manifest":
        write_manifest(dataset, out)
    elif args.to == "coco":
        write_coco(dataset, out)
    elif args.to == "yolo":
        write_yolo_labels(dataset, out)
    print(f"wrote {args.to} -> {out}")
    return EXIT_OK


def cmd_evaluate(parser, args) -> int:
    gt_path = _require_exists(parser, args.gt, "ground-truth dataset")
    preds_path = _require_exists(parser, args.preds, "predictions")
    gts = load_dataset(gt_path, fmt=args.gt_format, images=args.images)

    pred_format = args.pred_format
    if pred_format is None:
        pred_format = "coco" if preds_path.suffix.lower() == ".json" else "yolo"
    if pred_format == "coco":
        if (args.gt_format or _detect_format(gt_path)) != "coco":
            parser.error("COCO results predictions need a COCO ground-truth file "
                         "(image ids resolve against it)")
        predictions = read_coco_predictions(preds_path, gt_path)
    else:
        labels_dir, images_dir = _resolve_yolo_dirs(preds_path, args.pred_images or args.images)
        predictions = read_yolo_predictions(labels_dir, images_dir)

    report = evaluate(predictions, gts, conf_thresh=args.conf)
    print(report.format_table())
    if report.gt_only_pages or report.pred_only_pages:
        print(f"\nwarning: {len(report.gt_only_pages)} ground-truth-only and "
              f"{len(report.pred_only_pages)} prediction-only pages were skipped",
              file=sys.stderr)
    if args.json:
        Path(args.json).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docsynth",
        description="Synthetic document-layout dataset generation and evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    gen = subparsers.add_parser("generate", help="compose synthetic pages from a source corpus")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--source", help="source annotations: manifest .csv or COCO .json")
    src.add_argument("--bank", help="previously saved crop bank directory")
    gen.add_argument("--images", help="source image root (default: alongside --source)")
    gen.add_argument("--format", choices=["manifest", "coco", "yolo"],
                     help="source format override")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--config", help="generation config file (key = value, versioned)")
    gen.add_argument("--pages", type=int, help="number of pages to generate")
    gen.add_argument("--seed", type=int, help="master seed; required unless the config file sets it")
    gen.add_argument("--canvas-w", type=int, help="canvas width in px")
    gen.add_argument("--canvas-h", type=int, help="canvas height in px")
    gen.add_argument("--gap", type=int, help="min spacing between placed crops in px")
    gen.add_argument("--margin", type=int, help="empty border around the canvas in px")
    gen.add_argument("--max-elements", type=int, help="max placements per page")
    gen.add_argument("--max-rejections", type=int,
                     help="consecutive failed placements that end a page")
    gen.add_argument("--scale-to-fit", action=argparse.BooleanOptionalAction, default=None,
                     help="downscale crops wider than the usable width")
    gen.add_argument("--class-weights",
                     help="five comma-separated sampling weights (text,title,list,table,figure)")
    gen.add_argument("--flip-prob", type=float, help="label-noise class flip probability")
    gen.add_argument("--jitter-px", type=float, help="label-noise bbox jitter in px")
    gen.add_argument("--min-crop-px", type=int, default=DEFAULT_MIN_CROP_PX,
                     help="skip source elements smaller than this")
    gen.add_argument("--whole-pages", action="store_true",
                     help="bank whole source pages instead of element crops")
    gen.add_argument("--coco", action="store_true", help="also write annotations.json")
    gen.add_argument("--workers", type=int, default=1, help="parallel page workers")
    gen.add_argument("-v", "--verbose", action="store_true")
    gen.set_defaults(func=cmd_generate)

    bank = subparsers.add_parser("bank", help="extract and cache a crop bank")
    bank.add_argument("--source", required=True, help="source annotations: manifest .csv or COCO .json")
    bank.add_argument("--images", help="source image root (default: alongside --source)")
    bank.add_argument("--format", choices=["manifest", "coco", "yolo"])
    bank.add_argument("--out", required=True, help="bank output directory")
    bank.add_argument("--min-crop-px", type=int, default=DEFAULT_MIN_CROP_PX)
    bank.add_argument("--whole-pages", action="store_true")
    bank.set_defaults(func=cmd_bank)

    stats = subparsers.add_parser("stats", help="print class count/percentage table")
    _add_input_args(stats)
    stats.add_argument("--json", help="also write the stats as JSON")
    stats.set_defaults(func=cmd_stats)

    val = subparsers.add_parser("validate", help="check dataset invariants")
    _add_input_args(val)
    val.add_argument("--no-overlap", action="store_true",
                     help="additionally require pairwise zero overlap per page")
    val.set_defaults(func=cmd_validate)

    conv = subparsers.add_parser("convert", help="convert between manifest/COCO/YOLO")
    _add_input_args(conv)
    conv.add_argument("--to", required=True, choices=["manifest", "coco", "yolo"])
    conv.add_argument("--output", required=True,
                      help="output file (.csv/.json) or directory (yolo)")
    conv.set_defaults(func=cmd_convert)

    ev = subparsers.add_parser("evaluate", help="score predictions against ground truth")
    ev.add_argument("--gt", required=True, help="ground-truth dataset (any format)")
    ev.add_argument("--gt-format", choices=["manifest", "coco", "yolo"])
    ev.add_argument("--images", help="image dir for YOLO ground truth")
    ev.add_argument("--preds", required=True,
                    help="predictions: YOLO dir with confidence column, or COCO results .json")
    ev.add_argument("--pred-format", choices=["yolo", "coco"])
    ev.add_argument("--pred-images", help="image dir for YOLO predictions "
                                          "(default: same as --images)")
    ev.add_argument("--conf", type=float, default=DEFAULT_CONF_THRESH,
                    help="confidence threshold for the precision/recall columns")
    ev.add_argument("--json", help="also write the full report as JSON")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except DocsynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Exception types raised across the package.

Everything derives from :class:`DocsynthError` so callers (notably the CLI)
can distinguish data problems from genuine bugs with a single except clause.
File-oriented errors carry ``path`` and, where meaningful, a 1-based ``line``
so diagnostics point at the offending input row.
"""

from __future__ import annotations


class DocsynthError(Exception):
    """Base class for all data and configuration errors."""


class FileContextError(DocsynthError):
    """Error tied to a specific input file (and optionally a line)."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


# geometry ------------------------------------------------------------------

class OutOfCanvas(DocsynthError):
    """A box operation produced coordinates outside the allowed canvas."""


class MalformedFile(FileContextError):
    """Structurally broken input file (bad JSON, missing sections, duplicate
    identifiers)."""


# manifest CSV ---------------------------------------------------------------

class MalformedRow(FileContextError):
    """Wrong column count, bad header, or an unparseable cell value."""


class NegativeOrInvertedBox(FileContextError):
    """Box with non-positive width/height or negative coordinates."""


class UnknownClassLabel(FileContextError):
    """Class label not among the supported layout classes."""


class MissingImageDimension(FileContextError):
    """Empty width/height cell for an image row."""


class OutOfBoundsBox(FileContextError):
    """Box exceeds its page bounds beyond the clamping tolerance."""


# COCO -----------------------------------------------------------------------

class UnmappableCategory(FileContextError):
    """COCO category name that maps onto none of the supported classes."""


class DanglingImageId(FileContextError):
    """Annotation referencing an image id absent from the images table."""


class NonPositiveBoxDims(FileContextError):
    """COCO bbox with width or height <= 0."""


# YOLO labels ----------------------------------------------------------------

class OutOfRangeNormalizedValue(FileContextError):
    """Normalized YOLO value outside [0, 1] beyond tolerance."""


class UnknownClassId(FileContextError):
    """Integer class id absent from the class map."""


class ImageLabelMismatch(FileContextError):
    """Label file without a matching image (or vice versa where required)."""


# crop bank ------------------------------------------------------------------

class ImageUnreadable(FileContextError):
    """Referenced source image missing or undecodable."""


class DimensionMismatch(FileContextError):
    """Actual raster dimensions disagree with the annotated dimensions."""


class EmptyClass(DocsynthError):
    """Sampling requested from a class with no crops in the bank."""


# composer -------------------------------------------------------------------

class UnplaceableConfig(DocsynthError):
    """No crop of any positive-weight class fits an empty canvas."""


class ConfigError(FileContextError):
    """Malformed or unsupported generation config file."""


# evaluation -----------------------------------------------------------------

class PageSetMismatchWarning(UserWarning):
    """Prediction and ground-truth page sets differ; evaluation proceeds on
    the intersection."""

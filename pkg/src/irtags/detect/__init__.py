"""Binarization sweep, quad localization and tag decoding for IR images."""

from .filters import ClaheParams, adaptive_threshold, clahe, gaussian_blur, gaussian_kernel, gaussian_sigma
from .pipeline import (
    DEFAULT_COMBOS,
    DetectionResult,
    FilterCombo,
    binarize,
    combo_grid,
    combos_hash,
    detect_tags,
    format_combos,
    load_combos,
    parse_combos,
    sample_grid,
)
from .quads import QuadParams, find_quads, homography, trace_outer_border

__all__ = [
    "ClaheParams",
    "DEFAULT_COMBOS",
    "DetectionResult",
    "FilterCombo",
    "QuadParams",
    "adaptive_threshold",
    "binarize",
    "clahe",
    "combo_grid",
    "combos_hash",
    "detect_tags",
    "find_quads",
    "format_combos",
    "gaussian_blur",
    "gaussian_kernel",
    "gaussian_sigma",
    "homography",
    "load_combos",
    "parse_combos",
    "sample_grid",
    "trace_outer_border",
]

"""Contrast measurements, mu_vis calibration and parameter sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import EmptyRoi, NoBracket
from ..meshops import Material
from ..tagcodes import BitMatrix, Family, TagSpec
from .optics import Band, MaterialOptics
from .render import path_lengths, radiance, render
from .scenes import SceneTemplate

Roi = tuple[int, int, int, int]  # x0, y0, x1, y1, half open

CALIBRATION_T_SHELL = 1.32
CALIBRATION_CONTRAST = 0.05
CHECKER_CELLS = 16
CHECKER_CELL_MM = 1.0
CHECKER_CELL_PX = 10.0
# visible-band lighting used for the invisibility calibration
VIS_INTENSITY = 1.5
VIS_AMBIENT = 20.0
# infrared lighting for the checkerboard binarization curve
CHECKER_NIR_INTENSITY = 0.3


def _roi_values(img: np.ndarray, rois) -> np.ndarray:
    img = np.asarray(img, float)
    if isinstance(rois, np.ndarray) and rois.dtype == bool:
        if rois.shape != img.shape:
            raise EmptyRoi("ROI mask does not match the image")
        vals = img[rois]
    else:
        parts = []
        h, w = img.shape
        for x0, y0, x1, y1 in rois:
            if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
                raise EmptyRoi(f"ROI {(x0, y0, x1, y1)} is empty or outside the {w}x{h} image")
            parts.append(img[y0:y1, x0:x1].ravel())
        vals = np.concatenate(parts) if parts else np.zeros(0)
    if vals.size == 0:
        raise EmptyRoi("no pixels in ROI")
    return vals


def michelson_contrast(img: np.ndarray, bright_rois, dark_rois) -> float:
    """(mean_bright - mean_dark) / (mean_bright + mean_dark).

    ROIs are boolean masks or lists of half-open ``(x0, y0, x1, y1)`` boxes.
    """
    b = _roi_values(img, bright_rois).mean()
    d = _roi_values(img, dark_rois).mean()
    if b + d == 0:
        return 0.0
    return float((b - d) / (b + d))


def module_rois(template: SceneTemplate, shape: tuple[int, int], fraction: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Masks over the centers of the light and dark modules, ``fraction`` of a module wide."""
    centers = template.module_centers_px()
    n = template.matrix.size
    pitch = np.hypot(*(centers[0, -1] - centers[0, 0])) / max(n - 1, 1)
    r = max(0, int(fraction * pitch / 2))
    light = np.zeros(shape, bool)
    dark = np.zeros(shape, bool)
    h, w = shape
    bits = template.matrix.bits
    for (x, y), is_dark in zip(np.rint(centers).reshape(-1, 2).astype(int), bits.ravel()):
        if not (0 <= x < w and 0 <= y < h):
            continue
        target = dark if is_dark else light
        target[max(0, y - r): y + r + 1, max(0, x - r): x + r + 1] = True
    return light, dark


def checkerboard(n: int = CHECKER_CELLS) -> BitMatrix:
    r, c = np.indices((n, n))
    return BitMatrix((r + c) % 2 == 1)


def checker_template(t_shell: float, band: Band = Band.NIR, **kw) -> SceneTemplate:
    """Multi-material white checkerboard under a ``t_shell`` mm shell, filling the frame."""
    width = CHECKER_CELLS * CHECKER_CELL_MM
    base = dict(
        bits=checkerboard(), mode="multi", code_color="white", marker_width=width, t_shell=float(t_shell),
        quiet_zone=0, band=band, plate_margin=0.5 * width,
        intensity=VIS_INTENSITY if band is Band.VIS else CHECKER_NIR_INTENSITY,
        ambient=VIS_AMBIENT if band is Band.VIS else 4.0,
    )
    base.update(kw)
    t = SceneTemplate(**base)
    return t.replace(distance=t.focal_px * CHECKER_CELL_MM / CHECKER_CELL_PX if "distance" not in kw else kw["distance"])


def checker_contrast(optics: MaterialOptics, t_shell: float, band: Band = Band.VIS, **kw) -> float:
    """Noise-free Michelson contrast between light and dark checkerboard cells."""
    t = checker_template(t_shell, band, **kw)
    cam = t.camera()
    img = radiance(path_lengths(t.geometry()[0], cam), optics, t.illumination(), cam.psf_sigma)
    light, dark = module_rois(t, img.shape)
    return michelson_contrast(img, light, dark)


def calibrate_mu_vis(optics: MaterialOptics | None = None, bracket: tuple[float, float] = (0.05, 20.0),
                     t_shell: float = CALIBRATION_T_SHELL, target: float = CALIBRATION_CONTRAST,
                     tol: float = 1e-4, max_iter: int = 60) -> float:
    """IR-PLA visible attenuation that gives ``target`` contrast at ``t_shell``, by bisection."""
    optics = optics or MaterialOptics.default()

    def f(mu):
        return checker_contrast(optics.with_mu_vis(Material.IR_PLA, mu), t_shell, Band.VIS) - target

    lo, hi = bracket
    flo, fhi = f(lo), f(hi)
    if not (flo > 0 > fhi):
        raise NoBracket(f"contrast at mu_vis {lo} and {hi} does not straddle {target} ({flo + target:.4f}, {fhi + target:.4f})")
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) <= tol:
            break
        if fm > 0:
            lo = mid
        else:
            hi = mid
    return mid


def binarization_accuracy(optics: MaterialOptics, t_shell: float, seeds=range(4), combo=None,
                          binarize_fn: Callable | None = None, **kw) -> float:
    """Share of checkerboard cells read back correctly from the binarized NIR image."""
    from ..detect import FilterCombo, binarize, sample_grid

    binarize_fn = binarize_fn or binarize
    combo = combo or FilterCombo(3, 23)
    t = checker_template(t_shell, Band.NIR, **kw)
    cam = t.camera()
    lengths = path_lengths(t.geometry()[0], cam)
    quad = t.corners_px()
    truth = t.matrix.bits
    scores = []
    for seed in seeds:
        img = render(None, optics, cam, t.illumination(), seed=seed, lengths=lengths)
        got = sample_grid(binarize_fn(img, combo), quad, truth.shape[0], threshold=128)
        scores.append((got.bits == truth).mean())
    return float(np.mean(scores))


@dataclass(frozen=True)
class SweepRow:
    value: float
    detected: bool
    contrast: float
    combo_index: int


def tag_matches(result, tag: TagSpec) -> bool:
    if result.family is not tag.family:
        return False
    if tag.family is Family.ARUCO:
        return result.marker_id == tag.marker_id
    return result.payload == tag.payload


SWEEP_VARIABLES = ("t_shell", "distance", "marker_width", "intensity")


def evaluate(template: SceneTemplate, optics: MaterialOptics, detect_fn: Callable | None = None, combos=None) -> tuple[bool, float, int]:
    """Render one configuration and report (detected, contrast, combo index)."""
    if detect_fn is None:
        from ..detect import detect_tags as detect_fn
    from ..detect import DEFAULT_COMBOS

    combos = list(DEFAULT_COMBOS if combos is None else combos)
    cam = template.camera()
    img = render(template.geometry()[0], optics, cam, template.illumination(), seed=template.seed)
    try:
        light, dark = module_rois(template, img.shape)
        contrast = michelson_contrast(img, light, dark)
    except EmptyRoi:
        contrast = math.nan
    results = detect_fn(img, combos)
    for r in results:
        if tag_matches(r, template.tag):
            return True, contrast, combos.index(r.combo_used)
    return False, contrast, -1


def sweep(template: SceneTemplate, variable: str, values, optics: MaterialOptics | None = None,
          detect_fn: Callable | None = None, combos=None, jobs: int = 1) -> list[SweepRow]:
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
    if template.tag is None:
        raise ValueError("sweeps need a tag to check detections against")
    optics = optics or MaterialOptics.default()
    values = [float(v) for v in values]

    def run(v):
        return SweepRow(v, *evaluate(template.replace(**{variable: v}), optics, detect_fn, combos))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(run, values))
    return [run(v) for v in values]


def sweep_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "detected", "contrast", "combo_index"])
    for r in rows:
        w.writerow([f"{r.value:g}", int(r.detected), f"{r.contrast:.6f}", r.combo_index])
    return buf.getvalue()


def parse_range(spec: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop`` (within rounding), or a comma list."""
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        if step <= 0:
            raise ValueError("step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(max(count, 0))]
    return [float(x) for x in spec.split(",") if x.strip()]


@dataclass(frozen=True)
class DistanceCorpus:
    """Seeded captures of one QR code from near to far with hand-held jitter.

    Distances in mm are ``near..far`` scaled by ``scale``; each capture gets
    its own noise seed, in-plane roll and out-of-plane tilt. The light rides
    with the camera, so its intensity falls off as ``(near / d) ** falloff``.
    """

    tag: TagSpec = TagSpec.qr("irtags")
    size: int = 124
    near: float = 150.0
    far: float = 800.0
    scale: float = 1.0
    marker_width: float = 65.0
    mode: str = "single"
    code_color: str | None = None
    max_tilt_deg: float = 20.0
    max_roll_deg: float = 180.0
    intensity: float = 4.0
    falloff: float = 2.0
    seed: int = 0

    def templates(self) -> list[SceneTemplate]:
        rng = np.random.default_rng(self.seed)
        distances = np.linspace(self.near, self.far, self.size) * self.scale
        tilts = rng.uniform(0.0, self.max_tilt_deg, self.size)
        rolls = rng.uniform(-self.max_roll_deg, self.max_roll_deg, self.size)
        base = SceneTemplate(self.tag, mode=self.mode, code_color=self.code_color, marker_width=self.marker_width)
        return [base.replace(distance=float(d), tilt_deg=float(t), roll_deg=float(r), seed=self.seed + i,
                             intensity=self.intensity * (self.near * self.scale / d) ** self.falloff)
                for i, (d, t, r) in enumerate(zip(distances, tilts, rolls))]

    def images(self, optics: MaterialOptics | None = None):
        optics = optics or MaterialOptics.default()
        for t in self.templates():
            yield render(t.geometry()[0], optics, t.camera(), t.illumination(), seed=t.seed)


def combo_success(images, combos, tag: TagSpec, detect_fn: Callable | None = None) -> np.ndarray:
    """(n_images, n_combos) table: whether each combo alone decodes ``tag``."""
    if detect_fn is None:
        from ..detect import detect_tags as detect_fn
    rows = []
    for img in images:
        rows.append([any(tag_matches(r, tag) for r in detect_fn(img, [c])) for c in combos])
    return np.array(rows, bool).reshape(-1, len(combos))


def cumulative_success(table: np.ndarray) -> list[int]:
    """Images decoded by the first k combos, for k = 1..n.

    Short-circuiting sweeps succeed exactly when some combo in the prefix
    decodes, so the prefix union of single-combo outcomes is the sweep result.
    """
    return [int(table[:, :k].any(axis=1).sum()) for k in range(1, table.shape[1] + 1)]

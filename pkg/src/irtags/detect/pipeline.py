"""Filter-combination sweep, bit sampling and decoding."""

from __future__ import annotations

import hashlib
import time
from itertools import combinations
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from shapely.geometry import Point, Polygon

from ..errors import TagCodeError
from ..tagcodes import BitMatrix, Family
from ..tagcodes.aruco import decode_aruco
from ..tagcodes.qr import decode_qr_oriented, finder_score
from .filters import DEFAULT_C, ClaheParams, adaptive_threshold, clahe, gaussian_blur
from .quads import QuadParams, apply_homography, find_quads, grid_homography, is_convex, polygon_area

ARUCO_SIZE = 6
QR_SIZES = (21, 25, 29)
# sub-sample offsets around a cell center, in cell units
_SUB = np.array([-0.25, 0.0, 0.25])
MIN_FINDER_SCORE = 0.8
MIN_FINDER_MATCH = 0.9
MIN_QUIET_LIGHT = 0.75
FINDER_SIZE_RATIO = 1.5


@dataclass(frozen=True)
class FilterCombo:
    ksize: int
    block_size: int

    def __post_init__(self):
        if self.ksize < 1 or self.ksize % 2 == 0:
            raise ValueError(f"ksize must be odd and >= 1, got {self.ksize}")
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ValueError(f"blockSize must be odd and >= 3, got {self.block_size}")

    def to_json(self) -> dict:
        return {"ksize": self.ksize, "blockSize": self.block_size}


def parse_combos(text: str) -> list[FilterCombo]:
    """One ``ksize,blockSize`` pair per line; ``#`` starts a comment."""
    combos = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            k, b = (int(v) for v in line.split(","))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: expected 'ksize,blockSize', got {line!r}") from exc
        combos.append(FilterCombo(k, b))
    if not combos:
        raise ValueError("combo list is empty")
    return combos


def format_combos(combos: list[FilterCombo]) -> str:
    return "".join(f"{c.ksize},{c.block_size}\n" for c in combos)


def load_combos(path: str | Path | None = None) -> list[FilterCombo]:
    if path is None:
        return parse_combos(resources.files("irtags").joinpath("data/combos.txt").read_text())
    return parse_combos(Path(path).read_text())


def combos_hash(combos: list[FilterCombo]) -> str:
    return hashlib.sha256(format_combos(combos).encode()).hexdigest()[:16]


DEFAULT_COMBOS = (FilterCombo(3, 23), FilterCombo(1, 37), FilterCombo(3, 21))


def combo_grid() -> list[FilterCombo]:
    """The wide search space: blur ksize in {1,3,5,7,9} x odd blockSize in 3..79."""
    return [FilterCombo(k, b) for k in (1, 3, 5, 7, 9) for b in range(3, 80, 2)]


def binarize(img: np.ndarray, combo: FilterCombo, clahe_params: ClaheParams | None = None, c: float = DEFAULT_C) -> np.ndarray:
    """CLAHE, then Gaussian blur, then Gaussian adaptive threshold."""
    return adaptive_threshold(gaussian_blur(clahe(img, clahe_params), combo.ksize), combo.block_size, c)


def sample_points(quad: np.ndarray, n: int) -> np.ndarray:
    """(n, n, 9, 2) image positions of the 3x3 sub-samples of every cell."""
    h = grid_homography(quad, n)
    c = np.arange(n) + 0.5
    gx = c[None, :, None, None] + _SUB[None, None, None, :]
    gy = c[:, None, None, None] + _SUB[None, None, :, None]
    gx, gy = np.broadcast_arrays(gx, gy)
    grid = np.stack([gx, gy], axis=-1).reshape(n, n, 9, 2)
    return apply_homography(h, grid)


def otsu_threshold(values: np.ndarray) -> float:
    """Threshold maximizing the between-class variance of 8-bit ``values``."""
    hist = np.bincount(np.asarray(values, np.int64).ravel(), minlength=256).astype(float)
    total = hist.sum()
    w0 = np.cumsum(hist)
    m0 = np.cumsum(hist * np.arange(256))
    w1 = total - w0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (m0[-1] * w0 - m0 * total) ** 2 / (w0 * w1)
    between[~np.isfinite(between)] = -1
    t = int(np.argmax(between))
    return t + 0.5


def sample_grid(img: np.ndarray, quad: np.ndarray, n: int, threshold: float | None = None) -> BitMatrix:
    """Rectify ``quad`` onto an n x n grid; each bit is dark when most of its
    3x3 sub-samples are below ``threshold``.

    Without a threshold, binary images split at 128 and gray images at the
    Otsu level of the sub-samples themselves.
    """
    img = np.asarray(img)
    pts = np.rint(sample_points(quad, n)).astype(np.int64)
    xs = np.clip(pts[..., 0], 0, img.shape[1] - 1)
    ys = np.clip(pts[..., 1], 0, img.shape[0] - 1)
    vals = img[ys, xs]
    if threshold is None:
        binary = np.all((vals == 0) | (vals == 255))
        threshold = 128 if binary else otsu_threshold(vals)
    dark = (vals < threshold).sum(axis=-1)
    return BitMatrix(dark >= 5)


@dataclass
class DetectionResult:
    family: Family
    corners: np.ndarray
    combo_used: FilterCombo
    inverted: bool
    payload: bytes | None = None
    marker_id: int | None = None
    decode_time_ms: float = 0.0

    def to_json(self) -> dict:
        out = {"family": self.family.value}
        if self.family is Family.ARUCO:
            out["id"] = self.marker_id
        else:
            try:
                out["payload"] = self.payload.decode("utf-8")
            except UnicodeDecodeError:
                out["payload_hex"] = self.payload.hex()
        out["corners"] = [[round(float(x), 3), round(float(y), 3)] for x, y in self.corners]
        out["combo"] = self.combo_used.to_json()
        out["inverted"] = self.inverted
        out["decode_time_ms"] = round(self.decode_time_ms, 3)
        return out

    def key(self):
        return (self.family, self.payload, self.marker_id)


def _rotate_corners(corners: np.ndarray, k: int) -> np.ndarray:
    """Corners of the canonical tag when the observed matrix is the canonical
    one turned clockwise ``k`` quarter turns."""
    return np.roll(corners, -k, axis=0)


def grid_quad(quad: np.ndarray, n: int, lo: float, hi: float) -> np.ndarray:
    """Image quad of the grid square [lo, hi]^2 when ``quad`` spans an n-module grid."""
    h = grid_homography(quad, n)
    return apply_homography(h, np.array([[lo, lo], [hi, lo], [hi, hi], [lo, hi]], float))


def _ring(m: BitMatrix) -> np.ndarray:
    b = m.bits
    return np.concatenate([b[0, :], b[-1, :], b[1:-1, 0], b[1:-1, -1]])


@dataclass(frozen=True)
class _Hit:
    family: Family
    corners: np.ndarray
    inverted: bool
    payload: bytes | None = None
    marker_id: int | None = None


def _try_aruco(gray: np.ndarray, quad: np.ndarray) -> _Hit | None:
    n = ARUCO_SIZE
    # the quad is either the marker itself or the outer edge of its quiet ring
    for outer, inner in ((grid_quad(quad, n, -1, n + 1), quad), (quad, grid_quad(quad, n + 2, 1, n + 1))):
        try:
            m = sample_grid(gray, outer, n + 2)
        except TagCodeError:
            continue
        for inverted in (False, True):
            mm = m.invert() if inverted else m
            if 1 - _ring(mm).mean() < MIN_QUIET_LIGHT:
                continue
            try:
                marker_id, rot = decode_aruco(mm.crop(1), border_min=1.0)
            except TagCodeError:
                continue
            return _Hit(Family.ARUCO, _rotate_corners(inner, rot // 90), inverted, marker_id=marker_id)
    return None


def _try_qr(gray: np.ndarray, symbol: np.ndarray, sizes=QR_SIZES, strips=(0, 1), inverted_options=(False, True)) -> _Hit | None:
    for size in sizes:
        for strip in strips:
            n = size + 2 * strip
            try:
                m = sample_grid(gray, symbol, n).crop(strip)
            except TagCodeError:
                continue
            corners = symbol if strip == 0 else grid_quad(symbol, n, strip, n - strip)
            for inverted in inverted_options:
                mm = m.invert() if inverted else m
                if finder_score(mm) < MIN_FINDER_SCORE:
                    continue
                try:
                    payload, k = decode_qr_oriented(mm)
                except TagCodeError:
                    continue
                return _Hit(Family.QR, _rotate_corners(corners, k), inverted, payload=payload)
    return None


_FINDER = BitMatrix(np.array([[max(abs(r - 3), abs(c - 3)) != 2 for c in range(7)] for r in range(7)])).pad(1, dark=False)


def _finders(gray: np.ndarray, quads: list[np.ndarray]) -> list[tuple[np.ndarray, bool]]:
    """Quads that look like a QR finder pattern inside a light margin."""
    out = []
    for quad in quads:
        try:
            m = sample_grid(gray, grid_quad(quad, 7, -1, 8), 9)
        except TagCodeError:
            continue
        for inverted in (False, True):
            mm = m.invert() if inverted else m
            if (mm.bits == _FINDER.bits).mean() >= MIN_FINDER_MATCH:
                out.append((quad, inverted))
                break
    return out


def _line_intersection(p1, p2, q1, q2):
    d1, d2 = p2 - p1, q2 - q1
    a = np.array([d1, -d2]).T
    if abs(np.linalg.det(a)) < 1e-9:
        return None
    s = np.linalg.solve(a, q1 - p1)
    return p1 + s[0] * d1


def _symbol_from_finders(fa, fb, fc) -> tuple[np.ndarray, float] | None:
    """Symbol quad (TL, TR, BR, BL) from finders at its top-left, top-right and
    bottom-left corners, plus the module size in pixels."""
    ca, cb, cc = fa.mean(axis=0), fb.mean(axis=0), fc.mean(axis=0)
    center = (cb + cc) / 2

    def far(q, ref):
        return int(np.argmax(((q - ref) ** 2).sum(axis=1)))

    tl = fa[far(fa, center)]
    it = far(fb, center)
    ib = far(fc, center)
    tr, bl = fb[it], fc[ib]
    # outer edge of each side finder: the neighbor of its outer corner away from A
    nb = max((fb[(it + 1) % 4], fb[(it - 1) % 4]), key=lambda p: np.hypot(*(p - ca)))
    nc = max((fc[(ib + 1) % 4], fc[(ib - 1) % 4]), key=lambda p: np.hypot(*(p - ca)))
    br = _line_intersection(tr, nb, bl, nc)
    if br is None:
        return None
    quad = np.array([tl, tr, br, bl])
    if not is_convex(quad):
        return None
    sides = [np.hypot(*(q[1] - q[0])) for q in (fa, fb, fc)] + [np.hypot(*(q[2] - q[1])) for q in (fa, fb, fc)]
    return quad, float(np.mean(sides)) / 7


def _qr_from_finders(gray: np.ndarray, finders) -> list[_Hit]:
    hits = []
    used = set()
    for i, j, k in combinations(range(len(finders)), 3):
        if {i, j, k} & used:
            continue
        group = [finders[i], finders[j], finders[k]]
        if len({inv for _, inv in group}) != 1:
            continue
        inverted = group[0][1]
        quads = [q for q, _ in group]
        sides = [np.sqrt(abs(polygon_area(q))) for q in quads]
        if max(sides) > FINDER_SIZE_RATIO * min(sides):
            continue
        centers = [q.mean(axis=0) for q in quads]
        # the top-left finder sits at the right angle
        best = None
        for a in range(3):
            b, c = [x for x in range(3) if x != a]
            u, v = centers[b] - centers[a], centers[c] - centers[a]
            lu, lv = np.hypot(*u), np.hypot(*v)
            if min(lu, lv) < 1e-9 or max(lu, lv) > 1.5 * min(lu, lv):
                continue
            cos = abs(u @ v) / (lu * lv)
            if best is None or cos < best[0]:
                best = (cos, a, b, c)
        if best is None or best[0] > 0.5:
            continue
        _, a, b, c = best
        u, v = centers[b] - centers[a], centers[c] - centers[a]
        if u[0] * v[1] - u[1] * v[0] < 0:
            b, c = c, b
        found = _symbol_from_finders(quads[a], quads[b], quads[c])
        if found is None:
            continue
        symbol, module = found
        est = np.hypot(*(centers[b] - centers[a])) / module + 7
        sizes = sorted(QR_SIZES, key=lambda s: abs(s - est))[:2]
        hit = _try_qr(gray, symbol, sizes, strips=(0,), inverted_options=(inverted,))
        if hit is not None:
            hits.append(hit)
            used |= {i, j, k}
    return hits


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two convex quads."""
    pa, pb = Polygon(a), Polygon(b)
    if not pa.is_valid or not pb.is_valid:
        return 0.0
    union = pa.union(pb).area
    return pa.intersection(pb).area / union if union > 0 else 0.0


def decode_candidates(gray: np.ndarray, quads: list[np.ndarray], families) -> list[_Hit]:
    """Decode what the quads of one binarization hold; one hit per distinct location."""
    hits: list[_Hit] = []

    def add(hit):
        if hit is not None and not any(iou(hit.corners, h.corners) > 0.5 for h in hits):
            hits.append(hit)

    if Family.QR in families:
        for hit in _qr_from_finders(gray, _finders(gray, quads)):
            add(hit)
    for quad in quads:
        # quads inside a decoded symbol are its own finder patterns and modules
        center = Point(quad.mean(axis=0))
        if any(Polygon(h.corners).contains(center) for h in hits):
            continue
        if Family.QR in families:
            hit = _try_qr(gray, quad)
            if hit is not None:
                add(hit)
                continue
        if Family.ARUCO in families:
            add(_try_aruco(gray, quad))
    return hits


def detect_tags(img: np.ndarray, combos=None, families=None, clahe_params: ClaheParams | None = None,
                quad_params: QuadParams | None = None, deadline_s: float | None = None,
                c: float = DEFAULT_C) -> list[DetectionResult]:
    """Try each filter combination in order, stopping at the first one that
    decodes anything.

    With ``deadline_s`` set, later combos are skipped once the budget is
    spent; the first one always runs.
    """
    t0 = time.perf_counter()
    combos = list(DEFAULT_COMBOS if combos is None else combos)
    if not combos:
        raise ValueError("combos must not be empty")
    families = tuple(Family(f) for f in (families or (Family.ARUCO, Family.QR)))
    img = np.asarray(img, np.uint8)
    for i, combo in enumerate(combos):
        if i and deadline_s is not None and time.perf_counter() - t0 > deadline_s:
            break
        binary = binarize(img, combo, clahe_params, c)
        hits = decode_candidates(img, find_quads(binary, quad_params), families)
        if hits:
            elapsed = (time.perf_counter() - t0) * 1000
            return [DetectionResult(h.family, h.corners, combo, h.inverted, h.payload, h.marker_id, elapsed) for h in hits]
    return []

"""Quadrilateral candidates from a binary image."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from ..errors import DegenerateQuad


@dataclass(frozen=True)
class QuadParams:
    min_area: float = 100.0
    aspect_min: float = 0.3
    aspect_max: float = 3.3
    epsilon: float = 0.03  # share of the contour perimeter
    min_side_px: int = 10


# 8-neighborhood clockwise on screen (y down), starting east
_DY = np.array([0, 1, 1, 1, 0, -1, -1, -1])
_DX = np.array([1, 1, 0, -1, -1, -1, 0, 1])


@numba.njit(cache=True)
def _trace_border(labels, label, y0, x0, dy, dx, cap):
    """Moore-neighbor tracing of the outer border of component ``label``
    through (y0, x0), its first pixel in raster order. Stops when the walk is
    back at the start and about to repeat its first move."""
    h, w = labels.shape
    ys = np.empty(cap, np.int64)
    xs = np.empty(cap, np.int64)
    ys[0] = y0
    xs[0] = x0
    n = 1
    y, x = y0, x0
    back = 4  # west neighbor is background
    first_y, first_x = -1, -1
    while n < cap:
        found = -1
        for k in range(1, 9):
            d = (back + k) % 8
            yy = y + dy[d]
            xx = x + dx[d]
            if 0 <= yy < h and 0 <= xx < w and labels[yy, xx] == label:
                found = d
                break
        if found < 0:
            break  # isolated pixel
        ny, nx = y + dy[found], x + dx[found]
        if y == y0 and x == x0:
            if first_y < 0:
                first_y, first_x = ny, nx
            elif ny == first_y and nx == first_x:
                break
        # direction from the new pixel to the last background neighbor checked
        ry = y + dy[(found + 7) % 8] - ny
        rx = x + dx[(found + 7) % 8] - nx
        for d in range(8):
            if dy[d] == ry and dx[d] == rx:
                back = d
                break
        y, x = ny, nx
        ys[n] = y
        xs[n] = x
        n += 1
    # the walk ends on the start pixel, which is already stored first
    if n > 1 and ys[n - 1] == y0 and xs[n - 1] == x0:
        n -= 1
    return ys[:n], xs[:n]


def trace_outer_border(mask: np.ndarray) -> np.ndarray:
    """(N, 2) outer border (x, y) of the first component in ``mask``, clockwise on screen."""
    labels = np.ascontiguousarray(mask, dtype=np.int32)
    flat = np.flatnonzero(labels)
    if len(flat) == 0:
        return np.zeros((0, 2))
    y0, x0 = divmod(int(flat[0]), labels.shape[1])
    ys, xs = _trace_border(labels, labels.flat[flat[0]], y0, x0, _DY, _DX, 2 * labels.size + 8)
    return np.stack([xs, ys], axis=1).astype(np.float64)


@numba.njit(cache=True)
def _chain_dp(pts, a, b, eps, keep):
    """Douglas-Peucker over the closed-contour chain a..b (indices mod N),
    marking kept vertices in ``keep``."""
    n = pts.shape[0]
    stack = np.empty((2 * n + 2, 2), np.int64)
    sp = 0
    stack[0, 0] = a
    stack[0, 1] = b
    sp = 1
    while sp > 0:
        sp -= 1
        lo = stack[sp, 0]
        hi = stack[sp, 1]
        if hi - lo < 2:
            continue
        ax, ay = pts[lo % n, 0], pts[lo % n, 1]
        sx, sy = pts[hi % n, 0] - ax, pts[hi % n, 1] - ay
        norm = np.sqrt(sx * sx + sy * sy)
        best = -1.0
        arg = -1
        for k in range(lo + 1, hi):
            rx, ry = pts[k % n, 0] - ax, pts[k % n, 1] - ay
            if norm < 1e-12:
                dist = np.sqrt(rx * rx + ry * ry)
            else:
                dist = abs(sx * ry - sy * rx) / norm
            if dist > best:
                best = dist
                arg = k
        if best > eps:
            keep[arg % n] = True
            stack[sp, 0] = lo
            stack[sp, 1] = arg
            sp += 1
            stack[sp, 0] = arg
            stack[sp, 1] = hi
            sp += 1


@numba.njit(cache=True)
def _approx(pts, eps):
    n = pts.shape[0]
    far = 0
    best = -1.0
    for k in range(n):
        d = (pts[k, 0] - pts[0, 0]) ** 2 + (pts[k, 1] - pts[0, 1]) ** 2
        if d > best:
            best = d
            far = k
    keep = np.zeros(n, np.bool_)
    keep[0] = True
    keep[far] = True
    _chain_dp(pts, 0, far, eps, keep)
    _chain_dp(pts, far, n, eps, keep)
    idx = np.flatnonzero(keep)
    # the start pixel is arbitrary; drop vertices that sit on a straight run
    m = idx.shape[0]
    changed = True
    while changed and m > 3:
        changed = False
        for j in range(m):
            p = pts[idx[(j - 1) % m]]
            q = pts[idx[j]]
            r = pts[idx[(j + 1) % m]]
            sx, sy = r[0] - p[0], r[1] - p[1]
            norm = np.sqrt(sx * sx + sy * sy)
            if norm > 0 and abs(sx * (q[1] - p[1]) - sy * (q[0] - p[0])) / norm <= eps:
                for t in range(j, m - 1):
                    idx[t] = idx[t + 1]
                m -= 1
                changed = True
                break
    return idx[:m]


def approx_polygon(contour: np.ndarray, eps: float) -> np.ndarray:
    """Indices into a closed contour of its simplified polygon vertices."""
    n = len(contour)
    if n < 3:
        return np.arange(n)
    return _approx(np.ascontiguousarray(contour, dtype=np.float64), float(eps))


def polygon_area(pts: np.ndarray) -> float:
    """Shoelace area; positive for clockwise-on-screen (y down) order."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def is_convex(pts: np.ndarray) -> bool:
    d1 = np.roll(pts, -1, axis=0) - pts
    d2 = np.roll(pts, -2, axis=0) - np.roll(pts, -1, axis=0)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return bool(np.all(cross > 0) or np.all(cross < 0))


def order_corners(quad: np.ndarray) -> np.ndarray:
    """Clockwise on screen, starting at the corner nearest the top-left."""
    quad = np.asarray(quad, float)
    c = quad.mean(axis=0)
    ang = np.arctan2(quad[:, 1] - c[1], quad[:, 0] - c[0])
    quad = quad[np.argsort(ang)]  # increasing angle is clockwise when y points down
    start = int(np.argmin(quad.sum(axis=1)))
    return np.roll(quad, -start, axis=0)


def _fit_line(pts: np.ndarray):
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c)
    return c, vt[0]


def _intersect_lines(c1, d1, c2, d2):
    a = np.array([d1, -d2]).T
    if abs(np.linalg.det(a)) < 1e-9:
        return None
    s = np.linalg.solve(a, c2 - c1)
    return c1 + s[0] * d1


def refine_corners(contour: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Corners from lines fitted to each side's border pixels, pushed half a
    pixel outward from pixel centers onto the region boundary."""
    corners = contour[idx].astype(float)
    n = len(contour)
    centroid = corners.mean(axis=0)
    lines = []
    for j in range(4):
        a, b = int(idx[j]), int(idx[(j + 1) % 4])
        span = (b - a) % n
        trim = max(1, span // 8)
        sel = [(a + k) % n for k in range(trim, span - trim + 1)]
        if len(sel) < 3:
            return corners
        c, d = _fit_line(contour[sel])
        normal = np.array([-d[1], d[0]])
        if normal @ (c - centroid) < 0:
            normal = -normal
        lines.append((c + 0.5 * normal, d))
    # refined corners may move a little from the rough vertices, never far
    side = np.hypot(*(np.roll(corners, -1, axis=0) - corners).T).min()
    reach = max(3.0, 0.25 * side)
    out = []
    for j in range(4):
        p = _intersect_lines(*lines[j - 1], *lines[j])
        if p is None or np.hypot(*(p - corners[j])) > reach:
            return corners
        out.append(p)
    return np.array(out)


@numba.njit(cache=True)
def _label_stats(labels, count):
    """Bounding box, first raster pixel and pixel count of every label."""
    h, w = labels.shape
    stats = np.full((count + 1, 7), -1, np.int64)
    stats[:, 6] = 0
    for y in range(h):
        for x in range(w):
            k = labels[y, x]
            if k == 0:
                continue
            s = stats[k]
            if s[6] == 0:
                s[0] = y
                s[1] = y
                s[2] = x
                s[3] = x
                s[4] = y
                s[5] = x
            else:
                s[1] = y
                if x < s[2]:
                    s[2] = x
                if x > s[3]:
                    s[3] = x
            s[6] += 1
    return stats


def _components(mask: np.ndarray, params: QuadParams):
    """Outer borders of the components large and solid enough to be a tag."""
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), bool), output=np.int32)
    h, w = mask.shape
    stats = _label_stats(labels, count)
    y0, y1, x0, x1, n = stats[:, 0], stats[:, 1], stats[:, 2], stats[:, 3], stats[:, 6]
    bh, bw = y1 - y0 + 1, x1 - x0 + 1
    ok = (bh >= params.min_side_px) & (bw >= params.min_side_px) & (bh * bw >= params.min_area)
    # a tag outline is at least two pixels thick all round; noise is sparser
    ok &= n >= 2 * (bh + bw)
    # components cut by the frame cannot hold a complete tag
    ok &= (y0 > 0) & (x0 > 0) & (y1 < h - 1) & (x1 < w - 1)
    ok[0] = False
    for k in np.flatnonzero(ok):
        fy, fx = stats[k, 4], stats[k, 5]
        # a border visits each pixel of the bounding box at most twice
        ys, xs = _trace_border(labels, k, fy, fx, _DY, _DX, 2 * bh[k] * bw[k] + 8)
        yield np.stack([xs, ys], axis=1).astype(np.float64)


def find_quads(binary: np.ndarray, params: QuadParams | None = None, polarity: str = "both") -> list[np.ndarray]:
    """Convex four-sided outer borders of the dark and/or bright components.

    Each quad is a (4, 2) array of (x, y) corners, clockwise from top-left.
    """
    params = params or QuadParams()
    binary = np.asarray(binary)
    masks = []
    if polarity in ("both", "dark"):
        masks.append(binary < 128)
    if polarity in ("both", "bright"):
        masks.append(binary >= 128)
    quads = []
    for mask in masks:
        for contour in _components(mask, params):
            if len(contour) < 8:
                continue
            steps = np.diff(np.vstack([contour, contour[:1]]), axis=0)
            perimeter = float(np.hypot(steps[:, 0], steps[:, 1]).sum())
            idx = approx_polygon(contour, params.epsilon * perimeter)
            if len(idx) != 4:
                continue
            pts = contour[idx]
            if not is_convex(pts):
                continue
            area = abs(polygon_area(pts))
            if area < params.min_area:
                continue
            sides = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
            aspect = (sides[0] + sides[2]) / max(sides[1] + sides[3], 1e-9)
            if not params.aspect_min <= aspect <= params.aspect_max:
                continue
            quad = refine_corners(contour, idx)
            quads.append(order_corners(quad))
    return quads


def homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 H with dst ~ H src from four correspondences (DLT)."""
    src = np.asarray(src, float)
    dst = np.asarray(dst, float)
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, s, vt = np.linalg.svd(np.array(rows))
    if s[-2] < 1e-9 * s[0]:
        raise DegenerateQuad("correspondences do not determine a homography")
    h = vt[-1].reshape(3, 3)
    return h / h[2, 2] if abs(h[2, 2]) > 1e-12 else h


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, float)
    p = pts @ h[:, :2].T + h[:, 2]
    return p[..., :2] / p[..., 2:3]


def check_quad(quad: np.ndarray) -> np.ndarray:
    quad = np.asarray(quad, float).reshape(4, 2)
    for j in range(4):
        a, b, c = quad[j], quad[(j + 1) % 4], quad[(j + 2) % 4]
        if abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0]) < 1e-6:
            raise DegenerateQuad("three quad corners are collinear")
    return quad


def grid_homography(quad: np.ndarray, n: int) -> np.ndarray:
    """Map grid coordinates (col, row) in [0, n] onto the quad (TL, TR, BR, BL)."""
    quad = check_quad(quad)
    return homography(np.array([[0, 0], [n, 0], [n, n], [0, n]], float), quad)

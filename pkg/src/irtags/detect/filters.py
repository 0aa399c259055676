"""CLAHE, Gaussian blur and Gaussian adaptive threshold on 8-bit images."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.ndimage import correlate1d

from ..errors import EvenBlockSize, EvenKsize, ImageSmallerThanGrid

DEFAULT_C = 4


@dataclass(frozen=True)
class ClaheParams:
    clip_limit: float = 20.0
    tiles: tuple[int, int] = (8, 8)  # (columns, rows)

    def __post_init__(self):
        if not self.clip_limit > 0:
            raise ValueError("clip_limit must be positive")
        tiles = tuple(int(t) for t in self.tiles)
        if len(tiles) != 2 or min(tiles) < 1:
            raise ValueError("tiles must be at least 1x1")
        object.__setattr__(self, "tiles", tiles)


def _reflect101(n: int, size: int) -> np.ndarray:
    """Indices of ``n`` pixels padded to ``size`` by reflect-101."""
    idx = np.arange(size)
    if n == 1:
        return np.zeros(size, np.int64)
    period = 2 * n - 2
    idx = idx % period
    return np.where(idx < n, idx, period - idx)


def clahe_luts(img: np.ndarray, params: ClaheParams) -> tuple[np.ndarray, tuple[int, int]]:
    """Per-tile mapping tables (rows, cols, 256) and the tile size (h, w)."""
    img = np.asarray(img, np.uint8)
    h, w = img.shape
    tx, ty = params.tiles
    if h < ty or w < tx:
        raise ImageSmallerThanGrid(f"{w}x{h} image is smaller than the {tx}x{ty} tile grid")
    th, tw = -(-h // ty), -(-w // tx)
    if (th * ty, tw * tx) != (h, w):
        img = img[_reflect101(h, th * ty)][:, _reflect101(w, tw * tx)]
    area = th * tw
    tiles = img.reshape(ty, th, tx, tw).transpose(0, 2, 1, 3).reshape(ty * tx, area).astype(np.int64)
    hist = np.bincount((tiles + 256 * np.arange(ty * tx)[:, None]).ravel(), minlength=256 * ty * tx).reshape(ty * tx, 256)
    single_level = (hist > 0).sum(axis=1) == 1
    clip = max(int(params.clip_limit * area / 256), 1)
    excess = np.maximum(hist - clip, 0).sum(axis=1)
    hist = np.minimum(hist, clip)
    hist += (excess // 256)[:, None]
    residual = excess % 256
    for t in np.flatnonzero(residual):
        step = max(256 // residual[t], 1)
        hist[t, np.arange(0, 256, step)[: residual[t]]] += 1
    luts = np.rint(np.cumsum(hist, axis=1) * (255.0 / area))
    # a flat tile keeps its value rather than being stretched
    luts[single_level] = np.arange(256)
    return np.clip(luts, 0, 255).reshape(ty, tx, 256), (th, tw)


def _interp_axis(n: int, tile: int, count: int):
    pos = np.arange(n) / tile - 0.5
    i1 = np.floor(pos).astype(np.int64)
    frac = pos - i1
    lo = np.clip(i1, 0, count - 1)
    hi = np.clip(i1 + 1, 0, count - 1)
    return lo, hi, frac


@numba.njit(cache=True)
def _apply_luts(img, luts, y1, y2, ya, x1, x2, xa, out):
    h, w = img.shape
    for y in range(h):
        a, b, fy = y1[y], y2[y], ya[y]
        for x in range(w):
            v = img[y, x]
            c, d, fx = x1[x], x2[x], xa[x]
            top = luts[a, c, v] * (1 - fx) + luts[a, d, v] * fx
            bot = luts[b, c, v] * (1 - fx) + luts[b, d, v] * fx
            r = np.rint(top * (1 - fy) + bot * fy)
            out[y, x] = min(max(r, 0.0), 255.0)


def clahe(img: np.ndarray, params: ClaheParams | None = None) -> np.ndarray:
    """Contrast limited adaptive histogram equalization.

    Clip count per bin is ``clip_limit * tile_area / 256``; clipped excess is
    spread evenly over all bins. Mappings are interpolated bilinearly between
    tile centers and clamped beyond the outer centers.
    """
    params = params or ClaheParams()
    img = np.ascontiguousarray(img, np.uint8)
    luts, (th, tw) = clahe_luts(img, params)
    h, w = img.shape
    ty, tx = luts.shape[:2]
    y1, y2, ya = _interp_axis(h, th, ty)
    x1, x2, xa = _interp_axis(w, tw, tx)
    out = np.empty((h, w), np.uint8)
    _apply_luts(img, np.ascontiguousarray(luts), y1, y2, ya, x1, x2, xa, out)
    return out


def gaussian_sigma(ksize: int) -> float:
    return 0.3 * ((ksize - 1) * 0.5 - 1) + 0.8


def gaussian_kernel(ksize: int) -> np.ndarray:
    x = np.arange(ksize) - (ksize - 1) / 2
    g = np.exp(-(x**2) / (2 * gaussian_sigma(ksize) ** 2))
    return g / g.sum()


def _smooth(img: np.ndarray, ksize: int) -> np.ndarray:
    k = gaussian_kernel(ksize)
    out = correlate1d(np.asarray(img, np.float32), k.astype(np.float32), axis=0, mode="mirror")
    return correlate1d(out, k.astype(np.float32), axis=1, mode="mirror")


def gaussian_blur(img: np.ndarray, ksize: int) -> np.ndarray:
    """Separable Gaussian with reflect-101 borders; ``ksize`` 1 is identity."""
    if ksize < 1 or ksize % 2 == 0:
        raise EvenKsize(f"ksize must be odd and >= 1, got {ksize}")
    img = np.asarray(img, np.uint8)
    if ksize == 1:
        return img.copy()
    return np.clip(np.rint(_smooth(img, ksize)), 0, 255).astype(np.uint8)


def adaptive_threshold(img: np.ndarray, block_size: int, c: float = DEFAULT_C) -> np.ndarray:
    """255 where a pixel exceeds its Gaussian-weighted neighborhood mean minus ``c``."""
    if block_size < 3 or block_size % 2 == 0:
        raise EvenBlockSize(f"blockSize must be odd and >= 3, got {block_size}")
    img = np.asarray(img, np.uint8)
    mean = _smooth(img, block_size)
    return np.where(img > mean - c, 255, 0).astype(np.uint8)

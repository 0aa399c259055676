"""Straightforward reference filters used as test oracles."""

from __future__ import annotations

import math

import numpy as np


def reflect101(i: int, n: int) -> int:
    if n == 1:
        return 0
    while i < 0 or i >= n:
        i = -i if i < 0 else 2 * (n - 1) - i
    return i


def gaussian_weights(k: int) -> list[float]:
    sigma = 0.3 * ((k - 1) * 0.5 - 1) + 0.8
    w = [math.exp(-((i - (k - 1) / 2) ** 2) / (2 * sigma * sigma)) for i in range(k)]
    s = sum(w)
    return [x / s for x in w]


def gaussian_mean(img: np.ndarray, k: int) -> np.ndarray:
    """Full 2D weighted window sum (not separable), reflect-101 borders."""
    h, w = img.shape
    g = np.array(gaussian_weights(k))
    r = k // 2
    ys = np.array([reflect101(i - r, h) for i in range(h + k - 1)])
    xs = np.array([reflect101(i - r, w) for i in range(w + k - 1)])
    padded = img.astype(float)[ys][:, xs]
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    return np.einsum("yxij,ij->yx", windows, np.outer(g, g))


def blur_ref(img: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return img.copy()
    return np.clip(np.floor(gaussian_mean(img, k) + 0.5), 0, 255).astype(np.uint8)


def threshold_ref(img: np.ndarray, block: int, c: float = 4) -> tuple[np.ndarray, np.ndarray]:
    """Binary output and the decision margin (pixel minus local threshold)."""
    margin = img.astype(float) - (gaussian_mean(img, block) - c)
    return np.where(margin > 0, 255, 0).astype(np.uint8), margin


def clahe_ref(img: np.ndarray, clip_limit: float = 20.0, tiles=(8, 8)) -> np.ndarray:
    """Tile histograms, clipping with uniform redistribution, bilinear blend.

    Image sides must be multiples of the tile grid.
    """
    h, w = img.shape
    tx, ty = tiles
    th, tw = h // ty, w // tx
    assert th * ty == h and tw * tx == w
    area = th * tw
    clip = max(int(clip_limit * area / 256), 1)
    luts = np.zeros((ty, tx, 256))
    for j in range(ty):
        for i in range(tx):
            hist = [0] * 256
            for y in range(j * th, (j + 1) * th):
                for x in range(i * tw, (i + 1) * tw):
                    hist[int(img[y, x])] += 1
            if sum(1 for v in hist if v) == 1:
                luts[j, i] = np.arange(256)
                continue
            excess = 0
            for v in range(256):
                if hist[v] > clip:
                    excess += hist[v] - clip
                    hist[v] = clip
            for v in range(256):
                hist[v] += excess // 256
            residual = excess % 256
            if residual:
                step = max(256 // residual, 1)
                v = 0
                while residual > 0 and v < 256:
                    hist[v] += 1
                    residual -= 1
                    v += step
            cdf = 0
            for v in range(256):
                cdf += hist[v]
                luts[j, i, v] = min(max(math.floor(cdf * 255.0 / area + 0.5), 0), 255)
    out = np.zeros((h, w), np.uint8)
    for y in range(h):
        fy = y / th - 0.5
        j1 = math.floor(fy)
        ay = fy - j1
        j0c, j1c = min(max(j1, 0), ty - 1), min(max(j1 + 1, 0), ty - 1)
        for x in range(w):
            fx = x / tw - 0.5
            i1 = math.floor(fx)
            ax = fx - i1
            i0c, i1c = min(max(i1, 0), tx - 1), min(max(i1 + 1, 0), tx - 1)
            v = int(img[y, x])
            top = luts[j0c, i0c, v] * (1 - ax) + luts[j0c, i1c, v] * ax
            bot = luts[j1c, i0c, v] * (1 - ax) + luts[j1c, i1c, v] * ax
            out[y, x] = min(max(math.floor(top * (1 - ay) + bot * ay + 0.5), 0), 255)
    return out


def global_equalization(img: np.ndarray) -> np.ndarray:
    """Classical histogram equalization: v -> round(255 * cdf(v) / N)."""
    hist = np.bincount(img.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    lut = np.floor(cdf * 255.0 / img.size + 0.5).clip(0, 255).astype(np.uint8)
    return lut[img]


def random_images(count: int, seed: int, shape=(64, 64)) -> list[np.ndarray]:
    """A mix of uniform noise, smooth gradients and blocky low-contrast scenes."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        kind = i % 3
        if kind == 0:
            img = rng.integers(0, 256, shape)
        elif kind == 1:
            yy, xx = np.indices(shape)
            img = rng.uniform(0, 255) + rng.uniform(-2, 2) * xx + rng.uniform(-2, 2) * yy + rng.normal(0, 3, shape)
        else:
            blocks = rng.integers(60, 140, (8, 8))
            img = np.kron(blocks, np.ones((shape[0] // 8, shape[1] // 8))) + rng.normal(0, 5, shape)
        out.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return out

"""ArUco 4x4 markers from the standard 50-entry dictionary.

The shipped asset stores each marker's inner bits exactly as published
(row-major, ``1`` = white). :class:`BitMatrix` uses ``True`` = dark, so the
asset bits are inverted on load.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from ..errors import BorderViolation, IdOutOfRange, NoMatch
from .bitmatrix import BitMatrix

MARKER_BITS = 4
MARKER_SIZE = MARKER_BITS + 2
BORDER_MIN_DARK = 0.8


@dataclass(frozen=True, eq=False)
class ArucoDictionary:
    entries: tuple[np.ndarray, ...]  # 4x4 bool, True = dark
    max_correction: int

    def __post_init__(self):
        # (id, clockwise quarter turns, 16 bits) lookup for vectorized matching
        table = np.array([[r.ravel() for r in _rotations(e)] for e in self.entries], dtype=bool)
        object.__setattr__(self, "table", table.reshape(len(self.entries), 4, MARKER_BITS * MARKER_BITS))

    def __len__(self):
        return len(self.entries)


def _rotations(pattern: np.ndarray) -> list[np.ndarray]:
    # index k: pattern rotated clockwise k quarter turns
    return [np.rot90(pattern, -k) for k in range(4)]


def min_rotated_distance(entries) -> int:
    """Smallest Hamming distance between any entry and any rotation of another
    entry, or a non-trivial rotation of itself."""
    best = MARKER_BITS * MARKER_BITS
    rots = [_rotations(e) for e in entries]
    for i, ri in enumerate(rots):
        for k in (1, 2, 3):
            best = min(best, int((ri[0] != ri[k]).sum()))
        for rj in rots[i + 1 :]:
            for k in range(4):
                best = min(best, int((ri[0] != rj[k]).sum()))
    return best


def parse_dictionary(text: str) -> list[np.ndarray]:
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    out = []
    for line in rows:
        if len(line) != 16 or set(line) - {"0", "1"}:
            raise ValueError(f"bad dictionary line {line!r}")
        white = np.array([c == "1" for c in line], dtype=bool).reshape(4, 4)
        out.append(~white)
    return out


@lru_cache(maxsize=None)
def dict_4x4_50() -> ArucoDictionary:
    text = resources.files("irtags.tagcodes").joinpath("data/dict_4x4_50.txt").read_text("ascii")
    entries = parse_dictionary(text)
    if len(entries) != 50:
        raise ValueError(f"DICT_4X4_50 asset has {len(entries)} entries")
    dmin = min_rotated_distance(entries)
    if dmin < 3:
        raise ValueError(f"DICT_4X4_50 asset has rotated distance {dmin} < 3")
    return ArucoDictionary(tuple(entries), (dmin - 1) // 2)


def encode_aruco(marker_id: int, dictionary: ArucoDictionary | None = None) -> BitMatrix:
    d = dictionary or dict_4x4_50()
    if not 0 <= marker_id < len(d):
        raise IdOutOfRange(f"ArUco id {marker_id} outside [0, {len(d) - 1}]")
    return BitMatrix(np.pad(d.entries[marker_id], 1, constant_values=True))


def decode_aruco(m: BitMatrix, dictionary: ArucoDictionary | None = None, max_errors: int | None = None,
                 border_min: float = BORDER_MIN_DARK) -> tuple[int, int]:
    """Return ``(id, rotation_degrees)``; ``m`` equals the canonical marker
    rotated clockwise by ``rotation_degrees``.

    Up to ``max_errors`` inner bits (default: the dictionary's correction
    capacity) may be wrong, and at least ``border_min`` of the border must be dark.
    """
    d = dictionary or dict_4x4_50()
    limit = d.max_correction if max_errors is None else min(max_errors, d.max_correction)
    if m.size != MARKER_SIZE:
        raise ValueError(f"ArUco matrix must be {MARKER_SIZE}x{MARKER_SIZE}, got {m.size}")
    bits = m.bits
    border = np.concatenate([bits[0, :], bits[-1, :], bits[1:-1, 0], bits[1:-1, -1]])
    if border.mean() < border_min:
        raise BorderViolation(f"only {border.mean():.0%} of border modules are dark")
    inner = bits[1:-1, 1:-1]
    dists = (d.table != inner.ravel()).sum(axis=2)
    # first minimum in (id, rotation) order
    marker_id, k = divmod(int(np.argmin(dists)), 4)
    dist = int(dists[marker_id, k])
    if dist > limit:
        raise NoMatch(f"closest marker {marker_id} is {dist} bits away (limit {limit})")
    return marker_id, 90 * k

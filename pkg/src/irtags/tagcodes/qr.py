"""QR Code Model 2 encoder/decoder, byte mode, versions 1-3, ECC levels L and M.

Every supported (version, level) pair uses a single Reed-Solomon block, so
block interleaving degenerates to the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EccFailure, FormatInfoUnreadable, PayloadTooLong, UnsupportedVersion
from .bitmatrix import BitMatrix
from .reedsolomon import rs_correct, rs_encode

# (version, level) -> (total codewords, data codewords)
CODEWORDS = {
    (1, "L"): (26, 19),
    (1, "M"): (26, 16),
    (2, "L"): (44, 34),
    (2, "M"): (44, 28),
    (3, "L"): (70, 55),
    (3, "M"): (70, 44),
}
REMAINDER_BITS = {1: 0, 2: 7, 3: 7}
ALIGNMENT_CENTER = {1: None, 2: 18, 3: 22}
LEVEL_BITS = {"L": 0b01, "M": 0b00, "Q": 0b11, "H": 0b10}
BITS_LEVEL = {v: k for k, v in LEVEL_BITS.items()}

FORMAT_MASK = 0x5412
FORMAT_GENERATOR = 0x537
MAX_FORMAT_DISTANCE = 3


def symbol_size(version: int) -> int:
    return 17 + 4 * version


def byte_capacity(version: int, level: str) -> int:
    if (version, level) not in CODEWORDS:
        raise UnsupportedVersion(f"unsupported QR version/level {version}-{level}")
    data_bits = CODEWORDS[version, level][1] * 8
    return (data_bits - 4 - 8) // 8


def format_bits(level: str, mask: int) -> int:
    """15-bit BCH(15,5) protected format word, already XOR-masked."""
    data = (LEVEL_BITS[level] << 3) | mask
    rem = data
    for _ in range(10):
        rem = (rem << 1) ^ ((rem >> 9) * FORMAT_GENERATOR)
    return ((data << 10) | rem) ^ FORMAT_MASK


_FORMAT_TABLE = [(format_bits(BITS_LEVEL[d >> 3], d & 7), d) for d in range(32)]


def _mask_fn(mask: int):
    # i = row, j = column
    return [
        lambda i, j: (i + j) % 2 == 0,
        lambda i, j: i % 2 == 0,
        lambda i, j: j % 3 == 0,
        lambda i, j: (i + j) % 3 == 0,
        lambda i, j: (i // 2 + j // 3) % 2 == 0,
        lambda i, j: (i * j) % 2 + (i * j) % 3 == 0,
        lambda i, j: ((i * j) % 2 + (i * j) % 3) % 2 == 0,
        lambda i, j: ((i + j) % 2 + (i * j) % 3) % 2 == 0,
    ][mask]


def _mask_grid(mask: int, size: int) -> np.ndarray:
    i, j = np.indices((size, size))
    return _mask_fn(mask)(i, j)


@dataclass(frozen=True)
class _Layout:
    version: int
    size: int
    function: np.ndarray  # True where the module is not a data module
    base: np.ndarray  # function pattern values (finders, timing, alignment, dark module)
    order: list  # data module coordinates in placement order


def _format_positions(size: int):
    """Coordinates (row, col) of format bit i for copy 1 and copy 2; bit 0 is the LSB."""
    copy1 = [(r, 8) for r in range(6)] + [(7, 8), (8, 8), (8, 7)] + [(8, c) for c in (5, 4, 3, 2, 1, 0)]
    copy2 = [(8, size - 1 - i) for i in range(8)] + [(size - 15 + i, 8) for i in range(8, 15)]
    return copy1, copy2


_LAYOUTS: dict[int, _Layout] = {}


def _layout(version: int) -> _Layout:
    if version in _LAYOUTS:
        return _LAYOUTS[version]
    size = symbol_size(version)
    function = np.zeros((size, size), dtype=bool)
    base = np.zeros((size, size), dtype=bool)

    def finder(r0, c0):
        for dr in range(-1, 8):
            for dc in range(-1, 8):
                r, c = r0 + dr, c0 + dc
                if 0 <= r < size and 0 <= c < size:
                    function[r, c] = True
                    ring = max(abs(dr - 3), abs(dc - 3))
                    base[r, c] = ring != 2 and ring != 4

    finder(0, 0)
    finder(0, size - 7)
    finder(size - 7, 0)
    for k in range(8, size - 8):
        function[6, k] = function[k, 6] = True
        base[6, k] = base[k, 6] = k % 2 == 0
    center = ALIGNMENT_CENTER[version]
    if center is not None:
        for dr in range(-2, 3):
            for dc in range(-2, 3):
                function[center + dr, center + dc] = True
                base[center + dr, center + dc] = max(abs(dr), abs(dc)) != 1
    copy1, copy2 = _format_positions(size)
    for r, c in copy1 + copy2:
        function[r, c] = True
    function[size - 8, 8] = True
    base[size - 8, 8] = True

    order = []
    right = size - 1
    while right >= 1:
        if right == 6:
            right = 5
        for vert in range(size):
            for j in range(2):
                c = right - j
                upward = ((right + 1) & 2) == 0
                r = size - 1 - vert if upward else vert
                if not function[r, c]:
                    order.append((r, c))
        right -= 2
    layout = _Layout(version, size, function, base, order)
    _LAYOUTS[version] = layout
    return layout


class _BitBuffer(list):
    def put(self, value: int, n: int):
        self.extend((value >> (n - 1 - i)) & 1 for i in range(n))


def _data_codewords(payload: bytes, version: int, level: str) -> list[int]:
    n_data = CODEWORDS[version, level][1]
    buf = _BitBuffer()
    buf.put(0b0100, 4)
    buf.put(len(payload), 8)
    for b in payload:
        buf.put(b, 8)
    capacity = n_data * 8
    buf.put(0, min(4, capacity - len(buf)))
    buf.put(0, (-len(buf)) % 8)
    words = [int("".join(map(str, buf[i : i + 8])), 2) for i in range(0, len(buf), 8)]
    pad = [0xEC, 0x11]
    while len(words) < n_data:
        words.append(pad[(len(words) - len(buf) // 8) % 2])
    return words


def penalty(grid: np.ndarray) -> int:
    """Standard four-rule mask penalty score."""
    size = grid.shape[0]
    score = 0
    for lines in (grid, grid.T):
        for line in lines:
            run = 1
            for k in range(1, size):
                if line[k] == line[k - 1]:
                    run += 1
                else:
                    if run >= 5:
                        score += 3 + run - 5
                    run = 1
            if run >= 5:
                score += 3 + run - 5
    same = (grid[:-1, :-1] == grid[1:, :-1]) & (grid[:-1, :-1] == grid[:-1, 1:]) & (grid[:-1, :-1] == grid[1:, 1:])
    score += 3 * int(same.sum())
    pat_a = np.array([1, 0, 1, 1, 1, 0, 1, 0, 0, 0, 0], dtype=bool)
    pat_b = pat_a[::-1]
    for lines in (grid, grid.T):
        for line in lines:
            for k in range(size - 10):
                window = line[k : k + 11]
                if np.array_equal(window, pat_a) or np.array_equal(window, pat_b):
                    score += 40
    dark_pct = grid.mean() * 100
    score += 10 * int(abs(dark_pct - 50) // 5)
    return score


def _place_format(grid: np.ndarray, level: str, mask: int):
    size = grid.shape[0]
    word = format_bits(level, mask)
    copy1, copy2 = _format_positions(size)
    for i in range(15):
        bit = bool((word >> i) & 1)
        grid[copy1[i]] = bit
        grid[copy2[i]] = bit


def encode_qr(payload: bytes | str, version: int = 1, level: str = "L", mask: int | None = None) -> BitMatrix:
    """Encode ``payload`` in byte mode. ``mask=None`` selects the lowest-penalty mask."""
    if isinstance(payload, str):
        payload = payload.encode("utf-8")
    if version not in (1, 2, 3):
        raise UnsupportedVersion(f"QR version {version} is not supported (1-3 only)")
    if level not in ("L", "M"):
        raise UnsupportedVersion(f"ECC level {level!r} is not supported (L, M only)")
    cap = byte_capacity(version, level)
    if len(payload) > cap:
        raise PayloadTooLong(f"{len(payload)} bytes exceeds the {cap}-byte capacity of {version}-{level}")

    total, n_data = CODEWORDS[version, level]
    data = _data_codewords(payload, version, level)
    words = data + rs_encode(data, total - n_data)
    bits = [(w >> (7 - k)) & 1 for w in words for k in range(8)] + [0] * REMAINDER_BITS[version]

    layout = _layout(version)
    unmasked = layout.base.copy()
    for (r, c), b in zip(layout.order, bits):
        unmasked[r, c] = bool(b)

    candidates = range(8) if mask is None else [mask]
    best = None
    for m in candidates:
        grid = unmasked.copy()
        flip = _mask_grid(m, layout.size) & ~layout.function
        grid ^= flip
        _place_format(grid, level, m)
        score = penalty(grid)
        if best is None or score < best[0]:
            best = (score, grid)
    return BitMatrix(best[1])


def _read_format(bits: np.ndarray) -> tuple[int, int, int]:
    """Return (level bits, mask, distance) of the best format copy."""
    size = bits.shape[0]
    best = None
    for positions in _format_positions(size):
        word = sum(int(bits[rc]) << i for i, rc in enumerate(positions))
        dist, data = min((bin(word ^ code).count("1"), d) for code, d in _FORMAT_TABLE)
        # strict < keeps copy 1 on ties
        if best is None or dist < best[2]:
            best = (data >> 3, data & 7, dist)
    return best


def _decode_oriented(bits: np.ndarray, version: int) -> bytes:
    level_bits, mask, dist = _read_format(bits)
    if dist > MAX_FORMAT_DISTANCE:
        raise FormatInfoUnreadable(f"format information unreadable (distance {dist})")
    level = BITS_LEVEL[level_bits]
    if level not in ("L", "M"):
        raise EccFailure(f"ECC level {level} is not supported")
    layout = _layout(version)
    total, n_data = CODEWORDS[version, level]
    maskgrid = _mask_grid(mask, layout.size)
    raw = [bool(bits[rc]) ^ bool(maskgrid[rc]) for rc in layout.order[: total * 8]]
    words = [sum(int(raw[8 * k + i]) << (7 - i) for i in range(8)) for k in range(total)]
    data, _ = rs_correct(words, total - n_data)

    stream = "".join(format(w, "08b") for w in data)
    mode = int(stream[:4], 2)
    if mode != 0b0100:
        raise EccFailure(f"unsupported segment mode {mode:04b}")
    length = int(stream[4:12], 2)
    if 12 + 8 * length > len(stream):
        raise EccFailure("segment length exceeds data capacity")
    return bytes(int(stream[12 + 8 * k : 20 + 8 * k], 2) for k in range(length))


def version_for_size(size: int) -> int:
    if (size - 17) % 4 or not 1 <= (size - 17) // 4 <= 3:
        raise UnsupportedVersion(f"matrix size {size} is not a QR version 1-3 symbol")
    return (size - 17) // 4


def decode_qr(m: BitMatrix, rotations: bool = True) -> bytes:
    """Decode a sampled symbol, trying all four orientations."""
    version = version_for_size(m.size)
    errors = []
    turns = range(4) if rotations else [0]
    for k in turns:
        bits = np.rot90(m.bits, k)
        try:
            return _decode_oriented(bits, version)
        except (FormatInfoUnreadable, EccFailure) as exc:
            errors.append(exc)
    ecc = [e for e in errors if isinstance(e, EccFailure)]
    if ecc:
        raise ecc[0]
    raise errors[0]


def decode_qr_oriented(m: BitMatrix) -> tuple[bytes, int]:
    """Like decode_qr but also reports the clockwise quarter turns undone."""
    version = version_for_size(m.size)
    last = None
    for k in range(4):
        try:
            return _decode_oriented(np.rot90(m.bits, k), version), k
        except (FormatInfoUnreadable, EccFailure) as exc:
            last = exc
    raise last


def finder_score(m: BitMatrix) -> float:
    """Fraction of finder-pattern modules (all three corners) that match."""
    size = m.size
    layout = _layout(version_for_size(size))
    best = 0.0
    for k in range(4):
        bits = np.rot90(m.bits, k)
        hits = total = 0
        for r0, c0 in ((0, 0), (0, size - 7), (size - 7, 0)):
            region = bits[r0 : r0 + 7, c0 : c0 + 7]
            hits += int((region == layout.base[r0 : r0 + 7, c0 : c0 + 7]).sum())
            total += 49
        best = max(best, hits / total)
    return best

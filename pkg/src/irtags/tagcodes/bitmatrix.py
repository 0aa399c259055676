"""Square boolean module grid shared by every tag family.

Convention: ``True`` is a dark module (ink / opaque bit).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BitMatrix:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise ValueError(f"BitMatrix must be square, got shape {bits.shape}")
        bits = bits.copy()
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.size, self.bits.tobytes()))

    def __repr__(self):
        return f"BitMatrix(size={self.size})\n{self.to_text()}"

    def rotate_cw(self, quarter_turns: int = 1) -> BitMatrix:
        """Rotate clockwise by ``quarter_turns`` * 90 degrees."""
        return BitMatrix(np.rot90(self.bits, -quarter_turns))

    def invert(self) -> BitMatrix:
        return BitMatrix(~self.bits)

    def pad(self, width: int, dark: bool = False) -> BitMatrix:
        return BitMatrix(np.pad(self.bits, width, constant_values=dark))

    def crop(self, width: int) -> BitMatrix:
        if width == 0:
            return self
        return BitMatrix(self.bits[width:-width, width:-width])

    def to_text(self) -> str:
        return "\n".join("".join("#" if b else "." for b in row) for row in self.bits)

    def to_pbm(self) -> str:
        """Serialize as plain PBM (P1); 1 = dark, matching the PBM convention."""
        rows = [" ".join("1" if b else "0" for b in row) for row in self.bits]
        return f"P1\n{self.size} {self.size}\n" + "\n".join(rows) + "\n"

    @classmethod
    def from_pbm(cls, text: str) -> BitMatrix:
        tokens = []
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
        if not tokens or tokens[0] != "P1":
            raise ValueError("not a P1 PBM file")
        w, h = int(tokens[1]), int(tokens[2])
        if w != h:
            raise ValueError("PBM is not square")
        body = "".join(tokens[3:])
        if len(body) != w * h or set(body) - {"0", "1"}:
            raise ValueError("PBM raster does not match header")
        bits = np.frombuffer(body.encode(), dtype=np.uint8).reshape(h, w) == ord("1")
        return cls(bits)

    @classmethod
    def from_strings(cls, rows: list[str]) -> BitMatrix:
        return cls(np.array([[c in "#1X" for c in r] for r in rows], dtype=bool))

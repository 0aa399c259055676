"""Bit-exact QR (v1-3, byte mode, L/M) and ArUco DICT_4X4_50 codecs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .aruco import ArucoDictionary, decode_aruco, dict_4x4_50, encode_aruco
from .bitmatrix import BitMatrix
from .qr import byte_capacity, decode_qr, encode_qr, format_bits


class Family(str, Enum):
    QR = "qr"
    ARUCO = "aruco"


@dataclass(frozen=True)
class TagSpec:
    family: Family
    payload: bytes = b""
    marker_id: int = 0
    qr_version: int = 1
    qr_ecc: str = "L"

    @classmethod
    def qr(cls, payload: bytes | str, version: int = 1, ecc: str = "L") -> TagSpec:
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        return cls(Family.QR, payload=payload, qr_version=version, qr_ecc=ecc)

    @classmethod
    def aruco(cls, marker_id: int) -> TagSpec:
        return cls(Family.ARUCO, marker_id=marker_id)

    @property
    def size(self) -> int:
        return 6 if self.family is Family.ARUCO else 17 + 4 * self.qr_version

    def encode(self) -> BitMatrix:
        if self.family is Family.ARUCO:
            return encode_aruco(self.marker_id)
        return encode_qr(self.payload, self.qr_version, self.qr_ecc)

    def describe(self) -> dict:
        if self.family is Family.ARUCO:
            return {"family": "aruco", "id": self.marker_id}
        try:
            text = self.payload.decode("utf-8")
        except UnicodeDecodeError:
            text = self.payload.hex()
        return {"family": "qr", "payload": text}


__all__ = [
    "ArucoDictionary",
    "BitMatrix",
    "Family",
    "TagSpec",
    "byte_capacity",
    "decode_aruco",
    "decode_qr",
    "dict_4x4_50",
    "encode_aruco",
    "encode_qr",
    "format_bits",
]

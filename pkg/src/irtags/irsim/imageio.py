"""8-bit grayscale image files: binary/ASCII PGM and PNG."""

from __future__ import annotations

import io
import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageDecodeError(ValueError):
    """Bytes are not a supported grayscale image."""


class MalformedImage(ImageDecodeError):
    """A recognized format whose contents are damaged."""


class UnsupportedImageFormat(ImageDecodeError):
    """Bytes do not start like any readable image format."""


# signatures of formats we expect to read; damage after one of these is malformed, not unsupported
_MAGIC = (b"\x89PNG\r\n\x1a\n", b"\xff\xd8\xff", b"GIF8", b"BM", b"II*\x00", b"MM\x00*")


def encode_pgm(img: np.ndarray) -> bytes:
    img = np.asarray(img, np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


_PGM_HEADER = re.compile(rb"\A(P[25])(?:\s+|#[^\n]*\n)*?(\d+)(?:\s+|#[^\n]*\n)+?(\d+)(?:\s+|#[^\n]*\n)+?(\d+)\s")


def decode_pgm(data: bytes) -> np.ndarray:
    m = _PGM_HEADER.match(data)
    if not m:
        raise MalformedImage("malformed PGM header")
    kind, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if w <= 0 or h <= 0 or not 0 < maxval < 256:
        raise MalformedImage("PGM must be 8-bit with positive size")
    body = data[m.end():]
    if kind == b"P5":
        if len(body) < w * h:
            raise MalformedImage("PGM pixel data truncated")
        arr = np.frombuffer(body, np.uint8, count=w * h)
    else:
        try:
            arr = np.array(body.split(), dtype=np.int64)
        except ValueError as exc:
            raise MalformedImage("non-numeric ASCII PGM sample") from exc
        if len(arr) < w * h:
            raise MalformedImage("PGM pixel data truncated")
        arr = arr[: w * h]
    arr = arr.reshape(h, w).astype(np.float64)
    if maxval != 255:
        arr = np.rint(arr * 255.0 / maxval)
    return arr.astype(np.uint8)


def encode_png(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(img, np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data: bytes) -> np.ndarray:
    """PGM or any raster format Pillow reads, converted to 8-bit gray."""
    if data[:2] in (b"P5", b"P2"):
        return decode_pgm(data)
    if not data:
        raise MalformedImage("empty image")
    try:
        im = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        if data.startswith(_MAGIC):
            raise MalformedImage("truncated or damaged image") from exc
        raise UnsupportedImageFormat("unrecognized image format") from exc
    try:
        with im:
            im.load()
            return np.array(im.convert("L"), dtype=np.uint8)
    except (OSError, ValueError, SyntaxError) as exc:
        raise MalformedImage(f"cannot decode {im.format} image: {exc}") from exc


def write_image(path: str | Path, img: np.ndarray) -> None:
    path = Path(path)
    data = encode_pgm(img) if path.suffix.lower() in (".pgm", ".pnm") else encode_png(img)
    path.write_bytes(data)


def read_image(path: str | Path) -> np.ndarray:
    return decode_image(Path(path).read_bytes())

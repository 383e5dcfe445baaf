"""Binary occupancy masks and minimal netpbm file IO.

Convention used everywhere in this package: row 0 is the north edge of
the workspace (largest y), column 0 is the west edge (smallest x), so a
mask prints the way a top-down camera image looks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, SchemaError


@dataclass(frozen=True)
class Mask:
    """A 2-D binary occupancy grid (bool array, shape (height, width))."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits, dtype=bool)
        if arr.ndim != 2:
            raise DimensionMismatch(f"mask must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "bits", arr)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def area(self) -> int:
        """Number of set pixels."""
        return int(self.bits.sum())

    def same_shape(self, other: "Mask") -> bool:
        return self.bits.shape == other.bits.shape

    @staticmethod
    def zeros(height: int, width: int) -> "Mask":
        return Mask(np.zeros((height, width), dtype=bool))


def translate(mask: Mask, dx: int, dy: int) -> Mask:
    """Shift a mask by whole pixels; pixels shifted in from outside are 0.

    dx > 0 moves content east (toward higher column indices), dy > 0 moves
    it south (toward higher row indices).
    """
    h, w = mask.bits.shape
    out = np.zeros_like(mask.bits)
    src_r0, src_r1 = max(0, -dy), min(h, h - dy)
    src_c0, src_c1 = max(0, -dx), min(w, w - dx)
    if src_r0 < src_r1 and src_c0 < src_c1:
        out[src_r0 + dy:src_r1 + dy, src_c0 + dx:src_c1 + dx] = \
            mask.bits[src_r0:src_r1, src_c0:src_c1]
    return Mask(out)


# --- netpbm IO (P5 binary graymap for masks, P6 binary pixmap for photos) ----

def _read_pnm_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Parse a binary netpbm header; returns (width, height, maxval, offset)."""
    if not data.startswith(magic):
        raise SchemaError(f"expected {magic.decode()} file")
    # Header tokens are separated by whitespace; '#' starts a comment line.
    pos = len(magic)
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise SchemaError("malformed netpbm header")
        fields.append(int(token))
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise SchemaError("bad netpbm dimensions")
    return width, height, maxval, pos


def write_mask_pgm(mask: Mask, path: str | Path) -> None:
    """Write a mask as binary PGM (P5), set pixels as 255."""
    h, w = mask.bits.shape
    payload = (mask.bits.astype(np.uint8) * 255).tobytes()
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + payload)


def read_mask_pgm(path: str | Path) -> Mask:
    """Read a binary PGM (P5); any value above maxval/2 counts as set."""
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(data, b"P5")
    if maxval > 255:
        raise SchemaError("16-bit PGM not supported")
    payload = data[offset:offset + width * height]
    if len(payload) != width * height:
        raise SchemaError("PGM payload truncated")
    raw = np.frombuffer(payload, dtype=np.uint8)
    return Mask(raw.reshape(height, width) > maxval // 2)


def read_image_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM (P6) into a uint8 RGB array of shape (h, w, 3)."""
    data = Path(path).read_bytes()
    width, height, maxval, offset = _read_pnm_header(data, b"P6")
    if maxval > 255:
        raise SchemaError("16-bit PPM not supported")
    payload = data[offset:offset + width * height * 3]
    if len(payload) != width * height * 3:
        raise SchemaError("PPM payload truncated")
    raw = np.frombuffer(payload, dtype=np.uint8)
    return raw.reshape(height, width, 3).copy()


def write_image_ppm(image: np.ndarray, path: str | Path) -> None:
    """Write a uint8 RGB array of shape (h, w, 3) as binary PPM (P6)."""
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionMismatch(f"expected (h, w, 3) RGB array, got {img.shape}")
    h, w = img.shape[:2]
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + img.tobytes())

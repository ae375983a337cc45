"""Bit-exact codec for the portable-anymap family (PGM/PPM, 8-bit).

Supported magics: P2/P3 (ASCII) and P5/P6 (binary).  The header grammar is
the Netpbm one: magic, then width, height and maxval as ASCII decimals
separated by whitespace; ``#`` starts a comment running to end of line and
may appear wherever whitespace may.  A binary raster begins after exactly
one whitespace byte following maxval.  Decode errors always name the byte
offset at which parsing failed.

Only maxval <= 255 is accepted (the fundus datasets are 8 bits/plane);
gray samples decode to v/maxval, color samples are rescaled to 0..255.
"""

from __future__ import annotations

import numpy as np

from .image import BinaryImage, GrayImage, RgbImage, quantize_levels

_WHITESPACE = b" \t\n\r\x0b\x0c"
_MAGICS = {b"P2", b"P3", b"P5", b"P6"}


class PnmDecodeError(ValueError):
    """Malformed or truncated PNM payload; carries the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class _Tokenizer:
    """Whitespace/comment-aware scanner over the header and ASCII raster."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def _skip_separators(self):
        data = self.data
        n = len(data)
        while self.pos < n:
            b = data[self.pos]
            if b in _WHITESPACE:
                self.pos += 1
            elif b == ord("#"):
                while self.pos < n and data[self.pos] not in (0x0A, 0x0D):
                    self.pos += 1
            else:
                return

    def next_uint(self, what: str) -> int:
        self._skip_separators()
        if self.pos >= len(self.data):
            raise PnmDecodeError(f"unexpected end of data reading {what}", self.pos)
        start = self.pos
        while self.pos < len(self.data) and 0x30 <= self.data[self.pos] <= 0x39:
            self.pos += 1
        if self.pos == start:
            raise PnmDecodeError(f"expected decimal {what}", start)
        self.last_at = start
        return int(self.data[start:self.pos])


def read_pnm(data: bytes):
    """Decode a PNM byte sequence into an RgbImage (P3/P6) or GrayImage (P2/P5)."""
    data = bytes(data)
    magic = data[:2]
    if magic not in _MAGICS:
        raise PnmDecodeError(f"unsupported or missing PNM magic {magic!r}", 0)
    ascii_raster = magic in (b"P2", b"P3")
    color = magic in (b"P3", b"P6")

    tok = _Tokenizer(data, pos=2)
    width = tok.next_uint("width")
    height = tok.next_uint("height")
    maxval = tok.next_uint("maxval")
    if width < 1 or height < 1:
        raise PnmDecodeError(f"invalid dimensions {width}x{height}", tok.last_at)
    if maxval < 1 or maxval > 255:
        raise PnmDecodeError(f"maxval {maxval} outside [1, 255]", tok.last_at)

    channels = 3 if color else 1
    count = width * height * channels

    if ascii_raster:
        samples = np.empty(count, dtype=np.int64)
        for i in range(count):
            at = tok.pos
            v = tok.next_uint("sample")
            if v > maxval:
                raise PnmDecodeError(f"sample {v} exceeds maxval {maxval}", at)
            samples[i] = v
    else:
        if tok.pos >= len(data) or data[tok.pos] not in _WHITESPACE:
            raise PnmDecodeError("expected single whitespace before raster", tok.pos)
        start = tok.pos + 1
        if len(data) - start < count:
            raise PnmDecodeError(
                f"raster truncated: need {count} bytes, found {len(data) - start}",
                len(data),
            )
        samples = np.frombuffer(data[start:start + count], dtype=np.uint8).astype(np.int64)
        if samples.max(initial=0) > maxval:
            bad = start + int(np.argmax(samples > maxval))
            raise PnmDecodeError(f"sample exceeds maxval {maxval}", bad)

    if color:
        rgb = samples.reshape(height, width, 3)
        if maxval != 255:
            rgb = np.floor(rgb * 255.0 / maxval + 0.5).astype(np.int64)
        return RgbImage.from_array(rgb.astype(np.uint8))
    gray = samples.reshape(height, width).astype(np.float64) / maxval
    return GrayImage.from_array(gray)


def write_pnm(image, format: str = "binary") -> bytes:
    """Encode an image as PNM bytes.

    Gray values are quantized by round(v*255); BinaryImage is written as
    0/255 gray.  ``format`` selects the ASCII (P2/P3) or binary (P5/P6)
    raster encoding.  Output always uses maxval 255 and re-decodes to the
    same quantized image.
    """
    if format not in ("ascii", "binary"):
        raise ValueError(f"format must be 'ascii' or 'binary', got {format!r}")

    if isinstance(image, RgbImage):
        flat = image.data.reshape(-1).astype(np.uint8)
        color = True
    elif isinstance(image, GrayImage):
        flat = quantize_levels(image.data).reshape(-1).astype(np.uint8)
        color = False
    elif isinstance(image, BinaryImage):
        flat = np.where(image.data, 255, 0).reshape(-1).astype(np.uint8)
        color = False
    else:
        raise TypeError(f"cannot encode {type(image).__name__}")

    if format == "binary":
        magic = "P6" if color else "P5"
        header = f"{magic}\n{image.width} {image.height}\n255\n".encode("ascii")
        return header + flat.tobytes()

    magic = "P3" if color else "P2"
    header = f"{magic}\n{image.width} {image.height}\n255\n"
    per_row = image.width * (3 if color else 1)
    rows = flat.reshape(-1, per_row)
    body = "\n".join(" ".join(str(v) for v in row) for row in rows)
    return (header + body + "\n").encode("ascii")

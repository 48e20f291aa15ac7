"""Binary portable pixmap (P6) encoding for raw-range images.

Header: magic "P6", whitespace-separated width/height/maxval (maxval must
be 255), '#' comments allowed, then one byte of whitespace and the raw
RGB payload.  Round-trips are bit-exact on 8-bit data.
"""

from __future__ import annotations

import numpy as np

from .core import ImageTensor

MAX_PIXELS = 1 << 26  # 67M pixels; guards against absurd headers


class PpmError(Exception):
    """Base class for pixmap codec failures."""


class PpmHeaderError(PpmError):
    """Malformed magic, dimensions, or max-value."""


class PpmTruncatedError(PpmError):
    """Payload shorter than the header promises."""


class PpmDimensionError(PpmError):
    """Dimensions overflow the supported raster size."""


def encode_image(img: ImageTensor) -> bytes:
    if not img.is_raw():
        raise ValueError("only raw-range images can be encoded; denormalize first")
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.to_uint8().tobytes()


def decode_image(blob: bytes) -> ImageTensor:
    tokens, offset = _read_header_tokens(blob)
    if tokens[0] != b"P6":
        raise PpmHeaderError(f"bad magic {tokens[0]!r}, expected b'P6'")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PpmHeaderError(f"non-integer header fields {tokens[1:]!r}") from None
    if width <= 0 or height <= 0:
        raise PpmHeaderError(f"non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise PpmHeaderError(f"unsupported max value {maxval}, expected 255")
    if width * height > MAX_PIXELS:
        raise PpmDimensionError(f"raster {width}x{height} exceeds {MAX_PIXELS} pixels")
    need = width * height * 3
    payload = blob[offset : offset + need]
    if len(payload) < need:
        raise PpmTruncatedError(f"payload has {len(payload)} of {need} bytes")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return ImageTensor.from_uint8(arr)


def write_ppm(path, img: ImageTensor) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_image(img))


def read_ppm(path) -> ImageTensor:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def _read_header_tokens(blob: bytes):
    """Collect the four header tokens, honoring '#' comments.

    Returns the tokens and the offset of the first payload byte (one
    whitespace byte after the maxval token, per the format).
    """
    tokens = []
    i = 0
    n = len(blob)
    while len(tokens) < 4:
        while i < n and blob[i : i + 1].isspace():
            i += 1
        if i < n and blob[i] == ord("#"):
            while i < n and blob[i] != ord("\n"):
                i += 1
            continue
        start = i
        while i < n and not blob[i : i + 1].isspace():
            i += 1
        if start == i:
            raise PpmHeaderError("incomplete header")
        tokens.append(blob[start:i])
    if i >= n:
        raise PpmTruncatedError("no payload after header")
    return tokens, i + 1

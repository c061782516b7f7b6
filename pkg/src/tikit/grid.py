"""Grid-valued data: the discrete function spaces, inner products, and PGM I/O.

A :class:`GridFunction` is a real-valued function on a rectangular pixel grid,
stored row-major and channel-interleaved as 64-bit floats.  Single-channel
grids hold images; 2-channel grids hold gradient fields.  Instances are
immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError, PgmError


@dataclass(frozen=True)
class GridFunction:
    width: int
    height: int
    channels: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.channels < 1:
            raise ParameterError(
                f"grid dimensions must be positive, got "
                f"{self.width}x{self.height}x{self.channels}"
            )
        arr = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        n = self.width * self.height * self.channels
        if arr.size != n:
            raise DimensionError(n, arr.size, "GridFunction values length")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("GridFunction values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self):
        return (self.width, self.height, self.channels)

    def as_array(self) -> np.ndarray:
        """Read-only view shaped (height, width, channels)."""
        return self.values.reshape(self.height, self.width, self.channels)

    @staticmethod
    def from_array(arr: np.ndarray, channels: int | None = None) -> "GridFunction":
        """Build from a (height, width) or (height, width, channels) array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise DimensionError("2- or 3-d array", arr.shape)
        if channels is not None and arr.shape[2] != channels:
            raise DimensionError(channels, arr.shape[2], "channel count")
        h, w, c = arr.shape
        return GridFunction(width=w, height=h, channels=c, values=arr.ravel())

    @staticmethod
    def zeros(width: int, height: int, channels: int = 1) -> "GridFunction":
        return GridFunction(width, height, channels,
                            np.zeros(width * height * channels))


def _check_same_shape(a: GridFunction, b: GridFunction):
    if a.shape != b.shape:
        raise DimensionError(a.shape, b.shape)


def inner_product(a: GridFunction, b: GridFunction) -> float:
    """Euclidean inner product over all entries (grid spacing taken as 1)."""
    _check_same_shape(a, b)
    return float(np.dot(a.values, b.values))


def norm_l2(a: GridFunction) -> float:
    return float(np.linalg.norm(a.values))


def norm_linf(a: GridFunction) -> float:
    return float(np.max(np.abs(a.values))) if a.values.size else 0.0


# ---------------------------------------------------------------------------
# Portable graymap (P2 ASCII / P5 binary, maxval <= 255)

def _next_token(data: bytes, pos: int):
    """Return (token, position after token), skipping whitespace and # comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise PgmError("unexpected end of header", pos)
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def read_pgm(data: bytes) -> GridFunction:
    """Parse a P2/P5 graymap into a single-channel grid with values in [0, 1]."""
    magic, pos = _next_token(bytes(data), 0)
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic {magic!r}", 0)
    fields = []
    for name in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise PgmError(f"non-numeric {name} token {tok!r}", pos - len(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PgmError(f"degenerate image size {width}x{height}", pos)
    if not 0 < maxval <= 255:
        raise PgmError(f"unsupported maxval {maxval}", pos)
    count = width * height
    if magic == b"P5":
        pos += 1  # exactly one whitespace byte separates header and payload
        payload = data[pos:pos + count]
        if len(payload) < count:
            raise PgmError("truncated P5 payload", len(data))
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
        if pixels.max(initial=0.0) > maxval:
            raise PgmError(f"sample exceeds maxval {maxval}", pos)
    else:
        pixels = np.empty(count)
        for i in range(count):
            tok, pos = _next_token(data, pos)
            try:
                v = int(tok)
            except ValueError:
                raise PgmError(f"non-numeric sample {tok!r}", pos - len(tok))
            if not 0 <= v <= maxval:
                raise PgmError(f"sample {v} out of range 0..{maxval}",
                               pos - len(tok))
            pixels[i] = v
    return GridFunction(width, height, 1, pixels / maxval)


def write_pgm(f: GridFunction) -> bytes:
    """Serialize a single-channel grid as a canonical P5 graymap (maxval 255)."""
    if f.channels != 1:
        raise DimensionError(1, f.channels, "write_pgm channel count")
    header = f"P5\n{f.width} {f.height}\n255\n".encode("ascii")
    quantized = np.rint(np.clip(f.values, 0.0, 1.0) * 255.0).astype(np.uint8)
    return header + quantized.tobytes()

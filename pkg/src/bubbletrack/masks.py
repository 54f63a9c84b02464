"""Binary instance masks and their on-disk encodings.

Masks are boolean ``(height, width)`` grids. The run-length encoding is
column-major and always starts with the count of zeros, so an all-ones
mask encodes as ``[0, width*height]``.
"""

from __future__ import annotations

import numpy as np

from .errors import MaskDecodeError


class BitMask:
    """Immutable boolean pixel grid for one object instance."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def area(self) -> int:
        """Number of set pixels."""
        return int(np.count_nonzero(self.data))

    def tight_bbox(self) -> tuple[int, int, int, int]:
        """Tight axis-aligned bounds (x, y, w, h) of the set pixels."""
        rows = np.flatnonzero(self.data.any(axis=1))
        cols = np.flatnonzero(self.data.any(axis=0))
        if rows.size == 0:
            raise ValueError("empty mask has no bounding box")
        y0, y1 = int(rows[0]), int(rows[-1])
        x0, x1 = int(cols[0]), int(cols[-1])
        return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)

    def contains(self, x: float, y: float) -> bool:
        """True iff the pixel containing point (x, y) is set.

        Pixel (i, j) covers the half-open square [j, j+1) x [i, i+1);
        points outside the grid are never contained.
        """
        j = int(np.floor(x))
        i = int(np.floor(y))
        if j < 0 or i < 0 or j >= self.width or i >= self.height:
            return False
        return bool(self.data[i, j])

    def __eq__(self, other) -> bool:
        return isinstance(other, BitMask) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"BitMask({self.width}x{self.height}, area={self.area})"


def encode_mask(mask: BitMask) -> list[int]:
    """Encode a mask as column-major RLE counts starting with zeros."""
    flat = mask.data.flatten(order="F")
    if flat.size == 0:
        return [0]
    # boundaries between runs of equal value
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def decode_rle(counts: list[int], width: int, height: int) -> BitMask:
    """Decode column-major RLE counts (zeros first) into a BitMask."""
    counts = list(counts)
    if any(c < 0 for c in counts):
        raise MaskDecodeError(f"negative run length in RLE counts: {counts}")
    total = sum(counts)
    if total != width * height:
        raise MaskDecodeError(
            f"RLE counts sum to {total}, expected width*height = {width * height}"
        )
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    return BitMask(flat.reshape((height, width), order="F"))


def rasterize_polygon(points: list[tuple[float, float]], width: int, height: int) -> BitMask:
    """Rasterize a closed polygon with even-odd filling.

    Pixel (i, j) is set iff its center (j+0.5, i+0.5) lies inside the
    polygon under the even-odd rule; edges are treated half-open in y so
    vertices are not double counted.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise MaskDecodeError(
            f"polygon needs at least 3 [x, y] vertices, got shape {pts.shape}"
        )
    if not np.isfinite(pts).all():
        raise MaskDecodeError("polygon contains non-finite coordinates")

    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    inside = np.zeros((height, width), dtype=bool)
    n = pts.shape[0]
    for k in range(n):
        x1, y1 = pts[k]
        x2, y2 = pts[(k + 1) % n]
        if y1 == y2:
            continue
        ylo, yhi = (y1, y2) if y1 < y2 else (y2, y1)
        rows = np.nonzero((ys >= ylo) & (ys < yhi))[0]
        if rows.size == 0:
            continue
        t = (ys[rows] - y1) / (y2 - y1)
        x_cross = x1 + t * (x2 - x1)
        inside[rows, :] ^= xs[None, :] < x_cross[:, None]
    return BitMask(inside)


def decode_mask(encoded: dict, width: int, height: int) -> BitMask:
    """Decode a mask payload of the ingestion schema.

    ``encoded`` is either ``{"format": "rle", "counts": [...]}`` or
    ``{"format": "polygon", "points": [[x, y], ...]}``.
    """
    fmt = encoded.get("format")
    if fmt == "rle":
        return decode_rle(encoded["counts"], width, height)
    if fmt == "polygon":
        return rasterize_polygon(encoded["points"], width, height)
    raise MaskDecodeError(f"unknown mask format {fmt!r}")


def mask_union(masks: list[BitMask], width: int, height: int) -> np.ndarray:
    """Boolean union of masks as a raw (height, width) array."""
    out = np.zeros((height, width), dtype=bool)
    for m in masks:
        out |= m.data
    return out

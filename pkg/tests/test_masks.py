import numpy as np
import pytest

from bubbletrack.errors import MaskDecodeError
from bubbletrack.masks import (
    BitMask,
    decode_mask,
    decode_rle,
    encode_mask,
    rasterize_polygon,
)


def point_in_polygon(x, y, poly):
    """Brute-force even-odd crossing test (the rasterization oracle)."""
    inside = False
    j = len(poly) - 1
    for i in range(len(poly)):
        xi, yi = poly[i]
        xj, yj = poly[j]
        if (yi > y) != (yj > y) and x < (xj - xi) * (y - yi) / (yj - yi) + xi:
            inside = not inside
        j = i
    return inside


class TestRle:
    def test_all_zeros(self):
        mask = decode_rle([16], 4, 4)
        assert mask.area == 0
        assert encode_mask(mask) == [16]

    def test_all_ones(self):
        mask = decode_rle([0, 16], 4, 4)
        assert mask.area == 16
        assert encode_mask(mask) == [0, 16]

    def test_full_via_decode_mask(self):
        mask = decode_mask({"format": "rle", "counts": [0, 12]}, 3, 4)
        assert mask.data.all()

    def test_column_major_order(self):
        # single set pixel at row 1, col 0 -> second position column-major
        mask = decode_rle([1, 1, 6], 2, 4)
        assert mask.data[1, 0] and mask.area == 1

    def test_sum_mismatch_rejected(self):
        with pytest.raises(MaskDecodeError):
            decode_rle([3, 2], 4, 4)

    def test_negative_count_rejected(self):
        with pytest.raises(MaskDecodeError):
            decode_rle([-1, 17], 4, 4)

    def test_round_trip_random_masks(self, rng):
        for _ in range(1000):
            data = rng.random((rng.integers(1, 12), rng.integers(1, 12))) < 0.5
            mask = BitMask(data)
            back = decode_rle(encode_mask(mask), mask.width, mask.height)
            assert back == mask

    def test_area_survives_round_trip(self, rng):
        for _ in range(100):
            mask = BitMask(rng.random((64, 64)) < rng.uniform(0.05, 0.95))
            counts = encode_mask(mask)
            assert decode_rle(counts, 64, 64).area == mask.area


class TestPolygon:
    def test_square_pixel_count(self):
        # 20x20 axis-aligned square: covers exactly the pixels whose
        # centers fall inside
        poly = [(2.0, 3.0), (22.0, 3.0), (22.0, 23.0), (2.0, 23.0)]
        mask = rasterize_polygon(poly, 30, 30)
        assert mask.area == 400
        assert mask.tight_bbox() == (2, 3, 20, 20)

    def test_matches_bruteforce_on_random_polygons(self, rng):
        for _ in range(25):
            n = rng.integers(3, 9)
            poly = [(rng.uniform(0, 16), rng.uniform(0, 16)) for _ in range(n)]
            mask = rasterize_polygon(poly, 16, 16)
            for i in range(16):
                for j in range(16):
                    assert mask.data[i, j] == point_in_polygon(j + 0.5, i + 0.5, poly)

    def test_degenerate_rejected(self):
        with pytest.raises(MaskDecodeError):
            rasterize_polygon([(0, 0), (5, 5)], 10, 10)

    def test_unknown_format_rejected(self):
        with pytest.raises(MaskDecodeError):
            decode_mask({"format": "bitmap"}, 4, 4)


class TestBitMask:
    def test_tight_bbox(self):
        data = np.zeros((10, 10), bool)
        data[2:5, 3:9] = True
        assert BitMask(data).tight_bbox() == (3, 2, 6, 3)

    def test_contains_center_and_outside(self):
        data = np.zeros((4, 4), bool)
        data[1, 2] = True
        m = BitMask(data)
        assert m.contains(2.5, 1.5)
        assert not m.contains(-1.0, -1.0)
        assert not m.contains(2.5, 2.5)

    def test_empty_mask_has_no_bbox(self):
        with pytest.raises(ValueError):
            BitMask(np.zeros((3, 3), bool)).tight_bbox()

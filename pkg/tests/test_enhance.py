import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfmap.enhance import (
    ClaheParams,
    MapSmallerThanGridError,
    ValueOutOfRangeError,
    clip_histogram,
    enhance,
    resize,
    tile_histogram,
    tile_transform,
)
from selfmap.tensorio import FeatureMap

from helpers import oracle_clahe, oracle_plain_he


def _gray(map2d) -> FeatureMap:
    return FeatureMap(np.asarray(map2d, dtype=np.uint8)[:, :, None])


# --- tile_histogram ---------------------------------------------------------


def test_cdf_hand_example():
    cdf = tile_histogram(np.array([0, 0, 1, 3]), levels=4)
    assert cdf.tolist() == [2, 3, 3, 4]


def test_cdf_constant_tile():
    cdf = tile_histogram(np.zeros(64, dtype=np.uint8), levels=256)
    assert np.all(cdf == 64)


def test_cdf_empty_tile():
    cdf = tile_histogram(np.array([], dtype=np.uint8), levels=256)
    assert np.all(cdf == 0)


def test_cdf_rejects_out_of_range():
    with pytest.raises(ValueOutOfRangeError):
        tile_histogram(np.array([4]), levels=4)


# --- clip_histogram ----------------------------------------------------------


def test_clip_constant_tile_spreads_excess():
    hist = np.zeros(256, dtype=np.int64)
    hist[7] = 1024
    clipped = clip_histogram(hist, clip_limit=4.0, tile_area=1024, levels=256)
    # ceiling: round(4 * 1024 / 256) = 16; ~3.9 extra per bin on average
    assert clipped.sum() == 1024
    assert clipped[7] <= 16 + int(np.ceil(1008 / 256)) + 1
    others = np.delete(clipped, 7)
    assert others.min() >= 3
    assert others.max() <= 5


def test_clip_noop_below_ceiling():
    hist = np.full(256, 4, dtype=np.int64)
    clipped = clip_histogram(hist, clip_limit=4.0, tile_area=1024, levels=256)
    assert np.array_equal(clipped, hist)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 64.0))
def test_clip_preserves_total_count(seed, clip_limit):
    rng = np.random.default_rng(seed)
    area = int(rng.integers(1, 4096))
    hist = rng.multinomial(area, np.ones(256) / 256)
    clipped = clip_histogram(hist, clip_limit, area, 256)
    assert clipped.sum() == area
    assert clipped.min() >= 0


def test_clip_slope_bound(rng):
    # adjacent-cdf increments stay within ceiling + ceil(excess / L) + 1
    for _ in range(20):
        area = int(rng.integers(256, 8192))
        hist = rng.multinomial(area, rng.dirichlet(np.full(256, 0.05)))
        cl = float(rng.uniform(1.0, 8.0))
        ceiling = max(1, int(np.floor(cl * area / 256 + 0.5)))
        excess = int(np.maximum(hist - ceiling, 0).sum())
        clipped = clip_histogram(hist, cl, area, 256)
        bound = ceiling + int(np.ceil(excess / 256)) + 1
        assert clipped.max() <= bound


# --- tile_transform -----------------------------------------------------------


def test_transform_hand_example():
    cdf = tile_histogram(np.array([0, 0, 1, 3]), levels=4)
    t = tile_transform(cdf, levels=4, tile_area=4)
    assert t.cdf_min == 2
    assert t.cdf_max == 4
    assert t.mapping[0] == 0
    assert t.mapping[1] == 2  # round(1/2 * 3)
    assert t.mapping[3] == 3


def test_transform_constant_tile_degenerate():
    cdf = tile_histogram(np.zeros(64, dtype=np.uint8), levels=256)
    t = tile_transform(cdf, levels=256, tile_area=64)
    assert np.all(t.mapping == 0)


def test_transform_uniform_histogram_is_near_identity():
    values = np.repeat(np.arange(256), 4)
    cdf = tile_histogram(values, levels=256)
    t = tile_transform(cdf, levels=256, tile_area=values.size)
    assert np.max(np.abs(t.mapping - np.arange(256))) <= 1


def test_transform_monotone(rng):
    for _ in range(20):
        values = rng.integers(0, 256, size=int(rng.integers(16, 512)))
        cdf = tile_histogram(values, levels=256)
        t = tile_transform(cdf, levels=256, tile_area=values.size)
        assert np.all(np.diff(t.mapping) >= 0)
        assert t.mapping.min() >= 0 and t.mapping.max() <= 255


# --- enhance -------------------------------------------------------------------


def test_enhance_constant_map_stays_constant():
    fmap = _gray(np.full((32, 48), 77))
    out = enhance(fmap, ClaheParams(grid_a=4, grid_b=4))
    assert np.all(out.data == out.data[0, 0, 0])


def test_enhance_grid_1x1_unbounded_clip_equals_plain_he(rng):
    params = ClaheParams(grid_a=1, grid_b=1, clip_limit=256.0)
    img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    got = enhance(_gray(img), params).data[:, :, 0]
    want = oracle_plain_he(img)
    assert np.array_equal(got, want)


def test_enhance_two_tone_map_matches_reference_oracle():
    img = np.zeros((16, 16), dtype=np.uint8)
    img[:, 8:] = 200
    img[4:12, 4:12] = 90
    params = ClaheParams(grid_a=2, grid_b=2, clip_limit=4.0)
    got = enhance(_gray(img), params).data[:, :, 0]
    want = oracle_clahe(img, 2, 2, 4.0)
    assert np.array_equal(got, want)


def test_enhance_random_maps_match_reference_oracle(rng):
    for _ in range(5):
        img = rng.integers(0, 256, (40, 56), dtype=np.uint8)
        params = ClaheParams(grid_a=4, grid_b=5, clip_limit=3.0)
        got = enhance(_gray(img), params).data[:, :, 0]
        want = oracle_clahe(img, 4, 5, 3.0)
        assert np.array_equal(got, want)


def test_enhance_uneven_tiles_match_reference_oracle(rng):
    # 37x23 does not divide by 4x3; the last tiles absorb the remainder
    img = rng.integers(0, 256, (23, 37), dtype=np.uint8)
    params = ClaheParams(grid_a=4, grid_b=3, clip_limit=4.0)
    got = enhance(_gray(img), params).data[:, :, 0]
    want = oracle_clahe(img, 4, 3, 4.0)
    assert np.array_equal(got, want)


def test_enhance_channels_processed_independently(rng):
    imgs = [rng.integers(0, 256, (32, 32), dtype=np.uint8) for _ in range(3)]
    stacked = FeatureMap(np.stack(imgs, axis=2))
    params = ClaheParams(grid_a=4, grid_b=4)
    combined = enhance(stacked, params)
    for c in range(3):
        alone = enhance(_gray(imgs[c]), params)
        assert np.array_equal(combined.data[:, :, c], alone.data[:, :, 0])


def test_enhance_rejects_map_smaller_than_grid():
    with pytest.raises(MapSmallerThanGridError):
        enhance(_gray(np.zeros((4, 4))), ClaheParams(grid_a=8, grid_b=8))


def test_tile_center_cells_get_their_tile_mapping(rng):
    img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    params = ClaheParams(grid_a=4, grid_b=4, clip_limit=4.0)
    out = enhance(_gray(img), params).data[:, :, 0]
    tile_w = tile_h = 16
    for r in range(4):
        for c in range(4):
            tile = img[r * 16 : (r + 1) * 16, c * 16 : (c + 1) * 16]
            counts = np.bincount(tile.ravel(), minlength=256)
            clipped = clip_histogram(counts, 4.0, tile.size, 256)
            mapping = tile_transform(np.cumsum(clipped), 256, tile.size).mapping
            cy = int((r + 0.5) * tile_h)
            cx = int((c + 0.5) * tile_w)
            assert out[cy, cx] == mapping[img[cy, cx]]


def test_edge_midpoints_are_rounded_means(rng):
    img = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    params = ClaheParams(grid_a=4, grid_b=4, clip_limit=4.0)
    out = enhance(_gray(img), params).data[:, :, 0]

    def mapping_for(r, c):
        tile = img[r * 16 : (r + 1) * 16, c * 16 : (c + 1) * 16]
        counts = np.bincount(tile.ravel(), minlength=256)
        clipped = clip_histogram(counts, 4.0, tile.size, 256)
        return tile_transform(np.cumsum(clipped), 256, tile.size).mapping

    # top border row (y=0 is in the corner band), midway between the centers
    # of tiles (0,0) and (0,1): x = (8 + 24) / 2 = 16
    m0, m1 = mapping_for(0, 0), mapping_for(0, 1)
    for y in (0, 1, 2):
        v = img[y, 16]
        mean = (int(m0[v]) + int(m1[v])) / 2
        assert abs(int(out[y, 16]) - int(np.floor(mean + 0.5))) <= 1


def test_zero_padding_amplification_is_suppressed(rng):
    # half the map is zero padding; clipping must not blow its contrast up
    # the way plain equalization does
    img = rng.integers(60, 200, (32, 64), dtype=np.uint8)
    img[:, 32:] = 0
    clahe_params = ClaheParams(grid_a=8, grid_b=4, clip_limit=4.0)
    out = enhance(_gray(img), clahe_params).data[:, :, 0]
    plain = oracle_plain_he(img)
    zero_region_clahe = int(out[:, 32:].max())
    zero_region_plain = int(plain[:, 32:].max())
    assert zero_region_clahe <= zero_region_plain


# --- resize ---------------------------------------------------------------------


def test_resize_identity_is_bit_exact(rng):
    img = rng.integers(0, 256, (128, 512, 3), dtype=np.uint8)
    fmap = FeatureMap(img)
    out = resize(fmap, 512, 128)
    assert np.array_equal(out.data, img)


def test_resize_checkerboard_average():
    img = np.array([[0, 255], [255, 0]], dtype=np.uint8)
    out = resize(_gray(img), 1, 1)
    assert abs(int(out.data[0, 0, 0]) - 128) <= 1


def test_resize_constant_upscale():
    img = np.full((4, 4), 99, dtype=np.uint8)
    out = resize(_gray(img), 64, 32)
    assert (out.height, out.width) == (32, 64)
    assert np.all(out.data == 99)


def test_resize_bounds(rng):
    img = rng.integers(0, 256, (16, 48), dtype=np.uint8)
    out = resize(_gray(img), 512, 128)
    assert (out.height, out.width) == (128, 512)
    assert out.data.min() >= 0 and out.data.max() <= 255

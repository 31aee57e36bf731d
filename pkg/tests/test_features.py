import numpy as np
import pytest
from hypothesis import given, strategies as st

from consensus_labeler.features import (PATCH_SIZE, ShapeError, ndvi, ndwi,
                                        patch_features, slope)
from consensus_labeler.rasters import Raster, RasterError

reflectance = st.floats(min_value=0.0, max_value=1.0,
                        allow_nan=False, allow_infinity=False)


class TestIndices:
    def test_ndvi_symmetric(self):
        assert ndvi(0.4, 0.4) == 0.0

    def test_ndvi_closed_form(self):
        assert ndvi(0.5, 0.25) == pytest.approx(1 / 3)

    def test_ndvi_boundary(self):
        assert ndvi(0.0, 0.3) == -1.0

    def test_ndvi_zero_denominator(self):
        with pytest.raises(ZeroDivisionError):
            ndvi(0.0, 0.0)

    def test_ndwi_symmetric(self):
        assert ndwi(0.2, 0.2) == 0.0

    def test_ndwi_closed_form(self):
        assert ndwi(0.6, 0.2) == pytest.approx(0.5)

    def test_ndwi_boundary(self):
        assert ndwi(0.4, 0.0) == 1.0

    @given(a=reflectance, b=reflectance)
    def test_indices_bounded(self, a, b):
        if a + b > 0:
            assert -1.0 <= ndvi(a, b) <= 1.0
            assert -1.0 <= ndwi(a, b) <= 1.0

    def test_array_input(self):
        out = ndvi(np.array([0.5, 0.4]), np.array([0.25, 0.4]))
        assert out == pytest.approx([1 / 3, 0.0])


def dem(values, cellsize=1.0):
    return Raster(values=np.array(values, dtype=float), x_origin=0.0,
                  y_origin=0.0, cellsize=cellsize)


class TestSlope:
    def test_flat_surface(self):
        s = slope(dem(np.full((5, 5), 42.0)))
        assert np.all(s.values[1:-1, 1:-1] == 0.0)

    def test_border_is_nodata(self):
        s = slope(dem(np.zeros((4, 4))))
        assert np.isnan(s.values[0, :]).all()
        assert np.isnan(s.values[:, 0]).all()

    def test_unit_plane_is_45_degrees(self):
        vals = np.tile(np.arange(6, dtype=float), (6, 1))
        s = slope(dem(vals, cellsize=1.0))
        assert s.values[2, 2] == pytest.approx(45.0)

    def test_nodata_neighbor_propagates(self):
        vals = np.zeros((5, 5))
        vals[1, 1] = np.nan
        s = slope(dem(vals))
        assert np.isnan(s.values[2, 2])
        assert s.values[3, 3] == 0.0

    def test_too_small_raster(self):
        with pytest.raises(RasterError):
            slope(dem(np.zeros((2, 5))))


class TestPatchFeatures:
    def test_constant_patch(self):
        feats = patch_features(np.full((PATCH_SIZE, PATCH_SIZE), 0.5))
        mean, std, grad = feats[0], feats[1], feats[2]
        assert mean == 0.5 and std == 0.0 and grad == 0.0
        assert feats[3] == 1.0            # all mass in the first bin
        assert feats[4:7].tolist() == [0.0, 0.0, 0.0]

    def test_checkerboard_has_texture(self):
        idx = np.indices((PATCH_SIZE, PATCH_SIZE)).sum(axis=0)
        feats = patch_features((idx % 2).astype(float))
        assert feats[2] > 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(17)
        patch = rng.random((PATCH_SIZE, PATCH_SIZE, 2))
        feats = patch_features(patch)
        for ch in range(2):
            band = patch[:, :, ch]
            gy, gx = np.gradient(band)
            expect = [band.mean(), band.std(),
                      np.mean(np.hypot(gx, gy))]
            hist, _ = np.histogram(band, bins=4,
                                   range=(band.min(), band.max()))
            expect += (hist / band.size).tolist()
            got = feats[7 * ch:7 * (ch + 1)]
            assert np.allclose(got, expect, atol=1e-12)

    def test_wrong_shape_rejected(self):
        with pytest.raises(ShapeError):
            patch_features(np.zeros((100, 100)))

    def test_fixed_length_ordering(self):
        assert patch_features(np.zeros((PATCH_SIZE, PATCH_SIZE))).shape == (7,)
        assert patch_features(np.zeros((PATCH_SIZE, PATCH_SIZE, 3))).shape == (21,)

import numpy as np
import pytest

from consensus_labeler.rasters import AgreementRaster, Raster


@pytest.fixture
def make_raster():
    def _make(values, x_origin=0.0, y_origin=0.0, cellsize=1.0):
        return Raster(values=np.array(values, dtype=float),
                      x_origin=x_origin, y_origin=y_origin,
                      cellsize=cellsize)
    return _make


@pytest.fixture
def make_agreement():
    def _make(values, n_products=5, x_origin=0.0, y_origin=0.0, cellsize=1.0):
        return AgreementRaster(values=np.array(values, dtype=float),
                               x_origin=x_origin, y_origin=y_origin,
                               cellsize=cellsize, n_products=n_products)
    return _make

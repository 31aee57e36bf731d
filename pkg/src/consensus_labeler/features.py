"""Feature extraction: spectral indices, terrain slope, and summary
features for image patches."""

from __future__ import annotations

import numpy as np

from .rasters import Raster, RasterError

PATCH_SIZE = 165


class ShapeError(ValueError):
    pass


def ndvi(nir, red):
    """(nir - red) / (nir + red); in [-1, 1] for non-negative inputs."""
    nir = np.asarray(nir, dtype=float)
    red = np.asarray(red, dtype=float)
    denom = nir + red
    if np.any(denom == 0):
        raise ZeroDivisionError("ndvi undefined where nir + red == 0")
    out = (nir - red) / denom
    return float(out) if out.ndim == 0 else out


def ndwi(green, nir):
    """(green - nir) / (green + nir); in [-1, 1] for non-negative inputs."""
    green = np.asarray(green, dtype=float)
    nir = np.asarray(nir, dtype=float)
    denom = green + nir
    if np.any(denom == 0):
        raise ZeroDivisionError("ndwi undefined where green + nir == 0")
    out = (green - nir) / denom
    return float(out) if out.ndim == 0 else out


def slope(dem: Raster) -> Raster:
    """Horn 3x3 slope in degrees. Border pixels and pixels with any nodata
    neighbor are nodata."""
    if dem.nrows < 3 or dem.ncols < 3:
        raise RasterError("slope needs a raster of at least 3x3")
    z = dem.values
    out = np.full_like(z, np.nan)
    cs = dem.cellsize
    # 3x3 neighborhoods of every interior pixel
    nbr = {}
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            nbr[(di, dj)] = z[1 + di:z.shape[0] - 1 + di,
                              1 + dj:z.shape[1] - 1 + dj]
    dzdx = ((nbr[(-1, 1)] + 2 * nbr[(0, 1)] + nbr[(1, 1)])
            - (nbr[(-1, -1)] + 2 * nbr[(0, -1)] + nbr[(1, -1)])) / (8 * cs)
    dzdy = ((nbr[(1, -1)] + 2 * nbr[(1, 0)] + nbr[(1, 1)])
            - (nbr[(-1, -1)] + 2 * nbr[(-1, 0)] + nbr[(-1, 1)])) / (8 * cs)
    grad = np.degrees(np.arctan(np.sqrt(dzdx ** 2 + dzdy ** 2)))
    bad = np.zeros_like(grad, dtype=bool)
    for window in nbr.values():
        bad |= np.isnan(window)
    grad[bad] = np.nan
    out[1:-1, 1:-1] = grad
    return dem.copy_with(out)


def patch_features(patch: np.ndarray) -> np.ndarray:
    """Summary feature vector of a 165x165 multi-channel patch: per-channel
    mean, std, gradient-magnitude mean, and a 4-bin intensity histogram.

    Channel axis last; a 2-D patch is treated as single-channel. Ordering is
    fixed: for each channel (mean, std, grad_mean, h0..h3).
    """
    patch = np.asarray(patch, dtype=float)
    if patch.ndim == 2:
        patch = patch[:, :, None]
    if patch.ndim != 3 or patch.shape[0] != PATCH_SIZE or patch.shape[1] != PATCH_SIZE:
        raise ShapeError(f"patch must be {PATCH_SIZE}x{PATCH_SIZE}[xC], "
                         f"got {patch.shape}")
    feats = []
    for ch in range(patch.shape[2]):
        band = patch[:, :, ch]
        gy, gx = np.gradient(band)
        grad_mean = float(np.mean(np.sqrt(gx ** 2 + gy ** 2)))
        lo, hi = float(band.min()), float(band.max())
        if hi == lo:
            hist = np.array([band.size, 0, 0, 0], dtype=float)
        else:
            hist, _ = np.histogram(band, bins=4, range=(lo, hi))
            hist = hist.astype(float)
        hist /= band.size
        feats.extend([float(band.mean()), float(band.std()), grad_mean,
                      *hist.tolist()])
    return np.array(feats)

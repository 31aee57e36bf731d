"""Raster data model and ESRI ASCII Grid I/O.

Rasters are stored as 2-D float arrays in map orientation: row 0 is the
northernmost row, matching the on-disk layout of ASCII grids. Nodata cells
are NaN in memory and the ``nodata`` sentinel on disk.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


class RasterError(Exception):
    pass


class AlignmentError(RasterError):
    pass


class UndefinedRegionError(RasterError):
    """No pixel with agreement value >= 1 in the requested region."""


@dataclass
class Raster:
    values: np.ndarray          # shape (nrows, ncols), float, NaN = nodata
    x_origin: float             # lower-left corner, degrees
    y_origin: float
    cellsize: float
    nodata: float = -9999.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise RasterError("raster values must be 2-D")
        if self.nrows < 1 or self.ncols < 1:
            raise RasterError("raster must have at least one row and column")
        if self.cellsize <= 0:
            raise RasterError("cellsize must be positive")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def valid_mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def same_georef(self, other: "Raster") -> bool:
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and abs(self.x_origin - other.x_origin) < 1e-9
            and abs(self.y_origin - other.y_origin) < 1e-9
            and abs(self.cellsize - other.cellsize) < 1e-12
        )

    def pixel_lonlat(self):
        """Center coordinates of every pixel, as (lon, lat) 2-D arrays."""
        cols = np.arange(self.ncols)
        rows = np.arange(self.nrows)
        lon = self.x_origin + (cols + 0.5) * self.cellsize
        lat = self.y_origin + (self.nrows - 1 - rows + 0.5) * self.cellsize
        return np.meshgrid(lon, lat)

    def copy_with(self, values: np.ndarray) -> "Raster":
        return Raster(values=np.array(values, dtype=float),
                      x_origin=self.x_origin, y_origin=self.y_origin,
                      cellsize=self.cellsize, nodata=self.nodata)

    def check_binary(self):
        v = self.values[self.valid_mask]
        if not np.all((v == 0) | (v == 1)):
            raise RasterError("binary raster contains values outside {0, 1}")


@dataclass
class AgreementRaster(Raster):
    n_products: int = 0

    def __post_init__(self):
        super().__post_init__()
        v = self.values[self.valid_mask]
        if v.size and (v.min() < 0 or v.max() > self.n_products):
            raise RasterError("agreement values must lie in [0, n_products]")


def read_ascii_grid(path_or_file) -> Raster:
    """Parse an ESRI ASCII Grid file (6-line header then row-major values)."""
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = text.replace("\r\n", "\n").strip().split("\n")
    header = {}
    n_header = 0
    for line in lines[:6]:
        parts = line.split(None, 1)
        if len(parts) != 2 or not parts[0][:1].isalpha():
            break
        header[parts[0].lower()] = float(parts[1])
        n_header += 1
    required = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
    for key in required:
        if key not in header:
            raise RasterError(f"missing ASCII grid header field: {key}")
    nodata = header.get("nodata_value", -9999.0)
    values = np.loadtxt(io.StringIO("\n".join(lines[n_header:])), dtype=float,
                        ndmin=2)
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    values = values.reshape(nrows, ncols)
    values[values == nodata] = np.nan
    return Raster(values=values, x_origin=header["xllcorner"],
                  y_origin=header["yllcorner"], cellsize=header["cellsize"],
                  nodata=nodata)


def write_ascii_grid(raster: Raster, path) -> None:
    out = raster.values.copy()
    out[np.isnan(out)] = raster.nodata
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"ncols {raster.ncols}\n")
        fh.write(f"nrows {raster.nrows}\n")
        fh.write(f"xllcorner {raster.x_origin:.10g}\n")
        fh.write(f"yllcorner {raster.y_origin:.10g}\n")
        fh.write(f"cellsize {raster.cellsize:.10g}\n")
        fh.write(f"NODATA_value {raster.nodata:.10g}\n")
        for row in out:
            fh.write(" ".join(f"{v:.10g}" for v in row))
            fh.write("\n")


def overlay_votes(products: list[Raster]) -> AgreementRaster:
    """Per-pixel count of products voting 1. Any-nodata pixels become nodata."""
    if not products:
        raise ValueError("need at least one product raster")
    if len(products) < 2:
        raise ValueError("agreement overlay needs at least two products")
    ref = products[0]
    for p in products[1:]:
        if not ref.same_georef(p):
            raise AlignmentError("product rasters do not share a georeference")
    for p in products:
        p.check_binary()
    stack = np.stack([p.values for p in products])
    counts = np.sum(stack, axis=0)
    counts[np.any(np.isnan(stack), axis=0)] = np.nan
    return AgreementRaster(values=counts, x_origin=ref.x_origin,
                           y_origin=ref.y_origin, cellsize=ref.cellsize,
                           nodata=ref.nodata, n_products=len(products))


def uncertainty_23(agreement: AgreementRaster,
                   region_mask: Raster | np.ndarray | None = None) -> float:
    """Ratio of pixels valued 2-3 to pixels valued >= 1 within the region."""
    values = agreement.values
    if region_mask is not None:
        if isinstance(region_mask, Raster):
            if not agreement.same_georef(region_mask):
                raise AlignmentError("region mask not aligned with agreement raster")
            mask = (region_mask.values == 1)
        else:
            mask = np.asarray(region_mask, dtype=bool)
        values = np.where(mask, values, np.nan)
    valid = values[~np.isnan(values)]
    denom = np.count_nonzero(valid >= 1)
    if denom == 0:
        raise UndefinedRegionError("region has no pixel with agreement value >= 1")
    num = np.count_nonzero((valid == 2) | (valid == 3))
    return num / denom

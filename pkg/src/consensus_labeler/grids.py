"""Grid partitioning of rasters: certainty classification, coarse
aggregation to forest fractions, and pairwise product statistics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .rasters import (AgreementRaster, AlignmentError, Raster, RasterError,
                      UndefinedRegionError, uncertainty_23)

CERTAIN = "certain"
UNCERTAIN = "uncertain"
EXCLUDED = "excluded"


class GeometryError(RasterError):
    pass


class StatisticsError(RasterError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Regular lon/lat grid anchored at (0, 0). Cells are identified by the
    integer column/row of their lower-left corner."""
    cell_degrees: float

    def __post_init__(self):
        if self.cell_degrees <= 0:
            raise GeometryError("grid cell size must be positive")

    def cell_of(self, lon: float, lat: float) -> tuple[int, int]:
        return (int(np.floor(lon / self.cell_degrees)),
                int(np.floor(lat / self.cell_degrees)))

    def grid_id(self, col: int, row: int) -> str:
        return f"c{col}_r{row}"

    def parse_id(self, grid_id: str) -> tuple[int, int]:
        col_part, row_part = grid_id.split("_")
        if not (col_part.startswith("c") and row_part.startswith("r")):
            raise ValueError(f"bad grid id: {grid_id!r}")
        return int(col_part[1:]), int(row_part[1:])

    def cell_bounds(self, col: int, row: int):
        lo_lon = col * self.cell_degrees
        lo_lat = row * self.cell_degrees
        return lo_lon, lo_lat, lo_lon + self.cell_degrees, lo_lat + self.cell_degrees


@dataclass
class GridCertaintyLabel:
    grid_id: str
    label: str                      # certain | uncertain | excluded
    uncertainty_23: float | None    # absent when excluded
    valid_fraction: float


def _grid_cell_indices(raster: Raster, grids: GridSpec):
    """Yield (col, row, boolean pixel mask) for every grid cell that
    contains at least one pixel center of the raster."""
    lon, lat = raster.pixel_lonlat()
    cols = np.floor(lon / grids.cell_degrees).astype(int)
    rows = np.floor(lat / grids.cell_degrees).astype(int)
    for col, row in sorted({(int(c), int(r))
                            for c, r in zip(cols.ravel(), rows.ravel())}):
        yield col, row, (cols == col) & (rows == row)


def classify_grids(agreement: AgreementRaster, grids: GridSpec,
                   threshold: float = 0.3,
                   min_valid_fraction: float = 0.10) -> list[GridCertaintyLabel]:
    """Label every covering grid cell certain/uncertain/excluded.

    A cell is excluded when pixels with agreement value >= 1 make up no more
    than ``min_valid_fraction`` of its total pixel area; otherwise it is
    uncertain when the 2-3 ratio strictly exceeds ``threshold``.
    """
    labels = []
    for col, row, mask in _grid_cell_indices(agreement, grids):
        gid = grids.grid_id(col, row)
        cell = agreement.values[mask]
        total = cell.size
        valid = cell[~np.isnan(cell)]
        n_ge1 = int(np.count_nonzero(valid >= 1))
        valid_fraction = n_ge1 / total
        if valid_fraction <= min_valid_fraction:
            labels.append(GridCertaintyLabel(gid, EXCLUDED, None, valid_fraction))
            continue
        u = np.count_nonzero((valid == 2) | (valid == 3)) / n_ge1
        label = UNCERTAIN if u > threshold else CERTAIN
        labels.append(GridCertaintyLabel(gid, label, u, valid_fraction))
    return labels


def region_uncertainty(agreement: AgreementRaster, region_mask=None) -> float:
    """Alias for the masked 2-3 ratio (kept near its grid-level consumers)."""
    return uncertainty_23(agreement, region_mask)


def aggregate_fraction(binary: Raster, coarse: GridSpec) -> Raster:
    """Fraction of forest pixels per coarse cell; all-nodata cells -> nodata."""
    binary.check_binary()
    ratio = coarse.cell_degrees / binary.cellsize
    factor = round(ratio)
    if abs(ratio - factor) > 1e-6 or factor < 1:
        raise GeometryError(
            "coarse cell size must be an integer multiple of the raster cellsize")
    nrows_c = int(np.ceil(binary.nrows / factor))
    ncols_c = int(np.ceil(binary.ncols / factor))
    out = np.full((nrows_c, ncols_c), np.nan)
    # pad so the top (north) edge aligns with a coarse-cell boundary
    pad_rows = nrows_c * factor - binary.nrows
    vals = np.pad(binary.values, ((pad_rows, 0), (0, ncols_c * factor - binary.ncols)),
                  constant_values=np.nan)
    for i in range(nrows_c):
        for j in range(ncols_c):
            block = vals[i * factor:(i + 1) * factor, j * factor:(j + 1) * factor]
            ok = ~np.isnan(block)
            if ok.any():
                out[i, j] = block[ok].sum() / ok.sum()
    return Raster(values=out, x_origin=binary.x_origin, y_origin=binary.y_origin,
                  cellsize=coarse.cell_degrees, nodata=binary.nodata)


def pairwise_stats(a: Raster, b: Raster) -> dict:
    """Least-squares slope of b on a, Pearson r, fit R^2, and RMSE of (b-a)
    over jointly valid cells."""
    if not a.same_georef(b):
        raise AlignmentError("fraction rasters not aligned")
    ok = a.valid_mask & b.valid_mask
    x = a.values[ok]
    y = b.values[ok]
    if x.size < 2:
        raise StatisticsError("need at least two jointly valid cells")
    if np.ptp(x) == 0:
        raise StatisticsError("zero variance in first raster")
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = np.sum((y - fit) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if np.ptp(y) == 0:
        pearson = 1.0 if np.ptp(x) == 0 else 0.0
    else:
        pearson = float(np.corrcoef(x, y)[0, 1])
    rmse = float(np.sqrt(np.mean((y - x) ** 2)))
    return {"slope": float(slope), "pearson_r": pearson,
            "r_squared": float(r2), "rmse": rmse}


def write_grid_report(labels: list[GridCertaintyLabel], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid_id", "label", "uncertainty_23", "valid_fraction"])
        for lab in labels:
            u = "" if lab.uncertainty_23 is None else f"{lab.uncertainty_23:.6f}"
            writer.writerow([lab.grid_id, lab.label, u, f"{lab.valid_fraction:.6f}"])

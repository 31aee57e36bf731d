"""Deterministic synthetic world: ground-truth forest raster, disagreeing
product rasters, feature bands, DEM, ecoregions and renderable texture
patches. Everything derives from one seed.

The world spans 20 x 20 degrees anchored at (0, 0). A latitude belt plays
the role of a transition zone: product errors are concentrated there and
the band separating forest from non-forest switches (nir outside the belt,
swir2 inside), so models trained only on high-agreement regions transfer
poorly into the belt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .features import ndvi as ndvi_index
from .features import ndwi as ndwi_index
from .features import slope as slope_op
from .grids import GridSpec
from .rasters import AgreementRaster, Raster, overlay_votes
from .samples import (FOREST, NON_FOREST, FeatureVector, LandCoverClass,
                      SamplePoint, SampleStore)

PATCH = 165


class WorldConfigError(ValueError):
    pass


# the documented golden seed used by the shipped world and its tests
SHIPPED_SEED = 20200501


@dataclass
class WorldConfig:
    seed: int = 20200501
    ncols: int = 160
    nrows: int = 160
    extent_degrees: float = 20.0
    n_products: int = 5
    n_ecoregions: int = 4
    base_flip: float = 0.05
    belt_flip: float = 0.30
    belt_lat: tuple = (5.0, 10.0)
    eco_shift: float = 0.10        # per-ecoregion offset on the nir band
    noise_sigma: float = 0.05
    cloudy_fraction: float = 0.0   # fraction of patches rendered unusable

    def __post_init__(self):
        if self.ncols < 16 or self.nrows < 16:
            raise WorldConfigError("world must be at least 16x16")
        if not (0 <= self.base_flip < 0.5 and 0 <= self.belt_flip < 0.5):
            raise WorldConfigError("flip rates must lie in [0, 0.5)")
        if self.belt_flip < self.base_flip:
            raise WorldConfigError("belt flip rate must exceed the base rate")

    @property
    def cellsize(self) -> float:
        return self.extent_degrees / self.ncols


def _box_blur(a: np.ndarray, radius: int, passes: int = 3) -> np.ndarray:
    """Separable box blur; repeated passes approximate a Gaussian."""
    out = a.astype(float)
    size = 2 * radius + 1
    for _ in range(passes):
        out = uniform_filter(out, size=size, mode="nearest")
    return out


def _smooth_noise(rng, shape, radius=4) -> np.ndarray:
    return _box_blur(rng.standard_normal(shape), radius)


@dataclass
class SynthWorld:
    config: WorldConfig
    truth: Raster = None
    products: list = field(default_factory=list)
    agreement: AgreementRaster = None
    bands: dict = field(default_factory=dict)
    dem: Raster = None
    slope: Raster = None
    ecoregions: Raster = None
    ndvi: Raster = None
    ndwi: Raster = None

    def _raster(self, values) -> Raster:
        return Raster(values=values, x_origin=0.0, y_origin=0.0,
                      cellsize=self.config.cellsize)

    def belt_mask(self) -> np.ndarray:
        _, lat = self.truth.pixel_lonlat()
        lo, hi = self.config.belt_lat
        return (lat >= lo) & (lat < hi)

    def truth_class(self, row: int, col: int) -> LandCoverClass:
        """Multi-class ground truth: forest pixels are forest; non-forest
        pixels alternate shrubland/grassland by position parity."""
        if self.truth.values[row, col] == 1:
            return LandCoverClass.forest
        return (LandCoverClass.shrubland if (row + col) % 2
                else LandCoverClass.grassland)

    # --- patches ---

    def render_patch(self, row: int, col: int) -> np.ndarray:
        """Class-dependent 165x165 texture; deterministic per location."""
        cfg = self.config
        rng = np.random.default_rng(
            (cfg.seed, 7919 * row + col, 104729))
        cloudy = cfg.cloudy_fraction > 0 and rng.random() < cfg.cloudy_fraction
        cls = self.truth_class(row, col)
        if cloudy:
            base = 0.9 + 0.05 * _smooth_noise(rng, (PATCH, PATCH), radius=8)
            return np.clip(base, 0, 1)
        if cls is LandCoverClass.forest:
            # blobby canopies: thresholded smooth noise with shadows
            blobs = _smooth_noise(rng, (PATCH, PATCH), radius=6)
            canopy = (blobs > np.quantile(blobs, 0.35)).astype(float)
            tex = 0.15 + 0.35 * canopy + 0.05 * rng.standard_normal((PATCH, PATCH))
        elif cls is LandCoverClass.shrubland:
            # scattered speckle over bright ground
            speckle = (rng.random((PATCH, PATCH)) < 0.12).astype(float)
            tex = 0.6 - 0.3 * _box_blur(speckle, 1, passes=1) \
                + 0.04 * rng.standard_normal((PATCH, PATCH))
        else:
            # grassland: smooth, nearly featureless
            tex = 0.7 + 0.04 * _smooth_noise(rng, (PATCH, PATCH), radius=10)
        return np.clip(tex, 0, 1)

    def patch_is_cloudy(self, row: int, col: int) -> bool:
        cfg = self.config
        rng = np.random.default_rng((cfg.seed, 7919 * row + col, 104729))
        return cfg.cloudy_fraction > 0 and rng.random() < cfg.cloudy_fraction


def generate(config: WorldConfig) -> SynthWorld:
    """Build the full synthetic world from its seed."""
    cfg = config
    world = SynthWorld(config=cfg)
    shape = (cfg.nrows, cfg.ncols)
    rng = np.random.default_rng(cfg.seed)

    # ground truth: thresholded smooth noise, roughly half forest
    base = _smooth_noise(rng, shape, radius=6)
    truth_vals = (base > np.median(base)).astype(float)
    world.truth = world._raster(truth_vals)

    lon, lat = world.truth.pixel_lonlat()
    lo, hi = cfg.belt_lat
    belt = (lat >= lo) & (lat < hi)

    # products: truth with spatially correlated flips, heavier in the belt
    products = []
    for _ in range(cfg.n_products):
        f = _smooth_noise(rng, shape, radius=3)
        flips = np.zeros(shape, dtype=bool)
        outside = ~belt
        if cfg.base_flip > 0 and outside.any():
            q = np.quantile(f[outside], 1 - cfg.base_flip)
            flips |= outside & (f > q)
        if cfg.belt_flip > 0 and belt.any():
            q = np.quantile(f[belt], 1 - cfg.belt_flip)
            flips |= belt & (f > q)
        vals = truth_vals.copy()
        vals[flips] = 1 - vals[flips]
        products.append(world._raster(vals))
    world.products = products
    world.agreement = overlay_votes(products)

    # ecoregions: longitude bands, ids 1..n
    eco_width = cfg.extent_degrees / cfg.n_ecoregions
    eco = np.floor(lon / eco_width).astype(float) + 1
    eco = np.clip(eco, 1, cfg.n_ecoregions)
    world.ecoregions = world._raster(eco)
    eco_offset = cfg.eco_shift * (eco - 1)

    # bands: nir separates classes outside the belt, swir2 inside it;
    # red marks the belt so mixed models can condition on it
    s = cfg.noise_sigma
    forest = truth_vals == 1

    def noisy(meanfield):
        return np.clip(meanfield + s * rng.standard_normal(shape), 0.0, 1.0)

    nir_mean = np.where(belt, 0.45, np.where(forest, 0.62, 0.30)) + eco_offset
    swir2_mean = np.where(belt, np.where(forest, 0.20, 0.42), 0.30)
    bands = {
        "blue": noisy(np.full(shape, 0.10)),
        "green": noisy(np.where(forest, 0.28, 0.40)),
        "red": noisy(np.where(belt, 0.50, 0.20)),
        "nir": noisy(np.clip(nir_mean, 0, 1)),
        "swir1": noisy(np.full(shape, 0.30)),
        "swir2": noisy(swir2_mean),
    }
    world.bands = {k: world._raster(v) for k, v in bands.items()}

    world.ndvi = world._raster(ndvi_index(bands["nir"], bands["red"]))
    world.ndwi = world._raster(ndwi_index(bands["green"], bands["nir"]))

    dem_vals = 500.0 + 300.0 * _smooth_noise(rng, shape, radius=8)
    world.dem = world._raster(dem_vals)
    world.slope = slope_op(world.dem)
    return world


def shipped_world() -> SynthWorld:
    return generate(WorldConfig(seed=SHIPPED_SEED))


def build_store(world: SynthWorld, n_samples: int = 20000,
                seed: int = 0) -> tuple[SampleStore, dict]:
    """Uniform random sample of pixels as a SampleStore plus the
    ground-truth class oracle {sample_id: LandCoverClass}."""
    cfg = world.config
    rng = np.random.default_rng(seed)
    total = cfg.nrows * cfg.ncols
    n = min(n_samples, total)
    flat = rng.choice(total, size=n, replace=False)
    flat = np.sort(flat)
    grid5 = GridSpec(5.0)
    lon, lat = world.truth.pixel_lonlat()
    samples = []
    truth_classes = {}
    slope_vals = world.slope.values
    for f in flat:
        r, c = divmod(int(f), cfg.ncols)
        sid = f"s{r}_{c}"
        fv = FeatureVector(
            blue=float(world.bands["blue"].values[r, c]),
            green=float(world.bands["green"].values[r, c]),
            red=float(world.bands["red"].values[r, c]),
            nir=float(world.bands["nir"].values[r, c]),
            swir1=float(world.bands["swir1"].values[r, c]),
            swir2=float(world.bands["swir2"].values[r, c]),
            ndvi=float(world.ndvi.values[r, c]),
            ndwi=float(world.ndwi.values[r, c]),
            slope=float(np.nan_to_num(slope_vals[r, c])),
        )
        plon, plat = float(lon[r, c]), float(lat[r, c])
        col5, row5 = grid5.cell_of(plon, plat)
        samples.append(SamplePoint(
            id=sid, lon=plon, lat=plat,
            grid_id=grid5.grid_id(col5, row5),
            ecoregion_id=int(world.ecoregions.values[r, c]),
            product_votes=int(world.agreement.values[r, c]),
            features=fv, patch_ref=sid))
        truth_classes[sid] = world.truth_class(r, c)
    return SampleStore(samples), truth_classes


def patch_for_sample(world: SynthWorld, sample_id: str) -> np.ndarray:
    row, col = (int(x) for x in sample_id[1:].split("_"))
    return world.render_patch(row, col)


def binary_truth(truth_classes: dict) -> dict:
    return {sid: (FOREST if cls is LandCoverClass.forest else NON_FOREST)
            for sid, cls in truth_classes.items()}


def oracle_label_all(store: SampleStore, truth_classes: dict) -> None:
    """Stamp every sample with its ground-truth label (post-annotation
    store stand-in for the evaluation harnesses)."""
    binary = binary_truth(truth_classes)
    for s in store:
        s.current_label = binary[s.id]
        s.label_source = "human"
        s.confirmed = True
        store.commit(s)


def composition_sets(store: SampleStore, truth_classes: dict,
                     world: SynthWorld, n_uncertain: int = 1000,
                     seed: int = 0):
    """Carve the store into (certain consensus-labeled, human-labeled
    uncertain, belt evaluation set) for the composition experiment."""
    binary = binary_truth(truth_classes)
    lo, hi = world.config.belt_lat
    certain, belt_uncertain = [], []
    for s in store:
        if s.product_votes in (4, 5):
            s.current_label = FOREST
            certain.append(s)
        elif s.product_votes == 0:
            s.current_label = NON_FOREST
            certain.append(s)
        elif s.product_votes in (2, 3) and lo <= s.lat < hi:
            belt_uncertain.append(s)
    rng = np.random.default_rng(seed)
    belt_uncertain = sorted(belt_uncertain, key=lambda s: s.id)
    order = rng.permutation(len(belt_uncertain))
    n_labeled = min(n_uncertain, len(belt_uncertain) // 2)
    labeled = [belt_uncertain[i] for i in order[:n_labeled]]
    eval_set = [belt_uncertain[i] for i in order[n_labeled:]]
    for s in labeled + eval_set:
        s.current_label = binary[s.id]
    return certain, labeled, eval_set

"""Sample catalog: labeled points with votes, provenance and annotation
history, persisted as JSON Lines. Also the descriptive statistics built on
the catalog (certainty partitioning, type certainty, misclassification
ratio, stratified sampling, train/validation splitting)."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from .rasters import Raster

SCHEMA_VERSION = 1

FOREST = "forest"
NON_FOREST = "non-forest"


class LandCoverClass(str, Enum):
    forest = "forest"
    shrubland = "shrubland"
    grassland = "grassland"
    cropland = "cropland"
    impervious = "impervious"
    water = "water"
    bare = "bare"
    other = "other"
    unlabelable = "unlabelable"

    def binary(self) -> str | None:
        """Binary projection; unlabelable has no projection."""
        if self is LandCoverClass.unlabelable:
            return None
        return FOREST if self is LandCoverClass.forest else NON_FOREST


class DataError(Exception):
    pass


class EmptyRegionError(DataError):
    pass


@dataclass
class FeatureVector:
    blue: float = 0.0
    green: float = 0.0
    red: float = 0.0
    nir: float = 0.0
    swir1: float = 0.0
    swir2: float = 0.0
    ndvi: float = 0.0
    ndwi: float = 0.0
    slope: float = 0.0

    FIELD_ORDER = ("blue", "green", "red", "nir", "swir1", "swir2",
                   "ndvi", "ndwi", "slope")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELD_ORDER])


@dataclass
class AnnotationRecord:
    annotator_id: str
    decided_class: LandCoverClass
    timestamp: float = 0.0

    def to_json(self) -> dict:
        return {"annotator_id": self.annotator_id,
                "decided_class": self.decided_class.value,
                "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, d: dict) -> "AnnotationRecord":
        return cls(d["annotator_id"], LandCoverClass(d["decided_class"]),
                   d.get("timestamp", 0.0))


@dataclass
class SamplePoint:
    id: str
    lon: float
    lat: float
    grid_id: str = ""
    ecoregion_id: int = 0
    product_votes: int = 0
    features: FeatureVector = field(default_factory=FeatureVector)
    patch_ref: str = ""
    init_label: str | None = None          # forest | non-forest
    current_label: str | None = None
    label_source: str = "product-consensus"  # product-consensus|classifier|human
    confirmed: bool = False
    excluded: bool = False                 # unlabelable imagery
    annotations: list[AnnotationRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        d = asdict(self)
        d["features"] = asdict(self.features)
        d["annotations"] = [a.to_json() for a in self.annotations]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SamplePoint":
        d = dict(d)
        d["features"] = FeatureVector(**d.get("features", {}))
        d["annotations"] = [AnnotationRecord.from_json(a)
                            for a in d.get("annotations", [])]
        return cls(**d)


@dataclass
class CertaintyPartition:
    certain_forest: list[SamplePoint]
    certain_nonforest: list[SamplePoint]
    uncertain: list[SamplePoint]
    marginal: list[SamplePoint]


class SampleStore:
    """In-memory catalog with a single-writer commit point and JSONL
    persistence. Reads are lock-free snapshots of immutable records."""

    def __init__(self, samples: list[SamplePoint] | None = None):
        self._lock = threading.Lock()
        self._samples: dict[str, SamplePoint] = {}
        for s in samples or []:
            if s.id in self._samples:
                raise DataError(f"duplicate sample id: {s.id}")
            self._samples[s.id] = s

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(list(self._samples.values()))

    def get(self, sample_id: str) -> SamplePoint:
        return self._samples[sample_id]

    def add(self, sample: SamplePoint) -> None:
        with self._lock:
            if sample.id in self._samples:
                raise DataError(f"duplicate sample id: {sample.id}")
            self._samples[sample.id] = sample

    def commit(self, sample: SamplePoint) -> None:
        """Serialized write of an updated record."""
        with self._lock:
            self._samples[sample.id] = sample

    def unconfirmed(self) -> list[SamplePoint]:
        return [s for s in self if not s.confirmed]

    def save(self, path) -> None:
        with self._lock, open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps({"schema": "sample-store",
                                 "version": SCHEMA_VERSION}) + "\n")
            for s in self._samples.values():
                fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SampleStore":
        samples = []
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("schema") != "sample-store":
                raise DataError("not a sample store file")
            if header.get("version") != SCHEMA_VERSION:
                raise DataError(f"unsupported schema version: {header.get('version')}")
            for line in fh:
                line = line.strip()
                if line:
                    samples.append(SamplePoint.from_json(json.loads(line)))
        return cls(samples)

    def export_csv(self, path) -> None:
        """Published-sample-set style export: id plus Lat_Lon_Type columns."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("id,Lat,Lon,Type\n")
            for s in self._samples.values():
                label = s.current_label if s.current_label else ""
                fh.write(f"{s.id},{s.lat:.6f},{s.lon:.6f},{label}\n")


def stratified_sample(ndvi_source: Raster, region_mask=None, strata: int = 10,
                      per_stratum: int = 500, seed: int = 0):
    """NDVI-stratified random pixel selection.

    The NDVI range [-1, 1] is split into ``strata`` equal intervals,
    half-open [lo, hi) except the last which is closed. Each stratum
    contributes min(per_stratum, available) distinct pixels, uniformly at
    random under ``seed``. Returns (list of (row, col, lon, lat, ndvi),
    shortfall dict for under-populated strata).
    """
    if strata < 1:
        raise ValueError("strata must be >= 1")
    values = ndvi_source.values
    valid = ~np.isnan(values)
    if region_mask is not None:
        mask = region_mask.values == 1 if isinstance(region_mask, Raster) \
            else np.asarray(region_mask, dtype=bool)
        valid &= mask
    if not valid.any():
        raise EmptyRegionError("region contains no valid NDVI pixels")
    edges = np.linspace(-1.0, 1.0, strata + 1)
    rng = np.random.default_rng(seed)
    lon, lat = ndvi_source.pixel_lonlat()
    picked = []
    shortfall = {}
    for k in range(strata):
        lo, hi = edges[k], edges[k + 1]
        if k == strata - 1:
            in_stratum = valid & (values >= lo) & (values <= hi)
        else:
            in_stratum = valid & (values >= lo) & (values < hi)
        rows, cols = np.nonzero(in_stratum)
        n_avail = rows.size
        n_take = min(per_stratum, n_avail)
        if n_take < per_stratum:
            shortfall[k] = per_stratum - n_take
        if n_take == 0:
            continue
        idx = rng.choice(n_avail, size=n_take, replace=False)
        for i in np.sort(idx):
            r, c = int(rows[i]), int(cols[i])
            picked.append((r, c, float(lon[r, c]), float(lat[r, c]),
                           float(values[r, c])))
    return picked, shortfall


def partition_by_certainty(samples: list[SamplePoint]) -> CertaintyPartition:
    """Split by prior-product votes: {4,5} certain forest, 0 certain
    non-forest, {2,3} uncertain, 1 marginal. Certain sets get consensus
    labels; marginal samples are stored but never auto-labeled."""
    part = CertaintyPartition([], [], [], [])
    for s in samples:
        v = s.product_votes
        if not 0 <= v <= 5:
            raise DataError(f"product_votes out of range for sample {s.id}: {v}")
        if v in (4, 5):
            if not s.confirmed:
                s.current_label = FOREST
                s.label_source = "product-consensus"
            part.certain_forest.append(s)
        elif v == 0:
            if not s.confirmed:
                s.current_label = NON_FOREST
                s.label_source = "product-consensus"
            part.certain_nonforest.append(s)
        elif v == 1:
            part.marginal.append(s)
        else:
            part.uncertain.append(s)
    return part


def type_certainty(labeled_samples: list[SamplePoint], vote: int,
                   label: str) -> float:
    """Fraction of human-confirmed samples with the given product vote whose
    binary label equals ``label``."""
    scope = [s for s in labeled_samples
             if s.product_votes == vote and s.confirmed and not s.excluded]
    if not scope:
        raise DataError(f"no confirmed samples with vote {vote} in scope")
    hits = sum(1 for s in scope if s.current_label == label)
    return hits / len(scope)


def ratio_mis_class(samples_of_class: list, predictions: dict | list) -> float:
    """Fraction of a class's samples predicted forest."""
    if not samples_of_class:
        raise DataError("empty class set")
    if isinstance(predictions, dict):
        preds = [predictions[s.id if isinstance(s, SamplePoint) else s]
                 for s in samples_of_class]
    else:
        if len(predictions) != len(samples_of_class):
            raise DataError("predictions do not cover all samples")
        preds = list(predictions)
    return sum(1 for p in preds if p == FOREST) / len(samples_of_class)


def split_train_val(samples: list[SamplePoint], train_fraction: float = 0.3,
                    seed: int = 0):
    """Deterministic stratified split; |train| = round(train_fraction * n),
    class ratio preserved within one sample per class."""
    if len(samples) < 10:
        raise DataError("need at least 10 samples to split")
    rng = np.random.default_rng(seed)
    n_train_target = round(train_fraction * len(samples))
    by_class: dict[str, list[SamplePoint]] = {}
    for s in samples:
        by_class.setdefault(s.current_label or "", []).append(s)
    train, val = [], []
    # largest-remainder allocation so per-class counts sum to the target
    keys = sorted(by_class)
    quotas = {k: train_fraction * len(by_class[k]) for k in keys}
    counts = {k: int(np.floor(quotas[k])) for k in keys}
    remain = n_train_target - sum(counts.values())
    for k in sorted(keys, key=lambda k: quotas[k] - counts[k], reverse=True):
        if remain <= 0:
            break
        counts[k] += 1
        remain -= 1
    for k in keys:
        group = list(by_class[k])
        order = rng.permutation(len(group))
        take = counts[k]
        train.extend(group[i] for i in order[:take])
        val.extend(group[i] for i in order[take:])
    return train, val

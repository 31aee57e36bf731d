"""Accuracy machinery: 2x2 error matrices, UA/PA/OA/Kappa, per-grid
scoring, and the training-composition / sampling-strategy harnesses."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .forest import DecisionForest
from .grids import GridSpec
from .samples import FOREST, SamplePoint

MIN_SAMPLES_PER_GRID = 10


class EvaluationError(Exception):
    pass


@dataclass
class ErrorMatrix:
    a: int = 0   # predicted forest, true forest
    b: int = 0   # predicted non-forest, true forest
    c: int = 0   # predicted forest, true non-forest
    d: int = 0   # predicted non-forest, true non-forest

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d

    def __add__(self, other: "ErrorMatrix") -> "ErrorMatrix":
        return ErrorMatrix(self.a + other.a, self.b + other.b,
                           self.c + other.c, self.d + other.d)


@dataclass
class MetricSet:
    ua: float
    pa: float
    oa: float
    kappa: float
    pe: float


def error_matrix(predictions, truths) -> ErrorMatrix:
    """Tally a forest/non-forest confusion matrix. Inputs are 0/1 arrays or
    label lists (1/'forest' = forest)."""
    preds = [_as_binary(p) for p in predictions]
    trues = [_as_binary(t) for t in truths]
    if len(preds) != len(trues):
        raise ValueError("predictions and truths differ in length")
    if not preds:
        raise ValueError("need at least one prediction")
    m = ErrorMatrix()
    for p, t in zip(preds, trues):
        if p and t:
            m.a += 1
        elif not p and t:
            m.b += 1
        elif p and not t:
            m.c += 1
        else:
            m.d += 1
    return m


def _as_binary(v) -> int:
    if isinstance(v, str):
        return 1 if v == FOREST else 0
    return int(v)


def metrics(m: ErrorMatrix) -> MetricSet:
    """User's/producer's/overall accuracy and kappa.

    UA is the precision of forest predictions (a / predicted-forest),
    PA the recall of true forest (a / true-forest)."""
    n = m.total
    if n < 1:
        raise EvaluationError("empty error matrix")
    if m.a + m.c == 0:
        raise EvaluationError("no forest predictions; UA undefined")
    if m.a + m.b == 0:
        raise EvaluationError("no true forest samples; PA undefined")
    ua = m.a / (m.a + m.c)
    pa = m.a / (m.a + m.b)
    oa = (m.a + m.d) / n
    pe = ((m.a + m.b) * (m.a + m.c) + (m.b + m.d) * (m.c + m.d)) / n ** 2
    if pe >= 1.0:
        raise EvaluationError("chance agreement is 1; kappa undefined")
    kappa = (oa - pe) / (1 - pe)
    return MetricSet(ua=ua, pa=pa, oa=oa, kappa=kappa, pe=pe)


def per_grid_metrics(predictions: dict, truth_samples: list[SamplePoint],
                     grids: GridSpec,
                     min_samples: int = MIN_SAMPLES_PER_GRID):
    """One MetricSet per grid cell holding >= min_samples truth points.

    ``predictions`` maps sample id -> 0/1 or label. Returns
    (list of (grid_id, MetricSet, n), skipped dict grid_id -> reason)."""
    by_grid: dict[str, list[SamplePoint]] = {}
    for s in truth_samples:
        gid = s.grid_id or grids.grid_id(*grids.cell_of(s.lon, s.lat))
        by_grid.setdefault(gid, []).append(s)
    rows, skipped = [], {}
    for gid in sorted(by_grid):
        group = by_grid[gid]
        if len(group) < min_samples:
            skipped[gid] = f"only {len(group)} samples (< {min_samples})"
            continue
        preds = [predictions[s.id] for s in group]
        trues = [s.current_label for s in group]
        try:
            ms = metrics(error_matrix(preds, trues))
        except EvaluationError as exc:
            skipped[gid] = str(exc)
            continue
        rows.append((gid, ms, len(group)))
    return rows, skipped


@dataclass
class ExperimentReport:
    experiment_id: str
    mode: str
    pooled: MetricSet
    per_grid: list = field(default_factory=list)
    sample_counts: dict = field(default_factory=dict)
    seed: int = 0
    predictions: dict = field(default_factory=dict)


def _train_eval(train_samples, eval_samples, seed, forest_params=None):
    params = {"n_trees": 60, "max_depth": 12}
    params.update(forest_params or {})
    X = np.stack([s.features.as_array() for s in train_samples])
    y = np.array([1 if s.current_label == FOREST else 0
                  for s in train_samples])
    model = DecisionForest(seed=seed, **params).fit(X, y)
    Xe = np.stack([s.features.as_array() for s in eval_samples])
    preds = model.predict(Xe)
    truths = [s.current_label for s in eval_samples]
    return {s.id: int(p) for s, p in zip(eval_samples, preds)}, \
        metrics(error_matrix(preds.tolist(), truths))


def composition_experiment(certain: list[SamplePoint],
                           uncertain_labeled: list[SamplePoint],
                           mode: str, eval_set: list[SamplePoint],
                           seed: int = 0, n_certain: int = 5000,
                           forest_params: dict | None = None) -> ExperimentReport:
    """Train per composition mode and score on the evaluation set.

    CSRF: certain samples only (up to n_certain). USRF: labeled uncertain
    samples only. CUSRF: all uncertain samples plus certain samples
    downsampled so the total matches the CSRF size."""
    mode = mode.upper()
    rng = np.random.default_rng(seed)
    certain = sorted(certain, key=lambda s: s.id)
    uncertain_labeled = sorted(uncertain_labeled, key=lambda s: s.id)
    if mode == "CSRF":
        pool = list(certain)
        if len(pool) > n_certain:
            pick = rng.choice(len(pool), size=n_certain, replace=False)
            pool = [pool[i] for i in np.sort(pick)]
    elif mode == "USRF":
        if not uncertain_labeled:
            raise EvaluationError("USRF needs labeled uncertain samples")
        pool = list(uncertain_labeled)
    elif mode == "CUSRF":
        if not uncertain_labeled:
            raise EvaluationError("CUSRF needs labeled uncertain samples")
        total = min(n_certain, len(certain) + len(uncertain_labeled))
        n_cert = max(0, total - len(uncertain_labeled))
        pick = rng.choice(len(certain), size=min(n_cert, len(certain)),
                          replace=False)
        pool = [certain[i] for i in np.sort(pick)] + list(uncertain_labeled)
    else:
        raise ValueError(f"unknown composition mode: {mode}")
    preds, pooled = _train_eval(pool, eval_set, seed, forest_params)
    return ExperimentReport(
        experiment_id=f"composition-{mode}-seed{seed}", mode=mode,
        pooled=pooled, seed=seed, predictions=preds,
        sample_counts={"train": len(pool), "eval": len(eval_set)})


def strategy_experiment(strategy: int, target_grid: str,
                        samples: list[SamplePoint], seed: int = 0,
                        eval_fraction: float = 0.3,
                        forest_params: dict | None = None) -> ExperimentReport:
    """Training-pool allocation strategies evaluated on held-out samples of
    the target grid: 1 global, 2 grid only, 3 global + grid, 4 ecoregion of
    the grid + grid, 5 ecoregion only."""
    if strategy not in (1, 2, 3, 4, 5):
        raise ValueError("strategy must be 1..5")
    labeled = sorted((s for s in samples
                      if s.current_label is not None and not s.excluded),
                     key=lambda s: s.id)
    in_grid = [s for s in labeled if s.grid_id == target_grid]
    if not in_grid:
        raise EvaluationError(f"no samples in target grid {target_grid}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(in_grid))
    n_eval = max(1, int(round(eval_fraction * len(in_grid))))
    eval_set = [in_grid[i] for i in order[:n_eval]]
    grid_train = [in_grid[i] for i in order[n_eval:]]
    eval_ids = {s.id for s in eval_set}
    outside = [s for s in labeled if s.id not in eval_ids
               and s.grid_id != target_grid]
    eco_ids = {s.ecoregion_id for s in in_grid}
    eco_pool = [s for s in outside if s.ecoregion_id in eco_ids]
    if strategy == 1:
        pool = outside
    elif strategy == 2:
        pool = grid_train
    elif strategy == 3:
        pool = outside + grid_train
    elif strategy == 4:
        pool = eco_pool + grid_train
    else:
        pool = eco_pool
    if not pool:
        raise EvaluationError(f"empty training pool for strategy {strategy}")
    preds, pooled = _train_eval(pool, eval_set, seed, forest_params)
    return ExperimentReport(
        experiment_id=f"strategy-{strategy}-{target_grid}-seed{seed}",
        mode=f"strategy-{strategy}", pooled=pooled, seed=seed,
        predictions=preds,
        sample_counts={"train": len(pool), "eval": len(eval_set)})


def write_metrics_report(rows, path) -> None:
    """CSV with one row per grid/experiment: id, ua, pa, oa, kappa, n."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "ua", "pa", "oa", "kappa", "n"])
        for rid, ms, n in rows:
            writer.writerow([rid, f"{ms.ua:.6f}", f"{ms.pa:.6f}",
                             f"{ms.oa:.6f}", f"{ms.kappa:.6f}", n])

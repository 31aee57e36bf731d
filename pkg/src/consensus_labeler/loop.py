"""Iterative semi-automatic labeling loop: batch selection, ensemble
training and voting, consistency routing, annotation resolution, label
correction and labor accounting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .ensemble import (EnsembleSpec, TrainedEnsemble, VoteRecord,
                       ensemble_votes_batch, train_kfold_ensemble)
from .samples import (FOREST, NON_FOREST, AnnotationRecord, LandCoverClass,
                      SamplePoint, SampleStore, partition_by_certainty)

TRAINING = "training"
AWAITING = "awaiting_annotation"
COMPLETE = "complete"


class LoopError(Exception):
    pass


class RoutingError(LoopError):
    pass


class StateError(LoopError):
    pass


def split_consistency(vote: VoteRecord | int, lam: float = 0.9,
                      v_num: int | None = None) -> str:
    """Eq-style routing: consistent iff v_max / v_num strictly exceeds lam."""
    if isinstance(vote, VoteRecord):
        v_max, v_num = vote.v_max, vote.v_num
    else:
        v_max = vote
    if not v_num:
        raise LoopError("v_num must be positive")
    return "consistent" if v_max / v_num > lam else "inconsistent"


@dataclass
class AnnotationTask:
    task_id: str
    sample_id: str
    proposed_label: int            # 1 = forest
    patch_ref: str
    required_decisions: int        # 1 consistent, 3 inconsistent
    decisions: list[AnnotationRecord] = field(default_factory=list)
    resolved_label: str | None = None   # forest | non-forest
    unlabelable: bool = False

    @property
    def resolved(self) -> bool:
        return self.resolved_label is not None or self.unlabelable


@dataclass
class IterationState:
    iteration_index: int
    batch: list[str]
    consistent_set: set = field(default_factory=set)
    inconsistent_set: set = field(default_factory=set)
    lam: float = 0.9
    open_tasks: list[AnnotationTask] = field(default_factory=list)
    status: str = TRAINING
    votes: dict = field(default_factory=dict)

    def task(self, task_id: str) -> AnnotationTask:
        for t in self.open_tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)


@dataclass
class LaborLedger:
    n_samples: int = 0
    n_consistent_total: int = 0
    n_inconsistent_total: int = 0
    annotations_performed: int = 0
    per_iteration: list[dict] = field(default_factory=list)

    @property
    def baseline(self) -> int:
        return 3 * self.n_samples

    def report(self) -> dict:
        if self.n_samples <= 0:
            raise LoopError("labor report needs at least one sample")
        n = self.n_samples
        strict = 1.0 - (self.n_consistent_total
                        + 3 * self.n_inconsistent_total) / (3 * n)
        relaxed = 1.0 - (3 * self.n_inconsistent_total) / (3 * n)
        return {"saved_fraction_strict": strict,
                "saved_fraction_relaxed": relaxed}

    def export_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "batch_size", "n_consistent",
                             "n_inconsistent", "annotations",
                             "consistent_fraction"])
            for row in self.per_iteration:
                writer.writerow([row["iteration"], row["batch_size"],
                                 row["n_consistent"], row["n_inconsistent"],
                                 row["annotations"],
                                 f"{row['consistent_fraction']:.6f}"])


def labor_report(ledger: LaborLedger) -> dict:
    return ledger.report()


def resolve_task(task: AnnotationTask, decision: AnnotationRecord) -> AnnotationTask:
    """Append one annotator decision; resolve when the quota is reached.

    Triple tasks require three distinct annotators. Resolution is the
    majority of binary projections; decisions flagged unlabelable dominate
    when they are at least half, otherwise they are dropped from the vote
    (remaining tie breaks to non-forest)."""
    if task.resolved:
        raise StateError(f"task {task.task_id} is already resolved")
    if task.required_decisions == 3:
        if any(d.annotator_id == decision.annotator_id for d in task.decisions):
            raise RoutingError(
                f"annotator {decision.annotator_id} already decided task "
                f"{task.task_id}")
    task.decisions.append(decision)
    if len(task.decisions) < task.required_decisions:
        return task
    unlab = [d for d in task.decisions
             if d.decided_class is LandCoverClass.unlabelable]
    if 2 * len(unlab) >= len(task.decisions):
        task.unlabelable = True
        return task
    projections = [d.decided_class.binary() for d in task.decisions
                   if d.decided_class is not LandCoverClass.unlabelable]
    n_forest = sum(1 for p in projections if p == FOREST)
    task.resolved_label = FOREST if 2 * n_forest > len(projections) else NON_FOREST
    return task


def simulated_annotator(ground_truth, error_rate: float, seed: int = 0):
    """Oracle decision function: the ground-truth class with probability
    1 - error_rate, else a uniformly random wrong class.

    ``ground_truth`` maps sample_id -> LandCoverClass. The returned callable
    takes (sample_id, annotator_id) and is deterministic under seed."""
    if not 0.0 <= error_rate < 1.0:
        raise ValueError("error_rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    classes = [c for c in LandCoverClass if c is not LandCoverClass.unlabelable]

    def decide(sample_id: str, annotator_id: str = "oracle") -> LandCoverClass:
        truth = ground_truth(sample_id) if callable(ground_truth) \
            else ground_truth[sample_id]
        if error_rate > 0 and rng.random() < error_rate:
            wrong = [c for c in classes if c is not truth]
            return wrong[int(rng.integers(len(wrong)))]
        return truth

    return decide


@dataclass
class LoopConfig:
    batch_size: int = 10000
    lam: float = 0.9
    spec: EnsembleSpec = field(default_factory=EnsembleSpec)
    max_iterations: int = 20
    seed: int = 0
    train_cap: int | None = None         # cap ensemble training set size
    patch_params: dict | None = None
    tabular_params: dict | None = None


_LABEL_TO_INT = {NON_FOREST: 0, FOREST: 1}
_INT_TO_LABEL = {0: NON_FOREST, 1: FOREST}


class LabelingLoop:
    """Drives the iterative mechanism over a sample store.

    Feature rows are precomputed once: ``X_tabular`` from each sample's
    feature vector, ``X_patch`` from the patch feature extractor supplied by
    the caller (sample -> summary feature row)."""

    def __init__(self, store: SampleStore, config: LoopConfig,
                 patch_row_fn=None):
        self.store = store
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.ledger = LaborLedger(n_samples=len(store))
        self.iterations: list[IterationState] = []
        self.current: IterationState | None = None
        self.ensemble: TrainedEnsemble | None = None
        self._stale = True
        samples = list(store)
        self._ids = [s.id for s in samples]
        self._index = {sid: i for i, sid in enumerate(self._ids)}
        self.X_tabular = np.stack([s.features.as_array() for s in samples])
        if patch_row_fn is None:
            # degenerate patch path: reuse tabular features
            self.X_patch = self.X_tabular.copy()
        else:
            self.X_patch = np.stack([patch_row_fn(s) for s in samples])
        # seed initial labels from product consensus
        partition_by_certainty(samples)

    # --- training pool: confirmed human labels + certain-set consensus ---

    def _training_arrays(self):
        idx, y = [], []
        for s in self.store:
            if s.excluded or s.current_label is None:
                continue
            if s.confirmed or s.label_source == "product-consensus":
                idx.append(self._index[s.id])
                y.append(_LABEL_TO_INT[s.current_label])
        idx = np.array(idx, dtype=int)
        y = np.array(y, dtype=int)
        cap = self.config.train_cap
        if cap is not None and len(idx) > cap:
            take = self.rng.choice(len(idx), size=cap, replace=False)
            idx, y = idx[take], y[take]
        return idx, y

    def train_ensemble(self) -> TrainedEnsemble:
        idx, y = self._training_arrays()
        if np.unique(y).size < 2:
            raise LoopError("training pool contains a single class")
        self.ensemble = train_kfold_ensemble(
            self.X_tabular[idx], self.X_patch[idx], y, self.config.spec,
            seed=int(self.rng.integers(2 ** 31 - 1)),
            patch_params=self.config.patch_params,
            tabular_params=self.config.tabular_params)
        self._stale = False
        return self.ensemble

    def run_iteration(self) -> IterationState:
        if self.current is not None and self.current.status == AWAITING:
            raise StateError("previous iteration still has open tasks")
        pool = [s.id for s in self.store.unconfirmed() if not self.store.get(s.id).excluded]
        index = len(self.iterations)
        if not pool:
            state = IterationState(iteration_index=index, batch=[],
                                   lam=self.config.lam, status=COMPLETE)
            self.iterations.append(state)
            self.current = state
            return state
        batch_n = min(self.config.batch_size, len(pool))
        pool_sorted = sorted(pool)
        pick = self.rng.choice(len(pool_sorted), size=batch_n, replace=False)
        batch = [pool_sorted[i] for i in np.sort(pick)]
        if self._stale or self.ensemble is None:
            self.train_ensemble()
        rows = np.array([self._index[sid] for sid in batch])
        votes = ensemble_votes_batch(
            self.ensemble, self.X_tabular[rows], self.X_patch[rows],
            [self.store.get(sid).product_votes for sid in batch], batch)
        state = IterationState(iteration_index=index, batch=batch,
                               lam=self.config.lam, status=AWAITING)
        # inconsistent tasks first: they carry the annotation priority
        for vote in votes:
            route = split_consistency(vote, self.config.lam)
            required = 1 if route == "consistent" else 3
            (state.consistent_set if route == "consistent"
             else state.inconsistent_set).add(vote.sample_id)
            state.votes[vote.sample_id] = vote
            state.open_tasks.append(AnnotationTask(
                task_id=f"it{index}-{vote.sample_id}",
                sample_id=vote.sample_id,
                proposed_label=vote.voted_class,
                patch_ref=self.store.get(vote.sample_id).patch_ref,
                required_decisions=required))
        state.open_tasks.sort(key=lambda t: (t.required_decisions != 3,
                                             t.task_id))
        self.iterations.append(state)
        self.current = state
        return state

    def apply_corrections(self) -> None:
        state = self.current
        if state is None or state.status == COMPLETE:
            return
        unresolved = [t for t in state.open_tasks if not t.resolved]
        if unresolved:
            raise StateError(f"{len(unresolved)} tasks still unresolved")
        n_decisions = 0
        for task in state.open_tasks:
            sample = self.store.get(task.sample_id)
            sample.confirmed = True
            sample.label_source = "human"
            if task.unlabelable:
                sample.excluded = True
            else:
                sample.current_label = task.resolved_label
            sample.annotations.extend(task.decisions)
            self.store.commit(sample)
            n_decisions += len(task.decisions)
        n_cons = len(state.consistent_set)
        n_incons = len(state.inconsistent_set)
        self.ledger.n_consistent_total += n_cons
        self.ledger.n_inconsistent_total += n_incons
        self.ledger.annotations_performed += n_decisions
        batch_n = len(state.batch)
        self.ledger.per_iteration.append({
            "iteration": state.iteration_index, "batch_size": batch_n,
            "n_consistent": n_cons, "n_inconsistent": n_incons,
            "annotations": n_decisions,
            "consistent_fraction": n_cons / batch_n if batch_n else 1.0})
        state.status = COMPLETE
        state.open_tasks = []
        self._stale = True

    def run_until_complete(self, annotator) -> LaborLedger:
        """Drive iterations with an automatic decision function until every
        sample is confirmed or max_iterations is reached."""
        for _ in range(self.config.max_iterations):
            state = self.run_iteration()
            if state.status == COMPLETE:
                break
            for task in state.open_tasks:
                for i in range(task.required_decisions):
                    decision = AnnotationRecord(
                        annotator_id=f"oracle-{i}",
                        decided_class=annotator(task.sample_id, f"oracle-{i}"))
                    resolve_task(task, decision)
            self.apply_corrections()
        self.ledger.complete = all(
            s.confirmed for s in self.store)  # partial-completion flag
        return self.ledger

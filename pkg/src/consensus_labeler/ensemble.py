"""K-fold ensemble of patch and tabular classifiers plus pooled voting
with prior-product votes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import patch_features
from .forest import DecisionForest


class EnsembleError(Exception):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    K: int = 8                 # folds; also the number of patch-model pairs
    n_architectures: int = 2
    M: int = 8                 # tabular classifiers
    n_products: int = 5

    @property
    def n_patch(self) -> int:
        # two patch-model slots per fold regardless of architecture count;
        # architectures cycle through the slots
        return 2 * self.K

    @property
    def n_classifiers(self) -> int:
        return self.n_patch + self.M

    @property
    def v_num(self) -> int:
        return self.n_patch + self.M + self.n_products


# reference "architectures": decision forests over patch summary features
# with deliberately different capacity, standing in for two CNN families
ARCHITECTURES = {
    "texture-deep": {"n_trees": 30, "max_depth": 10, "features_per_split": 3},
    "texture-wide": {"n_trees": 50, "max_depth": 6, "features_per_split": 5},
}


@dataclass
class PatchSummaryClassifier:
    """Pluggable patch classifier reference implementation: summary
    statistics of the patch fed to a decision forest."""
    architecture_id: str
    seed: int = 0
    hyperparams: dict = field(default_factory=dict)
    model: DecisionForest | None = None

    def fit(self, patches, labels) -> "PatchSummaryClassifier":
        X = np.stack([patch_features(p) for p in patches])
        params = dict(ARCHITECTURES.get(self.architecture_id, {}))
        params.update(self.hyperparams)
        self.model = DecisionForest(seed=self.seed, **params).fit(X, labels)
        return self

    def fit_features(self, X, labels) -> "PatchSummaryClassifier":
        """Train on precomputed patch_features rows."""
        params = dict(ARCHITECTURES.get(self.architecture_id, {}))
        params.update(self.hyperparams)
        self.model = DecisionForest(seed=self.seed, **params).fit(X, labels)
        return self

    def predict_features(self, X) -> np.ndarray:
        return self.model.predict(X)

    def predict(self, patches) -> np.ndarray:
        X = np.stack([patch_features(p) for p in patches])
        return self.model.predict(X)


@dataclass
class VoteRecord:
    sample_id: str
    classifier_votes: list[int]      # 1 = forest
    product_votes: int
    v_num: int
    v_forest: int = 0
    v_nonforest: int = 0
    v_max: int = 0
    voted_class: int = 0

    def __post_init__(self):
        self.v_forest = int(sum(self.classifier_votes)) + self.product_votes
        self.v_nonforest = self.v_num - self.v_forest
        self.v_max = max(self.v_forest, self.v_nonforest)
        # ties broken toward non-forest
        self.voted_class = 1 if self.v_forest > self.v_nonforest else 0


@dataclass
class TrainedEnsemble:
    spec: EnsembleSpec
    patch_models: list[PatchSummaryClassifier]
    tabular_models: list[DecisionForest]
    fold_assignment: dict

    @property
    def classifiers(self):
        return list(self.patch_models) + list(self.tabular_models)


def _make_folds(n, K, rng, y, max_retries=20):
    for _ in range(max_retries):
        order = rng.permutation(n)
        folds = [order[i::K] for i in range(K)]
        ok = True
        for i in range(K):
            train_idx = np.concatenate([folds[j] for j in range(K) if j != i])
            if np.unique(y[train_idx]).size < 2:
                ok = False
                break
        if ok:
            return folds
    raise EnsembleError("could not build folds with both classes "
                        "in every training portion")


def train_kfold_ensemble(X_tabular, X_patch, labels, spec: EnsembleSpec,
                         seed: int = 0, patch_params: dict | None = None,
                         tabular_params: dict | None = None) -> TrainedEnsemble:
    """Train 2K patch models and M tabular models on K-fold complements.

    ``X_patch`` holds precomputed patch_features rows (one per sample).
    Patch-model slot a of fold k uses architecture a mod n_architectures.
    Tabular model m trains on the complement of fold m mod K.
    """
    y = np.asarray(labels, dtype=int)
    n = len(y)
    if n < spec.K:
        raise EnsembleError(f"need at least K={spec.K} samples, got {n}")
    if np.unique(y).size < 2:
        raise EnsembleError("both classes must be present")
    rng = np.random.default_rng(seed)
    folds = _make_folds(n, spec.K, rng, y)
    complements = [np.sort(np.concatenate([folds[j] for j in range(spec.K)
                                           if j != i]))
                   for i in range(spec.K)]
    arch_ids = list(ARCHITECTURES)[:max(1, spec.n_architectures)]
    model_seeds = rng.integers(0, 2 ** 31 - 1,
                               size=spec.n_patch + spec.M)
    patch_models = []
    fold_assignment = {"patch": [], "tabular": []}
    si = 0
    for k in range(spec.K):
        for slot in range(2):
            arch = arch_ids[slot % len(arch_ids)]
            clf = PatchSummaryClassifier(architecture_id=arch,
                                         seed=int(model_seeds[si]),
                                         hyperparams=dict(patch_params or {}))
            clf.fit_features(X_patch[complements[k]], y[complements[k]])
            patch_models.append(clf)
            fold_assignment["patch"].append(k)
            si += 1
    tabular_models = []
    for m in range(spec.M):
        k = m % spec.K
        params = {"n_trees": 40, "max_depth": 10}
        params.update(tabular_params or {})
        model = DecisionForest(seed=int(model_seeds[si]), **params)
        model.fit(X_tabular[complements[k]], y[complements[k]])
        tabular_models.append(model)
        fold_assignment["tabular"].append(k)
        si += 1
    return TrainedEnsemble(spec=spec, patch_models=patch_models,
                           tabular_models=tabular_models,
                           fold_assignment=fold_assignment)


def ensemble_votes(ensemble: TrainedEnsemble, x_tabular, x_patch,
                   product_votes: int, sample_id: str = "") -> VoteRecord:
    """Pool classifier predictions with prior-product votes."""
    spec = ensemble.spec
    if len(ensemble.classifiers) != spec.n_classifiers:
        raise EnsembleError("classifier count does not match the ensemble spec")
    if not 0 <= product_votes <= spec.n_products:
        raise ValueError("product_votes out of range")
    votes = []
    xp = np.asarray(x_patch, dtype=float)[None, :]
    xt = np.asarray(x_tabular, dtype=float)[None, :]
    for clf in ensemble.patch_models:
        votes.append(int(clf.predict_features(xp)[0]))
    for model in ensemble.tabular_models:
        votes.append(int(model.predict(xt)[0]))
    return VoteRecord(sample_id=sample_id, classifier_votes=votes,
                      product_votes=product_votes, v_num=spec.v_num)


def ensemble_votes_batch(ensemble: TrainedEnsemble, X_tabular, X_patch,
                         product_votes, sample_ids) -> list[VoteRecord]:
    """Vectorized voting over many samples at once."""
    spec = ensemble.spec
    if len(ensemble.classifiers) != spec.n_classifiers:
        raise EnsembleError("classifier count does not match the ensemble spec")
    preds = [clf.predict_features(X_patch) for clf in ensemble.patch_models]
    preds += [model.predict(X_tabular) for model in ensemble.tabular_models]
    preds = np.stack(preds)          # (n_classifiers, n_samples)
    records = []
    for j, sid in enumerate(sample_ids):
        records.append(VoteRecord(sample_id=sid,
                                  classifier_votes=preds[:, j].tolist(),
                                  product_votes=int(product_votes[j]),
                                  v_num=spec.v_num))
    return records

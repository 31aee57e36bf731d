"""From-scratch decision forest: bootstrap-bagged CART trees with Gini
splits and per-feature subsampling. Binary labels are 0/1 integers."""

from __future__ import annotations

import json
import math

import numpy as np


class DegenerateModelError(ValueError):
    pass


def _build_tree(X, y, indices, depth, max_depth, min_leaf, n_feats, rng):
    labels = y[indices]
    counts = [int(np.sum(labels == 0)), int(np.sum(labels == 1))]
    if (depth >= max_depth or len(indices) < 2 * min_leaf
            or counts[0] == 0 or counts[1] == 0):
        return {"counts": counts}
    d = X.shape[1]
    feat_idx = np.sort(rng.choice(d, size=min(n_feats, d), replace=False))
    best_cost = np.inf
    best_feature = -1
    best_threshold = 0.0
    n = len(indices)
    for f in feat_idx:
        x = X[indices, f]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        ys = labels[order]
        cum1 = np.cumsum(ys)
        cut = np.nonzero(xs[1:] > xs[:-1])[0]   # split after position i
        if cut.size == 0:
            continue
        nl = cut + 1
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        cut, nl, nr = cut[ok], nl[ok], nr[ok]
        c1l = cum1[cut]
        c0l = nl - c1l
        c1r = cum1[-1] - c1l
        c0r = nr - c1r
        gini_l = 1.0 - (c0l / nl) ** 2 - (c1l / nl) ** 2
        gini_r = 1.0 - (c0r / nr) ** 2 - (c1r / nr) ** 2
        cost = (nl * gini_l + nr * gini_r) / n
        i = int(np.argmin(cost))
        if cost[i] < best_cost - 1e-15:
            best_cost = float(cost[i])
            best_feature = int(f)
            best_threshold = float((xs[cut[i]] + xs[cut[i] + 1]) / 2.0)
    if best_feature < 0:
        return {"counts": counts}
    go_left = X[indices, best_feature] < best_threshold
    left = _build_tree(X, y, indices[go_left], depth + 1, max_depth,
                       min_leaf, n_feats, rng)
    right = _build_tree(X, y, indices[~go_left], depth + 1, max_depth,
                        min_leaf, n_feats, rng)
    return {"feature": best_feature, "threshold": best_threshold,
            "left": left, "right": right}


def _tree_proba(node, X, out, mask):
    if "counts" in node:
        c = node["counts"]
        total = c[0] + c[1]
        out[mask, 0] = c[0] / total
        out[mask, 1] = c[1] / total
        return
    go_left = X[:, node["feature"]] < node["threshold"]
    _tree_proba(node["left"], X, out, mask & go_left)
    _tree_proba(node["right"], X, out, mask & ~go_left)


class DecisionForest:
    """Random forest for binary classification, reproducible under seed."""

    def __init__(self, n_trees: int = 100, max_depth: int = 12,
                 min_leaf: int = 2, features_per_split: int | None = None,
                 seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.features_per_split = features_per_split
        self.seed = seed
        self.trees: list[dict] = []

    def fit(self, X, y) -> "DecisionForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if X.shape[0] < 2:
            raise DegenerateModelError("need at least two training samples")
        classes = np.unique(y)
        if classes.size < 2:
            raise DegenerateModelError("training data contains a single class")
        if not set(classes.tolist()) <= {0, 1}:
            raise ValueError("labels must be 0/1")
        n, d = X.shape
        n_feats = self.features_per_split or math.ceil(math.sqrt(d))
        root = np.random.default_rng(self.seed)
        tree_seeds = root.integers(0, 2 ** 31 - 1, size=self.n_trees)
        self.trees = []
        for ts in tree_seeds:
            rng = np.random.default_rng(int(ts))
            boot = rng.integers(0, n, size=n)
            # keep both classes in the bag so every tree can split
            if np.unique(y[boot]).size < 2:
                boot = np.arange(n)
            self.trees.append(_build_tree(X, y, boot, 0, self.max_depth,
                                          self.min_leaf, n_feats, rng))
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not self.trees:
            raise DegenerateModelError("model is not trained")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        acc = np.zeros((X.shape[0], 2))
        buf = np.zeros((X.shape[0], 2))
        mask = np.ones(X.shape[0], dtype=bool)
        for tree in self.trees:
            buf[:] = 0.0
            _tree_proba(tree, X, buf, mask)
            acc += buf
        return acc / len(self.trees)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return (proba[:, 1] > proba[:, 0]).astype(int)

    # --- serialization (lossless, byte-stable) ---

    def to_json(self) -> str:
        return json.dumps({
            "format": "decision-forest",
            "version": 1,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
            "trees": self.trees,
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "DecisionForest":
        d = json.loads(text)
        if d.get("format") != "decision-forest":
            raise ValueError("not a decision forest file")
        model = cls(n_trees=d["n_trees"], max_depth=d["max_depth"],
                    min_leaf=d["min_leaf"],
                    features_per_split=d["features_per_split"],
                    seed=d["seed"])
        model.trees = d["trees"]
        return model

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "DecisionForest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

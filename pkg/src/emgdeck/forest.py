"""From-scratch CART random forest with deterministic, seedable training.

Trees use axis-aligned threshold splits on Gini impurity (entropy behind
config), thresholds at midpoints of consecutive distinct sorted values, and
majority-vote leaves. All tie-breaking is deterministic: lowest feature
index, lowest threshold, lowest class index. Per-tree RNG seeds derive from
the master seed by a splitmix64 schedule so training can run trees in any
order (or in parallel) and reproduce the same model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .words import WordLabel

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 output for input x; the fixed per-tree seed schedule."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream: int) -> int:
    """Deterministic child seed for a numbered stream of a master seed."""
    return splitmix64(((master & _MASK64) ^ (stream * 0xD1342543DE82EF95)) & _MASK64)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 32
    mtry: int | None = None  # None -> ceil(sqrt(d)) at fit time
    min_leaf: int = 1
    bootstrap: bool = True
    criterion: str = "gini"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.criterion not in ("gini", "entropy"):
            raise ValueError("criterion must be 'gini' or 'entropy'")


@dataclass
class DecisionTree:
    """Flat-array binary tree; feature[i] == -1 marks a leaf."""

    feature: np.ndarray    # int64
    threshold: np.ndarray  # float64
    left: np.ndarray       # int64 child index
    right: np.ndarray      # int64 child index
    leaf_class: np.ndarray  # int64, -1 on internal nodes
    n_node_samples: np.ndarray  # int64

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        """Class index per row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.leaf_class[node]

    @property
    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=np.int64)
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if len(depths) else 0


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[DecisionTree, ...]
    classes: tuple
    n_features: int
    config: ForestConfig


class _TreeBuilder:
    def __init__(self, X, y_idx, n_classes, mtry, cfg: ForestConfig, rng):
        self.X = X
        self.y_idx = y_idx
        self.n_classes = n_classes
        self.mtry = mtry
        self.cfg = cfg
        self.rng = rng
        self.criterion = (
            _kernels.CRITERION_GINI if cfg.criterion == "gini" else _kernels.CRITERION_ENTROPY
        )
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.leaf_class = []
        self.n_node_samples = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf_class.append(-1)
        self.n_node_samples.append(0)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray) -> DecisionTree:
        self._grow(idx, depth=0)
        return DecisionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            leaf_class=np.asarray(self.leaf_class, dtype=np.int64),
            n_node_samples=np.asarray(self.n_node_samples, dtype=np.int64),
        )

    def _grow(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        self.n_node_samples[node] = len(idx)
        counts = np.bincount(self.y_idx[idx], minlength=self.n_classes)
        pure = np.count_nonzero(counts) <= 1
        if depth >= self.cfg.max_depth or pure or len(idx) < 2 * self.cfg.min_leaf:
            self.leaf_class[node] = int(np.argmax(counts))  # ties -> lowest class index
            return node
        d = self.X.shape[1]
        feats = np.sort(self.rng.choice(d, size=self.mtry, replace=False)).astype(np.int64)
        found = _kernels.best_split(
            self.X, self.y_idx, idx, feats, self.n_classes, self.cfg.min_leaf, self.criterion
        )
        if found is None:
            self.leaf_class[node] = int(np.argmax(counts))
            return node
        f, thr, _score, _n_left = found
        mask = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(idx[mask], depth + 1)
        self.right[node] = self._grow(idx[~mask], depth + 1)
        return node


def _as_class_indices(y, classes):
    if classes is None:
        classes = sorted(set(y))
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        y_idx = np.asarray([lookup[v] for v in y], dtype=np.int32)
    except KeyError as e:
        raise ValueError(f"label {e.args[0]!r} not in classes") from None
    return y_idx, tuple(classes)


def fit_forest(X, y, cfg: ForestConfig, classes=None) -> RandomForest:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("X must be a non-empty 2-D feature matrix")
    if len(X) != len(y):
        raise ValueError("X and y must have the same length")
    if len(X) < 2:
        raise ValueError("need at least 2 training rows")
    if np.isnan(X).any():
        raise ValueError("X contains NaN features")
    y_idx, classes = _as_class_indices(y, classes)
    n, d = X.shape
    mtry = cfg.mtry if cfg.mtry is not None else math.ceil(math.sqrt(d))
    if not 1 <= mtry <= d:
        raise ValueError(f"mtry={mtry} out of range for {d} features")
    trees = []
    for t in range(cfg.n_trees):
        rng = np.random.default_rng(derive_seed(cfg.seed, t))
        idx = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        builder = _TreeBuilder(X, y_idx, len(classes), mtry, cfg, rng)
        trees.append(builder.build(idx.astype(np.int64)))
    return RandomForest(trees=tuple(trees), classes=classes, n_features=d, config=cfg)


def predict_forest(forest: RandomForest, X) -> tuple[list, np.ndarray]:
    """Majority-vote labels and per-class vote fractions (rows sum to 1)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise ValueError(f"X must be 2-D with {forest.n_features} features")
    if np.isnan(X).any():
        raise ValueError("X contains NaN features")
    k = len(forest.classes)
    votes = np.zeros((len(X), k), dtype=np.int64)
    rows = np.arange(len(X))
    for tree in forest.trees:
        votes[rows, tree.predict_indices(X)] += 1
    winners = votes.argmax(axis=1)  # ties -> lowest class index
    labels = [forest.classes[i] for i in winners]
    return labels, votes / len(forest.trees)


# -- serialization --------------------------------------------------------------

def _class_to_json(c):
    if isinstance(c, WordLabel):
        return {"kind": "word", "id": c.id, "text": c.text, "ipa": c.ipa}
    if isinstance(c, (int, str)):
        return {"kind": "value", "value": c}
    if isinstance(c, (np.integer,)):
        return {"kind": "value", "value": int(c)}
    raise TypeError(f"cannot serialize class {c!r}")


def _class_from_json(obj):
    if obj["kind"] == "word":
        return WordLabel(obj["id"], obj["text"], obj["ipa"])
    return obj["value"]


def forest_to_json(forest: RandomForest) -> str:
    """Versioned JSON document; thresholds stored as decimal strings (repr round-trips)."""
    doc = {
        "schema_version": 1,
        "config": {
            "n_trees": forest.config.n_trees,
            "max_depth": forest.config.max_depth,
            "mtry": forest.config.mtry,
            "min_leaf": forest.config.min_leaf,
            "bootstrap": forest.config.bootstrap,
            "criterion": forest.config.criterion,
            "seed": forest.config.seed,
        },
        "n_features": forest.n_features,
        "classes": [_class_to_json(c) for c in forest.classes],
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": [repr(float(v)) for v in t.threshold],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "leaf_class": t.leaf_class.tolist(),
                "n_node_samples": t.n_node_samples.tolist(),
            }
            for t in forest.trees
        ],
    }
    return json.dumps(doc, sort_keys=True)


def forest_from_json(text: str) -> RandomForest:
    doc = json.loads(text)
    if doc.get("schema_version") != 1:
        raise ValueError(f"unsupported forest schema_version {doc.get('schema_version')}")
    cfg = ForestConfig(**doc["config"])
    trees = tuple(
        DecisionTree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=np.asarray([float(v) for v in t["threshold"]], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            leaf_class=np.asarray(t["leaf_class"], dtype=np.int64),
            n_node_samples=np.asarray(t["n_node_samples"], dtype=np.int64),
        )
        for t in doc["trees"]
    )
    classes = tuple(_class_from_json(c) for c in doc["classes"])
    return RandomForest(trees=trees, classes=classes, n_features=doc["n_features"], config=cfg)

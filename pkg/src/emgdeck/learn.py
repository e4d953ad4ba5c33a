"""Linear models, correlation, stratified splits, and confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .dataset import Dataset
from .errors import StratificationError, UndefinedCorrelationError
from .forest import derive_seed
from .words import WORDS


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (d,)
    intercept: float

    def __post_init__(self):
        if not np.isfinite(self.weights).all() or not np.isfinite(self.intercept):
            raise ValueError("linear model entries must be finite")

    def predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept


def _ridge_default(xc: np.ndarray) -> float:
    # Stability-only shrinkage: 1e-6 x mean diagonal of the (centered) Gram matrix.
    return 1e-6 * float(np.mean(np.sum(xc * xc, axis=0)))


def _solve_centered(xc: np.ndarray, yc: np.ndarray, ridge: float) -> np.ndarray:
    if ridge > 0.0:
        d = xc.shape[1]
        a = np.vstack([xc, np.sqrt(ridge) * np.eye(d)])
        b = np.concatenate([yc, np.zeros((d,) + yc.shape[1:])])
    else:
        a, b = xc, yc
    w, *_ = np.linalg.lstsq(a, b, rcond=None)
    return w


def fit_ols(X: np.ndarray, y: np.ndarray, ridge: float | None = None) -> LinearModel:
    """Least squares with unpenalized intercept, solved by orthogonal decomposition.

    ridge=None applies the stability default; pass ridge=0.0 for plain OLS.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or len(X) != len(y) or len(X) < 1:
        raise ValueError("X must be (n, d) and y (n,) with n >= 1")
    if np.isnan(X).any() or np.isnan(y).any():
        raise ValueError("NaN inputs")
    if ridge is not None and ridge < 0:
        raise ValueError("ridge must be >= 0")
    xm = X.mean(axis=0)
    ym = float(y.mean())
    xc = X - xm
    yc = y - ym
    if ridge is None:
        ridge = _ridge_default(xc)
    w = _solve_centered(xc, yc, ridge)
    return LinearModel(weights=w, intercept=ym - float(xm @ w))


def fit_ols_multi(X: np.ndarray, Y: np.ndarray, ridge: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """fit_ols for every column of Y at once (shared design matrix).

    Returns (weights (d, m), intercepts (m,)); column j equals
    fit_ols(X, Y[:, j], ridge) with the same explicit ridge.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
        raise ValueError("X must be (n, d) and Y (n, m)")
    if np.isnan(X).any() or np.isnan(Y).any():
        raise ValueError("NaN inputs")
    xm = X.mean(axis=0)
    ym = Y.mean(axis=0)
    xc = X - xm
    yc = Y - ym
    if ridge is None:
        ridge = _ridge_default(xc)
    W = _solve_centered(xc, yc, ridge)
    return W, ym - xm @ W


def pearson(a: Sequence[float], b: Sequence[float]) -> float:
    """Population Pearson correlation, clamped to [-1, 1].

    Raises UndefinedCorrelationError when either input has zero variance;
    the caller decides the policy for that case.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("inputs must be equal-length vectors of size >= 2")
    ac = a - a.mean()
    bc = b - b.mean()
    va = float(ac @ ac)
    vb = float(bc @ bc)
    if va == 0.0 or vb == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    r = float(ac @ bc) / np.sqrt(va * vb)
    return float(min(1.0, max(-1.0, r)))


def t_interval_95(values: Sequence[float]) -> tuple[float, float]:
    """Student-t 95% confidence interval for the mean (n-1 dof)."""
    v = np.asarray(values, dtype=np.float64)
    m = float(v.mean())
    if len(v) < 2:
        return (m, m)
    half = float(_scipy_stats.t.ppf(0.975, len(v) - 1) * v.std(ddof=1) / np.sqrt(len(v)))
    return (m - half, m + half)


def make_splits(
    ds: Dataset, n_splits: int = 10, train_frac: float = 0.8, seed: int = 0
) -> list[tuple[list[str], list[str]]]:
    """Seeded stratified splits per (word, speaker) cell; returns utterance id lists."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must be in (0, 1)")
    if n_splits < 1:
        raise ValueError("n_splits must be >= 1")
    cells = ds.by_cell()
    ids = [u.id for u in ds.utterances]
    for (word_id, speaker), members in cells.items():
        n_train = round(train_frac * len(members))
        if n_train == 0 or n_train == len(members):
            raise StratificationError(
                f"cell (word={word_id}, speaker={speaker}) of size {len(members)} "
                f"cannot be split at train_frac={train_frac}"
            )
    splits = []
    for s in range(n_splits):
        rng = np.random.default_rng(derive_seed(seed, s))
        train: list[str] = []
        test: list[str] = []
        for key in sorted(cells):
            members = cells[key]
            n_train = round(train_frac * len(members))
            perm = rng.permutation(len(members))
            train.extend(ids[members[i]] for i in perm[:n_train])
            test.extend(ids[members[i]] for i in perm[n_train:])
        splits.append((train, test))
    return splits


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are ground truth, columns predictions; class order is the word order."""

    counts: np.ndarray  # int64, (k, k)
    classes: tuple

    def __post_init__(self):
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError("counts must be (k, k) for k classes")
        if (self.counts < 0).any():
            raise ValueError("counts must be >= 0")
        self.counts.setflags(write=False)

    @classmethod
    def from_labels(cls, truth, predicted, classes=None) -> "ConfusionMatrix":
        classes = tuple(classes) if classes is not None else tuple(WORDS)
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(truth, predicted, strict=True):
            counts[index[t], index[p]] += 1
        return cls(counts=counts, classes=classes)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.classes != other.classes:
            raise ValueError("cannot add confusion matrices over different classes")
        return ConfusionMatrix(counts=self.counts + other.counts, classes=self.classes)

    def to_csv(self) -> str:
        names = [getattr(c, "text", str(c)) for c in self.classes]
        lines = ["truth\\pred," + ",".join(names)]
        for i, name in enumerate(names):
            lines.append(name + "," + ",".join(str(int(v)) for v in self.counts[i]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "classes": [getattr(c, "text", c) for c in self.classes],
            "counts": self.counts.tolist(),
            "total": self.total,
            "accuracy": self.accuracy,
        }

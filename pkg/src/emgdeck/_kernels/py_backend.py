"""Pure-NumPy best-split search; the fallback twin of the Cython kernel.

Both backends must pick identical splits: scores are built from exact integer
class counts, so the only floating-point ops are two divisions and one
addition per candidate, performed in the same order in both implementations.
Ties break to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import numpy as np

CRITERION_GINI = 0
CRITERION_ENTROPY = 1


def best_split(X, y, idx, features, n_classes, min_leaf, criterion=CRITERION_GINI):
    """Best axis-aligned split of the rows `idx` over the candidate `features`.

    Returns (feature, threshold, score, n_left) or None when no valid split
    exists. `score` is a per-criterion quantity to maximize (for Gini,
    sum_c nL_c^2/nL + sum_c nR_c^2/nR, i.e. minimal weighted child impurity).
    """
    n = len(idx)
    if n < 2 * min_leaf:
        return None
    y_node = y[idx]
    best = None
    best_score = -np.inf
    nl = np.arange(1, n, dtype=np.float64)
    nr = np.float64(n) - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    onehot = np.zeros((n, n_classes))
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        valid = (sv[1:] != sv[:-1]) & size_ok
        if not valid.any():
            continue
        onehot[:] = 0.0
        onehot[np.arange(n), y_node[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[:-1]  # class counts left of each cut (exact integers)
        right = cum[-1] - left
        if criterion == CRITERION_GINI:
            score = np.sum(left * left, axis=1) / nl + np.sum(right * right, axis=1) / nr
        else:
            score = (_xlogx_sum(left) - nl * np.log(nl)) + (_xlogx_sum(right) - nr * np.log(nr))
        score[~valid] = -np.inf
        j = int(np.argmax(score))  # first occurrence -> lowest threshold
        if score[j] > best_score:
            best_score = float(score[j])
            best = (int(f), float((sv[j] + sv[j + 1]) / 2.0), best_score, j + 1)
    return best


def _xlogx_sum(counts: np.ndarray) -> np.ndarray:
    out = np.zeros_like(counts)
    np.log(counts, out=out, where=counts > 0)
    return np.sum(counts * out, axis=1)

"""Sample pair generation, label-space relations and the pair kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset


class DimensionError(ValueError):
    pass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SamplePair:
    i1: int
    i2: int
    g: float


@dataclass(frozen=True)
class PairSet:
    """Generated sample pairs with their relation values and kernel Gram matrix.

    diffs[i] = x_{i1} - x_{i2} for pair i, so gram[i, j] = (diffs[i] @ diffs[j])^2.
    Immutable after construction; safe to share across workers.
    """

    pairs: tuple[SamplePair, ...]
    diffs: np.ndarray        # (n, d)
    gram: np.ndarray         # (n, n)
    source_dims: int

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def relations(self) -> np.ndarray:
        return np.asarray([p.g for p in self.pairs])


def relation_l1(y_i, y_j) -> float:
    """Decision-space relation: l1 distance between two label vectors."""
    y_i = np.asarray(y_i, dtype=float)
    y_j = np.asarray(y_j, dtype=float)
    if y_i.shape != y_j.shape:
        raise DimensionError(f"label shapes differ: {y_i.shape} vs {y_j.shape}")
    return float(np.abs(y_i - y_j).sum())


def pair_kernel(diff_i, diff_j) -> float:
    """2-degree polynomial kernel between sample pairs.

    Equals the Frobenius inner product of the rank-1 moments u u^T and v v^T,
    i.e. the squared dot product of the two difference vectors.
    """
    u = np.asarray(diff_i, dtype=float)
    v = np.asarray(diff_j, dtype=float)
    if u.shape != v.shape:
        raise DimensionError(f"difference shapes differ: {u.shape} vs {v.shape}")
    return float(u @ v) ** 2


def standardize(features: np.ndarray):
    """Z-score each feature row; rows with stddev < 1e-12 are only centered.

    Returns (transformed, mean, std) where std is the value actually divided
    by (1.0 for degenerate rows), so test splits can reuse the statistics.
    """
    X = np.asarray(features, dtype=float)
    mean = X.mean(axis=1)
    std = X.std(axis=1)
    std = np.where(std < 1e-12, 1.0, std)
    return (X - mean[:, None]) / std[:, None], mean, std


def generate_pairs(data: Dataset, k: int) -> PairSet:
    """Pair every sample with its k nearest neighbors (Euclidean, dedup'd).

    Relation values come from relation_l1 on the task's label vectors
    (single-label classes are one-hot encoded first). Neighbor ties break
    toward the smaller sample index.
    """
    m = data.n_samples
    if m == 0:
        raise ParameterError("empty dataset")
    if not 1 <= k < m:
        raise ParameterError(f"need 1 <= k < m, got k={k}, m={m}")
    X = data.features                      # (d, m)
    Y = data.label_matrix()                # (m, C)

    sq = (X * X).sum(axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    np.fill_diagonal(d2, np.inf)
    # stable argsort: equal distances resolve to the smaller index
    order = np.argsort(d2, axis=1, kind="stable")

    seen = set()
    pairs = []
    for i in range(m):
        for j in order[i, :k]:
            key = (min(i, j), max(i, j))
            if key in seen:
                continue
            seen.add(key)
            pairs.append(SamplePair(key[0], key[1], relation_l1(Y[key[0]], Y[key[1]])))

    diffs = np.stack([X[:, p.i1] - X[:, p.i2] for p in pairs])
    gram = (diffs @ diffs.T) ** 2
    return PairSet(tuple(pairs), diffs, gram, data.n_features)

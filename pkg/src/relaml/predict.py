"""Predictors built on a learned metric: pair regression, metric kNN,
MLKNN for multi-label data and neighbor averaging for label distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Task
from .learners import MetricModel
from .pairspace import DimensionError, ParameterError


def mahalanobis_sq(model: MetricModel, x1, x2) -> float:
    """Squared Mahalanobis distance (x1-x2)' M (x1-x2), clamped at zero.

    Inputs are expected in the model's standardized feature space.
    """
    u = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    if u.shape != (model.n_features,):
        raise DimensionError(f"expected {model.n_features}-vectors")
    return max(0.0, float(u @ model.M @ u))


def regress_pair(model: MetricModel, x1, x2) -> float:
    """Pair regression value <M, (x1-x2)(x1-x2)'> + bias."""
    return mahalanobis_sq(model, x1, x2) + model.bias


def _neighbor_order(model: MetricModel, train_std: np.ndarray, x_std: np.ndarray):
    """Training-sample indices sorted by metric distance to x (stable ties)."""
    diffs = train_std - x_std[:, None]          # (d, m)
    d2 = np.einsum("im,ij,jm->m", diffs, model.M, diffs)
    return np.argsort(d2, kind="stable"), np.maximum(d2, 0.0)


def knn_classify(model: MetricModel, train: Dataset, x, k: int = 1) -> int:
    """Majority vote over the k nearest training samples.

    Vote ties break by smaller summed distance, then smaller class index.
    """
    if train.task is not Task.SINGLE_LABEL:
        raise ParameterError("knn_classify needs a single-label dataset")
    m = train.n_samples
    if m == 0:
        raise ParameterError("empty training set")
    if not 1 <= k <= m:
        raise ParameterError(f"need 1 <= k <= m, got k={k}")
    train_std = model.transform(train.features)
    order, d2 = _neighbor_order(model, train_std, model.transform(np.asarray(x, dtype=float)))
    nn = order[:k]
    votes: dict[int, int] = {}
    dist_sum: dict[int, float] = {}
    for idx in nn:
        c = int(train.labels[idx])
        votes[c] = votes.get(c, 0) + 1
        dist_sum[c] = dist_sum.get(c, 0.0) + float(d2[idx])
    return min(votes, key=lambda c: (-votes[c], dist_sum[c], c))


@dataclass(frozen=True)
class MlknnTables:
    """Smoothed MLKNN statistics under a fixed metric.

    prior[c]            = P(sample carries label c)
    cond[c, j]          = P(j of k neighbors carry c | sample carries c)
    cond_not[c, j]      = P(j of k neighbors carry c | sample lacks c)
    """

    k: int
    s: float
    prior: np.ndarray
    cond: np.ndarray
    cond_not: np.ndarray


def _neighbor_label_counts(model: MetricModel, train_std: np.ndarray,
                           Y: np.ndarray, x_std: np.ndarray, k: int,
                           exclude: int | None = None) -> np.ndarray:
    order, _ = _neighbor_order(model, train_std, x_std)
    if exclude is not None:
        order = order[order != exclude]
    return Y[order[:k]].sum(axis=0)


def mlknn_fit(model: MetricModel, train: Dataset, k: int = 10, s: float = 1.0) -> MlknnTables:
    """Estimate MLKNN priors and neighbor-count likelihoods on the train set.

    Each training sample's own k nearest neighbors (self excluded) are
    counted; all tables use Laplace-style smoothing with strength s.
    """
    if train.task is not Task.MULTI_LABEL:
        raise ParameterError("mlknn_fit needs a multi-label dataset")
    m = train.n_samples
    if k >= m:
        raise ParameterError(f"need k < m, got k={k}, m={m}")
    Y = train.labels
    C = Y.shape[1]
    train_std = model.transform(train.features)

    prior = (s + Y.sum(axis=0)) / (2.0 * s + m)

    counts = np.zeros((m, C), dtype=int)
    for i in range(m):
        counts[i] = _neighbor_label_counts(model, train_std, Y, train_std[:, i],
                                           k, exclude=i)
    # c_pos[c, j]: training samples with label c whose neighborhoods carry c j times
    c_pos = np.zeros((C, k + 1))
    c_neg = np.zeros((C, k + 1))
    for c in range(C):
        has = Y[:, c] == 1
        for j in range(k + 1):
            c_pos[c, j] = np.sum(counts[has, c] == j)
            c_neg[c, j] = np.sum(counts[~has, c] == j)
    def _smoothed(table):
        # a class group can be empty; with s = 0 fall back to uniform
        denom = s * (k + 1) + table.sum(axis=1, keepdims=True)
        safe = np.where(denom > 0, denom, 1.0)
        return np.where(denom > 0, (s + table) / safe, 1.0 / (k + 1))

    return MlknnTables(k, s, prior, _smoothed(c_pos), _smoothed(c_neg))


def mlknn_predict(tables: MlknnTables, model: MetricModel, train: Dataset, x):
    """MAP label decisions and posterior scores for one query point.

    Returns (bits, scores); scores are P(label | neighbor evidence) and lie
    in [0, 1], suitable for the ranking metrics.
    """
    Y = train.labels
    train_std = model.transform(train.features)
    x_std = model.transform(np.asarray(x, dtype=float))
    cnt = _neighbor_label_counts(model, train_std, Y, x_std, tables.k).astype(int)
    C = Y.shape[1]
    bits = np.zeros(C, dtype=int)
    scores = np.zeros(C)
    for c in range(C):
        j = cnt[c]
        p_yes = tables.prior[c] * tables.cond[c, j]
        p_no = (1.0 - tables.prior[c]) * tables.cond_not[c, j]
        scores[c] = p_yes / (p_yes + p_no)
        bits[c] = 1 if p_yes >= p_no else 0
    return bits, scores


def aaknn_predict(model: MetricModel, train: Dataset, x, k: int = 5) -> np.ndarray:
    """Mean of the k nearest training label distributions; sums to 1."""
    if train.task is not Task.LABEL_DISTRIBUTION:
        raise ParameterError("aaknn_predict needs a label-distribution dataset")
    m = train.n_samples
    if not 1 <= k < m:
        raise ParameterError(f"need 1 <= k < m, got k={k}, m={m}")
    train_std = model.transform(train.features)
    order, _ = _neighbor_order(model, train_std, model.transform(np.asarray(x, dtype=float)))
    return train.labels[order[:k]].mean(axis=0)

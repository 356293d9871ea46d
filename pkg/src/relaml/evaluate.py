"""Task metrics and the seeded k-fold cross-validation harness."""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, Task
from .learners import Hyperparams, MetricModel, fit
from .pairspace import DimensionError, ParameterError, standardize
from .predict import aaknn_predict, knn_classify, mlknn_fit, mlknn_predict


class Direction(enum.Enum):
    LOWER_BETTER = "lower"
    HIGHER_BETTER = "higher"


METRIC_DIRECTIONS = {
    "accuracy": Direction.HIGHER_BETTER,
    "hamming_loss": Direction.LOWER_BETTER,
    "ranking_loss": Direction.LOWER_BETTER,
    "one_error": Direction.LOWER_BETTER,
    "coverage": Direction.LOWER_BETTER,
    "average_precision": Direction.HIGHER_BETTER,
    "chebyshev": Direction.LOWER_BETTER,
    "clark": Direction.LOWER_BETTER,
    "canberra": Direction.LOWER_BETTER,
    "cosine": Direction.HIGHER_BETTER,
    "intersection": Direction.HIGHER_BETTER,
}


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    per_fold: tuple[float, ...]
    direction: Direction


@dataclass
class EvalReport:
    metrics: dict[str, MetricSummary]
    folds: int
    seed: int
    warnings: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        out = {
            name: {
                "mean": s.mean,
                "std": s.std,
                "per_fold": list(s.per_fold),
                "direction": s.direction.value,
            }
            for name, s in sorted(self.metrics.items())
        }
        return {"folds": self.folds, "seed": self.seed,
                "warnings": sorted(self.warnings), "metrics": out}


def accuracy(preds, truth) -> float:
    """Fraction of exact matches between two class-index vectors."""
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape or preds.ndim != 1 or preds.size == 0:
        raise DimensionError("prediction/truth vectors must match and be nonempty")
    return float(np.mean(preds == truth))


def multilabel_metrics(pred_bits, pred_scores, truth_bits) -> dict[str, float]:
    """The five standard multi-label measures.

    Instances with zero or all-relevant truth rows are excluded from the
    rank-based measures (zero-relevant rows also from coverage) but still
    count toward hamming_loss; the exclusion count is reported.
    """
    P = np.atleast_2d(np.asarray(pred_bits))
    S = np.atleast_2d(np.asarray(pred_scores, dtype=float))
    T = np.atleast_2d(np.asarray(truth_bits))
    if not (P.shape == S.shape == T.shape):
        raise DimensionError("bit/score/truth shapes must match")
    N, C = T.shape

    hamming = float(np.mean(P != T))

    one_err, rank_loss, avg_prec, coverage = [], [], [], []
    excluded = 0
    for i in range(N):
        rel = T[i] == 1
        n_rel = int(rel.sum())
        s = S[i]
        if n_rel >= 1:
            ranks = rankdata(-s, method="max")
            coverage.append(float(ranks[rel].max() - 1))
        if n_rel == 0 or n_rel == C:
            excluded += 1
            continue
        top = int(np.argmax(s))
        one_err.append(0.0 if rel[top] else 1.0)

        rel_s, irr_s = s[rel], s[~rel]
        wrong = (rel_s[:, None] < irr_s[None, :]).sum() \
            + 0.5 * (rel_s[:, None] == irr_s[None, :]).sum()
        rank_loss.append(float(wrong) / (n_rel * (C - n_rel)))

        ranks = rankdata(-s, method="max")
        precs = [np.sum(ranks[rel] <= ranks[c]) / ranks[c] for c in np.flatnonzero(rel)]
        avg_prec.append(float(np.mean(precs)))

    def _mean(vals):
        return float(np.mean(vals)) if vals else float("nan")

    return {
        "hamming_loss": hamming,
        "ranking_loss": _mean(rank_loss),
        "one_error": _mean(one_err),
        "coverage": _mean(coverage),
        "average_precision": _mean(avg_prec),
        "excluded": float(excluded),
    }


def _check_simplex(v: np.ndarray, name: str):
    if np.any(v < -1e-9) or abs(v.sum() - 1.0) > 1e-6:
        raise ParameterError(f"{name} is not a probability distribution")


def ldl_metrics(pred, truth) -> dict[str, float]:
    """Distribution comparison measures between one predicted and one true
    label distribution; zero-mass components contribute 0 to clark/canberra."""
    p = np.asarray(pred, dtype=float).ravel()
    q = np.asarray(truth, dtype=float).ravel()
    if p.shape != q.shape:
        raise DimensionError("distributions differ in length")
    _check_simplex(p, "pred")
    _check_simplex(q, "truth")
    diff = np.abs(p - q)
    tot = p + q
    safe = np.where(tot > 0, tot, 1.0)
    return {
        "chebyshev": float(diff.max()),
        "clark": float(np.sqrt(np.sum(np.where(tot > 0, (p - q) ** 2 / safe**2, 0.0)))),
        "canberra": float(np.sum(np.where(tot > 0, diff / safe, 0.0))),
        "cosine": float(p @ q / (np.linalg.norm(p) * np.linalg.norm(q))),
        "intersection": float(np.minimum(p, q).sum()),
    }


def _fold_indices(data: Dataset, folds: int, seed: int, stratified: bool):
    """Seeded partition into test folds; returns (folds, warnings)."""
    m = data.n_samples
    rng = np.random.default_rng(seed)
    warnings = []
    if stratified and data.task is Task.SINGLE_LABEL:
        _, counts = np.unique(data.labels, return_counts=True)
        if counts.min() < folds:
            warnings.append("unstratified_fallback")
        else:
            buckets = [[] for _ in range(folds)]
            slot = 0
            for c in np.unique(data.labels):
                members = np.flatnonzero(data.labels == c)
                rng.shuffle(members)
                for idx in members:
                    buckets[slot % folds].append(int(idx))
                    slot += 1
            return [np.asarray(sorted(b), dtype=int) for b in buckets], warnings
    perm = rng.permutation(m)
    return [np.sort(part) for part in np.array_split(perm, folds)], warnings


def _run_fold(data, test_idx, method, h, knn_k, mlknn_k, mlknn_s, aaknn_k):
    mask = np.ones(data.n_samples, dtype=bool)
    mask[test_idx] = False
    train = data.subset(np.flatnonzero(mask))
    test = data.subset(test_idx)

    if method == "euclidean":
        _, mean, std = standardize(train.features)
        model = MetricModel.identity(data.n_features, mean=mean, std=std)
    else:
        model = fit(train, method, h)

    if data.task is Task.SINGLE_LABEL:
        preds = [knn_classify(model, train, test.features[:, i], k=knn_k)
                 for i in range(test.n_samples)]
        return {"accuracy": accuracy(preds, test.labels)}
    if data.task is Task.MULTI_LABEL:
        tables = mlknn_fit(model, train, k=min(mlknn_k, train.n_samples - 1), s=mlknn_s)
        bits, scores = zip(*(mlknn_predict(tables, model, train, test.features[:, i])
                             for i in range(test.n_samples)))
        out = multilabel_metrics(np.stack(bits), np.stack(scores), test.labels)
        out.pop("excluded")
        return out
    per_sample = [ldl_metrics(aaknn_predict(model, train, test.features[:, i],
                                            k=min(aaknn_k, train.n_samples - 1)),
                              test.labels[i])
                  for i in range(test.n_samples)]
    return {name: float(np.mean([s[name] for s in per_sample]))
            for name in per_sample[0]}


def cross_validate(data: Dataset, method, h: Hyperparams = Hyperparams(),
                   folds: int = 10, seed: int = 0, stratified: bool = True,
                   knn_k: int = 1, mlknn_k: int = 10, mlknn_s: float = 1.0,
                   aaknn_k: int = 5) -> EvalReport:
    """Seeded k-fold cross validation following the train-only
    standardization protocol; per-fold scores plus population mean/std.

    `method` is a learner name or "euclidean" for the identity-metric
    baseline. Folds run in parallel, capped by RELAML_THREADS.
    """
    if folds < 2:
        raise ParameterError("need folds >= 2")
    if data.n_samples < folds:
        raise ParameterError("more folds than samples")
    fold_sets, warnings = _fold_indices(data, folds, seed, stratified)

    workers = int(os.environ.get("RELAML_THREADS", os.cpu_count() or 1))
    workers = max(1, min(workers, folds))
    args = [(data, idx, method, h, knn_k, mlknn_k, mlknn_s, aaknn_k)
            for idx in fold_sets]
    if workers == 1:
        results = [_run_fold(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: _run_fold(*a), args))

    metrics = {}
    for name in results[0]:
        vals = tuple(float(r[name]) for r in results)
        finite = [v for v in vals if np.isfinite(v)]
        metrics[name] = MetricSummary(
            mean=float(np.mean(finite)) if finite else float("nan"),
            std=float(np.std(finite)) if finite else float("nan"),
            per_fold=vals,
            direction=METRIC_DIRECTIONS[name],
        )
    return EvalReport(metrics, folds, seed, warnings)

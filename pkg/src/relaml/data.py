"""Dataset container and file loaders (CSV and sparse index:value formats)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Task(enum.Enum):
    SINGLE_LABEL = "single"
    MULTI_LABEL = "multi"
    LABEL_DISTRIBUTION = "distribution"


class DataError(ValueError):
    """Raised for malformed input files or invalid dataset contents."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus a label block.

    ``features`` is stored with shape (d, m): one column per sample.
    ``labels`` is an (m,) integer array for single-label tasks and an
    (m, C) array for multi-label / distribution tasks.
    """

    features: np.ndarray
    labels: np.ndarray
    task: Task

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError("features must be a 2-D (d, m) matrix")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "features", X)
        y = np.asarray(self.labels)
        if self.task is Task.SINGLE_LABEL:
            y = np.asarray(y, dtype=int).ravel()
            if y.shape[0] != X.shape[1]:
                raise DataError("label count does not match sample count")
            if y.size and y.min() < 0:
                raise DataError("single-label class indices must be >= 0")
        else:
            y = np.asarray(y, dtype=float)
            if y.ndim != 2 or y.shape[0] != X.shape[1]:
                raise DataError("labels must be an (m, C) matrix")
            if self.task is Task.MULTI_LABEL:
                if not np.all((y == 0) | (y == 1)):
                    raise DataError("multi-label entries must be 0 or 1")
            else:
                if np.any(y < -1e-12) or np.any(y > 1 + 1e-12):
                    raise DataError("distribution entries must lie in [0, 1]")
                sums = y.sum(axis=1)
                if np.any(np.abs(sums - 1.0) > 1e-9):
                    raise DataError("distribution rows must sum to 1")
        object.__setattr__(self, "labels", y)

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task is Task.SINGLE_LABEL:
            return int(self.labels.max()) + 1 if self.labels.size else 0
        return self.labels.shape[1]

    def label_matrix(self) -> np.ndarray:
        """Labels as an (m, C) matrix; single-label classes are one-hot encoded."""
        if self.task is not Task.SINGLE_LABEL:
            return self.labels
        C = self.n_classes
        Y = np.zeros((self.n_samples, C))
        Y[np.arange(self.n_samples), self.labels] = 1.0
        return Y

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.features[:, idx], self.labels[idx], self.task)


def _parse_labels(block: np.ndarray, task: Task, line0: int) -> np.ndarray:
    """Validate and coerce raw label columns for one file."""
    if task is Task.SINGLE_LABEL:
        if block.shape[1] != 1:
            raise DataError("single-label data needs exactly one label column")
        vals = block[:, 0]
        if np.any(vals != np.round(vals)):
            bad = int(np.argmax(vals != np.round(vals)))
            raise DataError(f"line {line0 + bad + 1}: non-integer class label {vals[bad]}")
        return vals.astype(int)
    if task is Task.MULTI_LABEL:
        ok = (block == 0) | (block == 1)
        if not ok.all():
            bad = int(np.argmax(~ok.all(axis=1)))
            raise DataError(f"line {line0 + bad + 1}: multi-label cell outside {{0,1}}")
        return block
    sums = block.sum(axis=1)
    off = np.abs(sums - 1.0)
    if np.any(off > 1e-6):
        bad = int(np.argmax(off > 1e-6))
        raise DataError(f"line {line0 + bad + 1}: distribution row sums to {sums[bad]}")
    return block / sums[:, None]


def _load_csv(path: str, task: Task, n_labels: int, label_position: str):
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c for c in line.replace(";", ",").split(",") if c != ""]
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric cell") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise DataError(f"line {lineno}: ragged row ({len(vals)} cells, expected {width})")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: empty dataset")
    table = np.asarray(rows, dtype=float)
    if n_labels >= table.shape[1]:
        raise DataError("label columns exhaust the table; no features left")
    if label_position == "head":
        labels, feats = table[:, :n_labels], table[:, n_labels:]
    else:
        labels, feats = table[:, -n_labels:], table[:, :-n_labels]
    return feats.T, _parse_labels(labels, task, 0)


def _load_svmlight(path: str, task: Task, n_labels: int):
    """Sparse `label(s) idx:val ...` format; feature indices are 1-based."""
    label_rows, feat_rows, max_idx = [], [], 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label_rows.append([float(t) for t in tokens[0].split(",")])
                feats = {}
                for tok in tokens[1:]:
                    idx, val = tok.split(":")
                    idx = int(idx)
                    if idx < 1:
                        raise ValueError
                    feats[idx] = float(val)
            except ValueError:
                raise DataError(f"line {lineno}: malformed token") from None
            if feats:
                max_idx = max(max_idx, max(feats))
            feat_rows.append(feats)
    if not feat_rows:
        raise DataError(f"{path}: empty dataset")
    X = np.zeros((len(feat_rows), max_idx))
    for i, feats in enumerate(feat_rows):
        for idx, val in feats.items():
            X[i, idx - 1] = val

    if task is Task.SINGLE_LABEL:
        labels = np.asarray([row[0] for row in label_rows])[:, None]
    elif task is Task.MULTI_LABEL:
        # label field lists the positive class indices
        C = n_labels
        Y = np.zeros((len(label_rows), C))
        for i, row in enumerate(label_rows):
            for v in row:
                c = int(v)
                if c != v or not 0 <= c < C:
                    raise DataError(f"line {i + 1}: class index {v} outside [0, {C})")
                Y[i, c] = 1.0
        labels = Y
    else:
        labels = np.asarray(label_rows)
        if labels.shape[1] != n_labels:
            raise DataError(f"expected {n_labels} distribution entries per line")
    return X.T, _parse_labels(labels, task, 0)


def load_dataset(path: str, fmt: str, task: Task | str, n_labels: int = 1,
                 label_position: str = "tail") -> Dataset:
    """Load a dataset file.

    fmt: "csv" (dense, label columns at head or tail), "svmlight" (sparse
    index:value rows, labels first), or "mulan-csv" (dense CSV with the
    label block in the trailing columns).
    """
    if isinstance(task, str):
        task = Task(task)
    if label_position not in ("head", "tail"):
        raise DataError(f"unknown label position {label_position!r}")
    if task is Task.SINGLE_LABEL:
        n_labels = 1
    elif n_labels < 1:
        raise DataError("n_labels must be >= 1")
    if fmt == "csv":
        X, y = _load_csv(path, task, n_labels, label_position)
    elif fmt == "mulan-csv":
        X, y = _load_csv(path, task, n_labels, "tail")
    elif fmt in ("svmlight", "svmlight-like"):
        X, y = _load_svmlight(path, task, n_labels)
    else:
        raise DataError(f"unknown format {fmt!r}")
    return Dataset(X, y, task)

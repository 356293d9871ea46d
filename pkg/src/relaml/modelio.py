"""Versioned textual model files (17-significant-digit decimals, diffable)."""

from __future__ import annotations

import numpy as np

from .data import DataError
from .learners import Hyperparams, Method, MetricModel

FORMAT_VERSION = 1
_MAGIC = "relaml-model"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_row(values) -> str:
    return " ".join(_fmt(v) for v in values)


def save_model(model: MetricModel, path: str, hyperparams: Hyperparams | None = None):
    d = model.n_features
    mean = model.feature_mean if model.feature_mean is not None else np.zeros(d)
    std = model.feature_std if model.feature_std is not None else np.ones(d)
    h = hyperparams or Hyperparams()
    lines = [
        f"{_MAGIC} {FORMAT_VERSION}",
        f"method {model.method.value}",
        f"d {d}",
        f"bias {_fmt(model.bias)}",
        f"lambda {_fmt(h.lambda_)}",
        f"epsilon {'auto' if h.epsilon is None else _fmt(h.epsilon)}",
        f"pairs_k {h.pairs_k}",
        f"mean {_fmt_row(mean)}",
        f"std {_fmt_row(std)}",
        "M",
    ]
    lines.extend(_fmt_row(row) for row in model.M)
    lines.append(f"coefficients {_fmt_row(model.coefficients)}".rstrip())
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path: str) -> tuple[MetricModel, Hyperparams]:
    try:
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc}") from exc
    try:
        magic, version = lines[0].split()
        if magic != _MAGIC or int(version) != FORMAT_VERSION:
            raise ValueError(f"unsupported header {lines[0]!r}")
        fields = {}
        i = 1
        while lines[i] != "M":
            key, _, val = lines[i].partition(" ")
            fields[key] = val
            i += 1
        d = int(fields["d"])
        M = np.asarray([[float(v) for v in lines[i + 1 + r].split()] for r in range(d)])
        if M.shape != (d, d):
            raise ValueError("metric matrix shape mismatch")
        i += 1 + d
        key, _, val = lines[i].partition(" ")
        if key != "coefficients":
            raise ValueError("missing coefficients line")
        coefs = np.asarray([float(v) for v in val.split()]) if val else np.zeros(0)
        if lines[i + 1] != "end":
            raise ValueError("missing end marker")
        mean = np.asarray([float(v) for v in fields["mean"].split()])
        std = np.asarray([float(v) for v in fields["std"].split()])
        if mean.shape != (d,) or std.shape != (d,):
            raise ValueError("standardization statistics shape mismatch")
        eps = fields["epsilon"]
        h = Hyperparams(lambda_=float(fields["lambda"]),
                        epsilon=None if eps == "auto" else float(eps),
                        pairs_k=int(fields["pairs_k"]))
        model = MetricModel(M, float(fields["bias"]), coefs,
                            Method(fields["method"]),
                            feature_mean=mean, feature_std=std)
    except (IndexError, KeyError, ValueError) as exc:
        raise DataError(f"corrupt model file {path}: {exc}") from exc
    return model, h

"""Shared fixtures: random QP instances and the synthetic recovery dataset."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from relaml import Dataset, QpProblem, Task


def random_qp(rng, n=None, with_eq=None, with_ineq=None, max_ineq=2):
    """Random feasible strictly convex QP with n <= 6 variables."""
    if n is None:
        n = int(rng.integers(1, 7))
    A = rng.standard_normal((n, n))
    Q = A @ A.T + 0.1 * np.eye(n)
    c = rng.standard_normal(n)
    lo = rng.uniform(-2.0, 0.0, n)
    up = lo + rng.uniform(0.5, 3.0, n)
    # x0 is feasible by construction and anchors equality/inequality rows
    x0 = rng.uniform(lo, up)
    eq = None
    if with_eq if with_eq is not None else rng.random() < 0.5:
        w = rng.standard_normal(n)
        eq = (w, float(w @ x0))
    ineq = None
    if with_ineq if with_ineq is not None else rng.random() < 0.5:
        q = int(rng.integers(1, max_ineq + 1))
        G = rng.standard_normal((q, n))
        h = G @ x0 - rng.uniform(0.0, 1.0, q)
        ineq = (G, h)
    return QpProblem(Q, c, lo, up, eq=eq, ineq=ineq)


def make_recovery_data(seed=0, m=100):
    """Two-feature dataset: class = sign of feature 1, feature 2 pure noise.

    The noise draws include a few isolated values shared by one sample of
    each class ("twins"), which guarantees cross-class nearest-neighbor
    pairs whose difference vectors point along feature 1.
    """
    gap, clip, twin_a = 0.15, 1.5, 0.5
    levels = (4.0, -4.0, 5.0, -5.0)
    rng = np.random.default_rng(seed)
    nb = m - 2 * len(levels)
    s = rng.choice([-1.0, 1.0], nb)
    f1 = s * rng.uniform(gap, 1.2, nb)
    f2 = np.clip(rng.standard_normal(nb), -clip, clip)
    tf1, tf2 = [], []
    for j, v in enumerate(levels):
        a = twin_a + 0.02 * (j + 1)
        tf1 += [a, -a]
        tf2 += [v, v]
    f1 = np.concatenate([f1, tf1])
    f2 = np.concatenate([f2, tf2])
    return Dataset(np.vstack([f1, f2]), (f1 > 0).astype(int), Task.SINGLE_LABEL)


def random_dataset(rng, m, d, task=Task.SINGLE_LABEL, n_classes=3):
    """Random dataset of any task type for property tests."""
    X = rng.standard_normal((d, m))
    if task is Task.SINGLE_LABEL:
        y = rng.integers(0, n_classes, m)
        y[: n_classes] = np.arange(n_classes)  # every class present
        return Dataset(X, y, task)
    if task is Task.MULTI_LABEL:
        Y = rng.integers(0, 2, (m, n_classes))
        return Dataset(X, Y, task)
    Y = rng.dirichlet(np.ones(n_classes), m)
    return Dataset(X, Y, task)


@pytest.fixture
def recovery_data():
    return make_recovery_data()

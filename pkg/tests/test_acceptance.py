"""Acceptance suite: one test per top-level criterion.

Each test name states its criterion, so `pytest -v` yields one pass/fail
line per criterion. Time budgets are asserted inside the tests.
"""

import json
import os
import time

import numpy as np
import pytest

from relaml import (Dataset, Hyperparams, Method, Task, cross_validate, fit,
                    fit_ncsvr, fit_pcsvr, fit_svr, knn_classify, load_dataset,
                    load_model, mlknn_fit, mlknn_predict, multilabel_metrics,
                    ldl_metrics, psd_project, save_model, solve_qp)
from relaml.cli import main
from relaml.learners import _dual_qp

from conftest import make_recovery_data, random_dataset, random_qp
from oracles import (euclidean_knn, mlknn_oracle, ncsvr_primal_grid,
                     ncsvr_primal_value, qp_oracle)
from test_learners import make_pairset, random_pairset
from test_modelio_cli import write_csv

FLAGS_PATHS = [
    os.environ.get("RELAML_FLAGS_DATA", ""),
    os.path.join(os.path.dirname(__file__), "data", "flags.csv"),
    "/root/pkg/data/flags.csv",
]


def test_psd_guarantee_over_200_randomized_fits():
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    methods = [Method.SVR, Method.PCSVR, Method.NCSVR]
    for trial in range(200):
        m = int(rng.integers(10, 61))
        d = int(rng.integers(2, 9))
        task = [Task.SINGLE_LABEL, Task.MULTI_LABEL,
                Task.LABEL_DISTRIBUTION][trial % 3]
        data = random_dataset(rng, m, d, task=task)
        h = Hyperparams(lambda_=float(rng.uniform(0.5, 5.0)),
                        epsilon=float(rng.uniform(0.0, 0.3)),
                        pairs_k=2)
        model = fit(data, methods[trial % 3], h)
        eigs = np.linalg.eigvalsh(model.M)
        bound = -1e-8 * (1.0 + float(np.diag(model.M).max(initial=0.0)))
        assert eigs.min() >= bound, f"trial {trial}: min eig {eigs.min()}"
    assert time.monotonic() - start < 120.0


def test_qp_oracle_equivalence_over_500_instances():
    start = time.monotonic()
    rng = np.random.default_rng(77)
    for trial in range(500):
        p = random_qp(rng)
        sol = solve_qp(p)
        obj, _ = qp_oracle(p)
        assert sol.objective <= obj + 1e-6 * (1 + abs(obj)), f"trial {trial}"
        assert sol.objective >= obj - 1e-6 * (1 + abs(obj)), f"trial {trial}"
        assert sol.kkt_residual < np.inf
    assert time.monotonic() - start < 60.0


def test_svr_matches_bruteforce_dual_oracle():
    rng = np.random.default_rng(88)
    for trial in range(12):
        n = int(rng.integers(2, 5))
        ps = random_pairset(rng, n, int(rng.integers(1, 4)))
        eps = float(rng.uniform(0.0, 0.2))
        lam = float(rng.uniform(0.5, 5.0))
        h = Hyperparams(epsilon=eps, lambda_=lam)
        model = fit_svr(ps, h)

        dual = _dual_qp(ps.gram, ps.relations, eps, lam, True, False)
        obj, _ = qp_oracle(dual)
        assert model.diagnostics.dual_objective == pytest.approx(
            -obj, abs=1e-6 * (1 + abs(obj))), f"trial {trial}"

        sol = solve_qp(dual)
        a, a_star = sol.x[:n], sol.x[n:]
        assert np.minimum(a, a_star).max() <= 1e-6

        for i in range(n):
            T = np.outer(ps.diffs[i], ps.diffs[i])
            lhs = float(np.sum(model.diagnostics.m_pre * T)) + model.bias
            rhs = float(model.coefficients @ ps.gram[:, i]) + model.bias
            assert abs(lhs - rhs) <= 1e-8


def test_pcsvr_sign_constraint_and_oracle_objective():
    rng = np.random.default_rng(99)
    for trial in range(10):
        ps = random_pairset(rng, 3, 2)
        eps = float(rng.uniform(0.0, 0.2))
        lam = float(rng.uniform(0.5, 5.0))
        dual = _dual_qp(ps.gram, ps.relations, eps, lam, False, True)
        sol = solve_qp(dual)
        n = ps.n_pairs
        assert (sol.x[:n] - sol.x[n:]).min() >= -1e-10, f"trial {trial}"

        model = fit_pcsvr(ps, Hyperparams(epsilon=eps, lambda_=lam))
        obj, _ = qp_oracle(dual)
        assert model.diagnostics.dual_objective == pytest.approx(
            -obj, abs=1e-6 * (1 + abs(obj))), f"trial {trial}"

    # constraint must also hold on larger random fits
    for _ in range(10):
        ps = random_pairset(rng, int(rng.integers(4, 10)), 3)
        model = fit_pcsvr(ps, Hyperparams(epsilon=0.05, lambda_=2.0))
        eigs = np.linalg.eigvalsh(model.M)
        assert eigs.min() >= -1e-8 * (1 + eigs.max())


def test_ncsvr_monotone_nonnegative_grid_oracle_and_convergence():
    rng = np.random.default_rng(111)
    converged = 0
    total = 40
    for trial in range(total):
        ps = random_pairset(rng, int(rng.integers(2, 8)),
                            int(rng.integers(1, 4)))
        model = fit_ncsvr(ps, Hyperparams(
            epsilon=float(rng.uniform(0.0, 0.2)),
            lambda_=float(rng.uniform(0.5, 3.0))))
        assert model.coefficients.min() >= 0.0, f"trial {trial}"
        hist = model.diagnostics.alternating_objectives
        for prev, cur in zip(hist, hist[1:]):
            assert cur >= prev - 1e-9, f"trial {trial}: {prev} -> {cur}"
        assert model.diagnostics.outer_iterations <= 50
        converged += int(model.diagnostics.converged)
    assert converged >= int(0.95 * total)

    for u, g, lam, eps in [((1.0, 2.0), (1.0, 4.0), 1.0, 0.1),
                           ((0.7, 1.1), (1.5, 0.8), 1.5, 0.1),
                           ((0.8, 1.3), (0.5, 1.5), 0.5, 0.0)]:
        ps = make_pairset([[u[0]], [u[1]]], list(g))
        model = fit_ncsvr(ps, Hyperparams(epsilon=eps, lambda_=lam))
        primal = ncsvr_primal_value(ps.gram, model.coefficients,
                                    np.asarray(g), eps, lam)
        oracle, mu_star = ncsvr_primal_grid(ps.gram, np.asarray(g), eps, lam)
        assert mu_star.max() < 1.99
        assert primal == pytest.approx(oracle, abs=1e-4)


def test_psd_projection_beats_1000_random_psd_candidates():
    rng = np.random.default_rng(123)
    for _ in range(100):
        A = rng.standard_normal((3, 3))
        A = 0.5 * (A + A.T)
        best = float(np.linalg.norm(psd_project(A) - A))
        B = rng.standard_normal((1000, 3, 3))
        cands = np.einsum("kij,klj->kil", B, B)
        dists = np.linalg.norm(cands - A, axis=(1, 2))
        assert best <= float(dists.min()) + 1e-9


def test_metric_recovery_on_relevant_feature_dataset():
    start = time.monotonic()
    data = make_recovery_data()
    h = Hyperparams(lambda_=10.0, epsilon=0.0, pairs_k=4)
    for method in Method:
        model = fit(data, method, h)
        ratio = model.M[0, 0] / (model.M[0, 0] + model.M[1, 1] + 1e-12)
        assert ratio > 0.9, f"{method.value}: ratio {ratio}"

    h_cv = Hyperparams(lambda_=10.0, epsilon=0.0, pairs_k=3)
    learned, baseline = [], []
    for seed in range(5):
        learned.append(cross_validate(data, "svr", h_cv, folds=10,
                                      seed=seed).metrics["accuracy"].mean)
        baseline.append(cross_validate(data, "euclidean", h_cv, folds=10,
                                       seed=seed).metrics["accuracy"].mean)
    assert float(np.mean(learned)) >= float(np.mean(baseline))
    assert time.monotonic() - start < 60.0


def test_predictor_oracles_and_metric_identities():
    rng = np.random.default_rng(321)
    from relaml import MetricModel

    # metric kNN with M = I versus the Euclidean brute-force oracle
    for _ in range(20):
        data = random_dataset(rng, 15, 3, n_classes=3)
        m = MetricModel.identity(3)
        x = rng.standard_normal(3)
        for k in (1, 3, 5):
            assert knn_classify(m, data, x, k=k) == \
                euclidean_knn(data.features, data.labels, x, k)

    # MLKNN with M = I versus the independent reimplementation
    for _ in range(3):
        data = random_dataset(rng, 20, 3, task=Task.MULTI_LABEL)
        m = MetricModel.identity(3)
        tables = mlknn_fit(m, data, k=4, s=1.0)
        queries = [rng.standard_normal(3) for _ in range(8)]
        oracle_bits, oracle_scores = mlknn_oracle(data.features, data.labels,
                                                  queries, 4, 1.0)
        for i, q in enumerate(queries):
            bits, scores = mlknn_predict(tables, m, data, q)
            np.testing.assert_array_equal(bits, oracle_bits[i])
            np.testing.assert_allclose(scores, oracle_scores[i], atol=1e-12)

    # multi-label measures against the exhaustive single-instance enumeration
    out = multilabel_metrics([[0, 1, 0, 0]], [[0.7, 0.9, 0.6, 0.1]],
                             [[1, 0, 1, 0]])
    assert out["one_error"] == 1.0
    assert out["coverage"] == 2.0
    assert out["ranking_loss"] == pytest.approx(2 / 4)
    assert out["average_precision"] == pytest.approx((1 / 2 + 2 / 3) / 2)

    # LDL identity: intersection = 1 - l1/2 on random simplex pairs
    for _ in range(200):
        p = rng.dirichlet(np.ones(5))
        q = rng.dirichlet(np.ones(5))
        inter = ldl_metrics(p, q)["intersection"]
        assert inter == pytest.approx(1.0 - 0.5 * np.abs(p - q).sum(),
                                      abs=1e-12)


def test_flags_dataset_mlknn_average_precision_optional():
    path = next((p for p in FLAGS_PATHS if p and os.path.exists(p)), None)
    if path is None:
        pytest.skip("flags dataset not available offline")
    start = time.monotonic()
    data = load_dataset(path, "csv", "multi", n_labels=7)
    assert data.n_samples == 194 and data.n_features == 19

    from relaml import MetricModel
    from relaml.pairspace import standardize

    rng = np.random.default_rng(0)
    perm = rng.permutation(data.n_samples)
    cut = int(0.7 * data.n_samples)
    train, test = data.subset(perm[:cut]), data.subset(perm[cut:])

    def avg_precision(model):
        tables = mlknn_fit(model, train, k=10, s=1.0)
        pairs = [mlknn_predict(tables, model, train, test.features[:, i])
                 for i in range(test.n_samples)]
        bits = np.stack([b for b, _ in pairs])
        scores = np.stack([s for _, s in pairs])
        return multilabel_metrics(bits, scores,
                                  test.labels)["average_precision"]

    _, mean, std = standardize(train.features)
    plain = avg_precision(MetricModel.identity(19, mean=mean, std=std))
    learned = avg_precision(fit(train, "ncsvr",
                                Hyperparams(lambda_=1.0, pairs_k=3)))
    assert learned >= plain - 0.02
    assert time.monotonic() - start < 300.0


def test_cli_determinism_and_model_round_trip(tmp_path):
    data = make_recovery_data().subset(range(0, 100, 2))
    csv = tmp_path / "d.csv"
    write_csv(csv, data)

    reports = []
    for name in ("r1.json", "r2.json"):
        path = tmp_path / name
        assert main(["cv", "--data", str(csv), "--task", "single",
                     "--method", "svr", "--lambda", "10", "--epsilon", "0",
                     "--pairs-k", "3", "--folds", "5", "--seed", "11",
                     "--report", str(path)]) == 0
        reports.append(path.read_bytes())
    assert reports[0] == reports[1]

    out = tmp_path / "m.relaml"
    assert main(["train", "--data", str(csv), "--task", "single",
                 "--method", "svr", "--lambda", "10", "--epsilon", "0",
                 "--pairs-k", "3", "--out", str(out)]) == 0
    model = fit(data, "svr", Hyperparams(lambda_=10.0, epsilon=0.0,
                                         pairs_k=3))
    loaded, _ = load_model(str(out))
    for i in range(data.n_samples):
        x = data.features[:, i]
        assert knn_classify(loaded, data, x, k=3) \
            == knn_classify(model, data, x, k=3)

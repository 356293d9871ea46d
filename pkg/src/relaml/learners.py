"""The three relation-alignment metric learners: SVR, PCSVR and NCSVR.

All three regress pair relations g(z_i) onto the pair kernel and read the
metric matrix off the dual coefficients:

  svr    M = sum_i (a_i - a*_i) T_i, then projected onto the PSD cone
  pcsvr  same dual with a_i >= a*_i added, PSD by construction, no bias
  ncsvr  M = sum_i mu_i T_i with mu_i >= 0, solved by alternating QPs
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .data import Dataset
from .pairspace import PairSet, ParameterError, generate_pairs, standardize
from .qp import QpProblem, QpStatus, QpError, solve_qp


class Method(enum.Enum):
    SVR = "svr"
    PCSVR = "pcsvr"
    NCSVR = "ncsvr"


@dataclass(frozen=True)
class Hyperparams:
    lambda_: float = 1.0          # dual box cap
    epsilon: float | None = None  # insensitive-tube half width; None = 0.05*std(g)
    pairs_k: int = 3
    ncsvr_tol: float = 1e-6
    ncsvr_max_outer: int = 50
    qp_tol: float = 1e-8
    qp_max_iter: int = 10_000

    def __post_init__(self):
        if self.lambda_ <= 0:
            raise ParameterError("lambda must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise ParameterError("epsilon must be nonnegative")

    def resolve_epsilon(self, g: np.ndarray) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return 0.05 * float(np.std(g))


@dataclass
class FitReport:
    dual_objective: float = 0.0
    outer_iterations: int = 1
    pre_projection_min_eig: float | None = None
    kkt_residual: float = 0.0
    wall_time: float = 0.0
    m_pre: np.ndarray | None = None      # pre-projection matrix (svr only)
    bias_fallback: bool = False
    clip_mass: float = 0.0               # total negative mu mass clipped (ncsvr)
    converged: bool = True               # outer loop met the delta-mu criterion
    alternating_objectives: list[float] = field(default_factory=list)


@dataclass
class MetricModel:
    M: np.ndarray
    bias: float
    coefficients: np.ndarray
    method: Method
    diagnostics: FitReport = field(default_factory=FitReport)
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return self.M.shape[0]

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Map raw feature vectors/columns into the model's standardized space."""
        x = np.asarray(x, dtype=float)
        if self.feature_mean is None:
            return x
        if x.ndim == 1:
            return (x - self.feature_mean) / self.feature_std
        return (x - self.feature_mean[:, None]) / self.feature_std[:, None]

    @classmethod
    def identity(cls, d: int, mean=None, std=None) -> "MetricModel":
        """Euclidean baseline: M = I in the (optionally standardized) space."""
        return cls(np.eye(d), 0.0, np.zeros(0), Method.SVR,
                   feature_mean=mean, feature_std=std)


def psd_project(A: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clamp negative eigenvalues to zero."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise FloatingPointError("non-finite input to psd_project")
    S = 0.5 * (A + A.T)
    vals, vecs = np.linalg.eigh(S)
    P = (vecs * np.maximum(vals, 0.0)) @ vecs.T
    return 0.5 * (P + P.T)


def _dual_qp(K: np.ndarray, g: np.ndarray, eps: float, lam: float,
             with_equality: bool, sign_constraint: bool) -> QpProblem:
    """Assemble the (a, a*) dual as a minimization QP."""
    n = K.shape[0]
    Q = np.block([[K, -K], [-K, K]])
    c = np.concatenate([eps - g, eps + g])
    lower = np.zeros(2 * n)
    upper = np.full(2 * n, lam)
    eq = None
    if with_equality:
        eq = (np.concatenate([np.ones(n), -np.ones(n)]), 0.0)
    ineq = None
    if sign_constraint:
        G = np.hstack([np.eye(n), -np.eye(n)])   # a - a* >= 0
        ineq = (G, np.zeros(n))
    return QpProblem(Q, c, lower, upper, eq=eq, ineq=ineq)


def _combine(pairs: PairSet, coef: np.ndarray) -> np.ndarray:
    """M = sum_i coef_i * u_i u_i^T from the stored pair differences."""
    M = (pairs.diffs.T * coef) @ pairs.diffs
    return 0.5 * (M + M.T)


def _solve(problem: QpProblem, h: Hyperparams, context: str):
    sol = solve_qp(problem, tol=h.qp_tol, max_iter=h.qp_max_iter)
    if sol.status is QpStatus.INFEASIBLE:
        raise QpError(f"{context}: QP infeasible")
    return sol


def fit_svr(pairs: PairSet, h: Hyperparams) -> MetricModel:
    """Baseline learner: plain SVR dual plus PSD projection of M."""
    t0 = time.perf_counter()
    if pairs.n_pairs == 0:
        raise ParameterError("empty pair set")
    K, g = pairs.gram, pairs.relations
    eps, lam = h.resolve_epsilon(g), h.lambda_
    n = pairs.n_pairs

    sol = _solve(_dual_qp(K, g, eps, lam, True, False), h, "svr dual")
    a, a_star = sol.x[:n], sol.x[n:]
    beta = a - a_star
    fitted = K @ beta

    atol = max(1e-8, 1e-6 * lam)
    bias_terms = []
    for i in range(n):
        if atol < a[i] < lam - atol:
            bias_terms.append(g[i] - eps - fitted[i])
        elif atol < a_star[i] < lam - atol:
            bias_terms.append(g[i] + eps - fitted[i])
    fallback = not bias_terms
    bias = float(np.mean(bias_terms)) if bias_terms else float(np.mean(g - fitted))

    m_pre = _combine(pairs, beta)
    min_eig = float(np.linalg.eigvalsh(m_pre).min()) if m_pre.size else 0.0
    M = psd_project(m_pre)
    report = FitReport(dual_objective=-sol.objective, pre_projection_min_eig=min_eig,
                       kkt_residual=sol.kkt_residual, m_pre=m_pre,
                       bias_fallback=fallback, wall_time=time.perf_counter() - t0)
    return MetricModel(M, bias, beta, Method.SVR, report)


def fit_pcsvr(pairs: PairSet, h: Hyperparams) -> MetricModel:
    """Sign-constrained dual (a_i >= a*_i): M is PSD by construction.

    The bias term is dropped from the primal, which removes the dual's
    equality constraint; with both kept the constraint set would force
    a = a* and a zero metric.
    """
    t0 = time.perf_counter()
    if pairs.n_pairs == 0:
        raise ParameterError("empty pair set")
    K, g = pairs.gram, pairs.relations
    eps, lam = h.resolve_epsilon(g), h.lambda_
    n = pairs.n_pairs

    sol = _solve(_dual_qp(K, g, eps, lam, False, True), h, "pcsvr dual")
    beta = sol.x[:n] - sol.x[n:]
    M = _combine(pairs, beta)
    report = FitReport(dual_objective=-sol.objective, kkt_residual=sol.kkt_residual,
                       wall_time=time.perf_counter() - t0)
    return MetricModel(M, 0.0, beta, Method.PCSVR, report)


def _alternating_objective(K, g, eps, a, a_star, rho) -> float:
    """Common concave objective both NCSVR block steps maximize exactly."""
    beta = a - a_star
    mu = beta + rho
    return float(-0.5 * mu @ K @ mu + beta @ g - eps * (a.sum() + a_star.sum()))


def _nonnegative_restore(K: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Nearest nonnegative coefficient vector preserving K v.

    When K is rank deficient (always for low-dimensional features) the raw
    combination coefficients are only determined up to null(K); an
    elementwise clip of negatives would change K mu and with it the fitted
    metric, so the nonnegative representative is recovered by NNLS instead.
    Reduces to a plain clip when no negative entries are present.
    """
    if np.all(v >= 0.0):
        return v
    mu, _ = nnls(K, K @ v)
    return mu


def fit_ncsvr(pairs: PairSet, h: Hyperparams) -> MetricModel:
    """Nonnegative-combination learner solved by alternating QPs.

    Repeats: (alpha step) bias-free SVR dual against the shifted targets
    g - K rho; (rho step) quadratic step under K rho >= 0; then
    mu = (alpha - alpha*) + rho with negatives clipped. Stops when mu
    stabilizes in the max norm.
    """
    t0 = time.perf_counter()
    if pairs.n_pairs == 0:
        raise ParameterError("empty pair set")
    K, g = pairs.gram, pairs.relations
    eps, lam = h.resolve_epsilon(g), h.lambda_
    n = pairs.n_pairs

    rho = np.zeros(n)
    mu = np.zeros(n)
    history = []
    kkt_res = 0.0
    outer = 0
    converged = False

    # The rho step is solved in the eigenbasis of K restricted to range(K):
    # null-space components change neither the objective nor K rho, and the
    # reduced problem is strictly convex, which the QP solver handles far
    # more reliably than the singular full-space formulation.
    vals, vecs = np.linalg.eigh(K)
    keep = vals > 1e-10 * max(float(vals.max(initial=0.0)), 1.0)
    V_r, lam_r = vecs[:, keep], vals[keep]
    r = int(keep.sum())

    for outer in range(1, h.ncsvr_max_outer + 1):
        sol_a = _solve(_dual_qp(K, g - K @ rho, eps, lam, False, False),
                       h, f"ncsvr alpha step (outer {outer})")
        a, a_star = sol_a.x[:n], sol_a.x[n:]
        beta = a - a_star

        if r == 0:
            rho = np.zeros(n)
            kkt_res = sol_a.kkt_residual
            history.append(_alternating_objective(K, g, eps, a, a_star, rho))
            mu_new = _nonnegative_restore(K, beta + rho)
            delta = float(np.abs(mu_new - mu).max(initial=0.0))
            mu = mu_new
            if delta <= h.ncsvr_tol:
                converged = True
                break
            continue

        rho_prob = QpProblem(np.diag(lam_r), V_r.T @ (K @ beta),
                             np.full(r, -np.inf), np.full(r, np.inf),
                             ineq=(V_r * lam_r, np.zeros(n)))
        sol_r = _solve(rho_prob, h, f"ncsvr rho step (outer {outer})")
        rho = V_r @ sol_r.x
        kkt_res = max(sol_a.kkt_residual, sol_r.kkt_residual)
        history.append(_alternating_objective(K, g, eps, a, a_star, rho))

        mu_new = _nonnegative_restore(K, beta + rho)
        delta = float(np.abs(mu_new - mu).max(initial=0.0))
        mu = mu_new
        if delta <= h.ncsvr_tol:
            converged = True
            break

    clip_mass = float(np.maximum(-(beta + rho), 0.0).sum())
    M = _combine(pairs, mu)
    report = FitReport(dual_objective=history[-1], outer_iterations=outer,
                       kkt_residual=kkt_res, clip_mass=clip_mass,
                       converged=converged, alternating_objectives=history,
                       wall_time=time.perf_counter() - t0)
    return MetricModel(M, 0.0, mu, Method.NCSVR, report)


_FITTERS = {Method.SVR: fit_svr, Method.PCSVR: fit_pcsvr, Method.NCSVR: fit_ncsvr}


def fit(data: Dataset, method: Method | str, h: Hyperparams = Hyperparams()) -> MetricModel:
    """Standardize, generate pairs, and train the requested learner.

    The returned model carries the standardization statistics, so its
    predictors accept raw-space inputs.
    """
    if isinstance(method, str):
        try:
            method = Method(method)
        except ValueError:
            raise ParameterError(f"unknown method {method!r}; "
                                 f"choose from svr, pcsvr, ncsvr") from None
    Xs, mean, std = standardize(data.features)
    std_data = Dataset(Xs, data.labels, data.task)
    k = min(h.pairs_k, data.n_samples - 1)
    pairs = generate_pairs(std_data, k)
    model = _FITTERS[method](pairs, h)
    model.feature_mean = mean
    model.feature_std = std
    return model

"""Dense convex QP with box bounds, one optional equality and optional
linear inequalities, plus a KKT certificate checker.

minimize    0.5 x'Qx + c'x
subject to  lower <= x <= upper, w'x = r (optional), Gx >= h (optional)

The interior-point solve is delegated to cvxopt; the returned point is
clipped to the box and polished by re-solving the detected active set, so
bounds hold by construction and objectives are accurate to ~1e-9.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import cvxopt
from scipy.optimize import lsq_linear

cvxopt.solvers.options["show_progress"] = False


class QpStatus(enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


class QpError(RuntimeError):
    pass


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    eq: tuple[np.ndarray, float] | None = None       # w'x = r
    ineq: tuple[np.ndarray, np.ndarray] | None = None  # Gx >= h

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.shape[0]
        if Q.shape != (n, n):
            raise QpError(f"Q shape {Q.shape} does not match c length {n}")
        scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
        if np.abs(Q - Q.T).max(initial=0.0) > 1e-10 * scale:
            raise QpError("Q is not symmetric")
        lo = np.asarray(self.lower, dtype=float).ravel()
        up = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape[0] != n or up.shape[0] != n:
            raise QpError("bound lengths do not match problem size")
        if np.any(lo > up):
            raise QpError("lower bound exceeds upper bound")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if self.eq is not None:
            w, r = self.eq
            w = np.asarray(w, dtype=float).ravel()
            if w.shape[0] != n:
                raise QpError("equality vector length mismatch")
            object.__setattr__(self, "eq", (w, float(r)))
        if self.ineq is not None:
            G, h = self.ineq
            G = np.atleast_2d(np.asarray(G, dtype=float))
            h = np.asarray(h, dtype=float).ravel()
            if G.shape != (h.shape[0], n):
                raise QpError("inequality shapes mismatch")
            object.__setattr__(self, "ineq", (G, h))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Q @ x + self.c @ x)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: QpStatus


def _jitter(Q: np.ndarray) -> np.ndarray:
    n = Q.shape[0]
    delta = 1e-10 * max(1.0, float(np.trace(Q)) / n)
    return Q + delta * np.eye(n)


def _cvx_matrices(p: QpProblem, Q: np.ndarray):
    """Stack box and general inequalities into cvxopt's Gx <= h form."""
    n = p.n
    rows, rhs = [], []
    for i in range(n):
        if np.isfinite(p.upper[i]):
            e = np.zeros(n)
            e[i] = 1.0
            rows.append(e)
            rhs.append(p.upper[i])
        if np.isfinite(p.lower[i]):
            e = np.zeros(n)
            e[i] = -1.0
            rows.append(e)
            rhs.append(-p.lower[i])
    if p.ineq is not None:
        G, h = p.ineq
        rows.extend(-G)
        rhs.extend(-h)
    Gm = cvxopt.matrix(np.asarray(rows, dtype=float)) if rows else None
    hm = cvxopt.matrix(np.asarray(rhs, dtype=float)) if rows else None
    A = b = None
    if p.eq is not None:
        w, r = p.eq
        A = cvxopt.matrix(w.reshape(1, -1))
        b = cvxopt.matrix([r])
    return cvxopt.matrix(Q), cvxopt.matrix(p.c), Gm, hm, A, b


def _polish(p: QpProblem, x: np.ndarray, tol: float) -> np.ndarray:
    """Refine by solving the KKT system of the detected active set.

    Free variables and the multipliers of active constraints are the
    unknowns; the refined point is kept only if it is feasible and does
    not worsen the objective.
    """
    n = p.n
    scale = tol * 10.0 * (1.0 + float(np.abs(x).max(initial=0.0)))
    at_lo = np.isfinite(p.lower) & (x - p.lower <= scale)
    at_up = np.isfinite(p.upper) & (p.upper - x <= scale) & ~at_lo
    free = ~(at_lo | at_up)
    act_rows = []
    if p.eq is not None:
        act_rows.append((p.eq[0], p.eq[1]))
    if p.ineq is not None:
        G, h = p.ineq
        slack = G @ x - h
        for i in range(G.shape[0]):
            if slack[i] <= scale * (1.0 + abs(h[i])):
                act_rows.append((G[i], h[i]))

    nf = int(free.sum())
    na = len(act_rows)
    xz = x.copy()
    xz[at_lo] = p.lower[at_lo]
    xz[at_up] = p.upper[at_up]
    if nf + na == 0:
        return xz
    A = np.zeros((nf + na, nf + na))
    rhs = np.zeros(nf + na)
    Qff = p.Q[np.ix_(free, free)]
    A[:nf, :nf] = Qff
    rhs[:nf] = -(p.c[free] + p.Q[np.ix_(free, ~free)] @ xz[~free])
    for j, (w, r) in enumerate(act_rows):
        A[:nf, nf + j] = w[free]
        A[nf + j, :nf] = w[free]
        rhs[nf + j] = r - w[~free] @ xz[~free]
    try:
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return xz
    cand = xz.copy()
    cand[free] = sol[:nf]
    feas_tol = tol * (1.0 + float(np.abs(cand).max(initial=0.0)))
    if np.any(cand < p.lower - feas_tol) or np.any(cand > p.upper + feas_tol):
        return xz
    if p.eq is not None and abs(p.eq[0] @ cand - p.eq[1]) > feas_tol * (1 + abs(p.eq[1])):
        return xz
    if p.ineq is not None:
        G, h = p.ineq
        if np.any(G @ cand < h - feas_tol * (1.0 + np.abs(h))):
            return xz
    cand = np.clip(cand, p.lower, p.upper)
    if p.objective(cand) <= p.objective(xz) + tol:
        return cand
    return xz


def solve_qp(p: QpProblem, tol: float = 1e-8, max_iter: int = 10_000) -> QpSolution:
    """Solve a QpProblem; deterministic for identical inputs."""
    Q = _jitter(p.Q)
    Qm, cm, Gm, hm, A, b = _cvx_matrices(p, Q)
    opts = {
        "show_progress": False,
        "maxiters": int(min(max_iter, 200)),
        "abstol": min(tol, 1e-9),
        "reltol": min(tol, 1e-9),
        "feastol": min(tol, 1e-9),
    }
    try:
        res = cvxopt.solvers.qp(Qm, cm, Gm, hm, A, b, options=opts)
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        raise QpError(f"QP solve failed: {exc}") from exc

    status = res["status"]
    iters = int(res.get("iterations", 0))
    if status in ("primal infeasible", "dual infeasible"):
        x = np.clip(np.zeros(p.n), p.lower, p.upper)
        return QpSolution(x, p.objective(x), np.inf, iters, QpStatus.INFEASIBLE)

    x = np.asarray(res["x"]).ravel()
    x = np.clip(x, p.lower, p.upper)
    x = _polish(p, x, tol)
    x = np.clip(x, p.lower, p.upper)
    ok, residual = check_kkt(p, x, tol)
    if status == "optimal" or ok:
        st = QpStatus.OPTIMAL if ok or residual <= tol * 100 else QpStatus.MAX_ITERATIONS
    else:
        st = QpStatus.MAX_ITERATIONS
    return QpSolution(x, p.objective(x), residual, iters, st)


def check_kkt(p: QpProblem, x: np.ndarray, tol: float = 1e-8):
    """Verify the KKT conditions at x.

    Multipliers for the active constraints are recovered by least squares;
    returns (passed, residual) where residual is the worst violation among
    stationarity, feasibility, dual feasibility and complementary slackness.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != p.n:
        raise QpError("point length does not match problem size")
    n = p.n
    grad = p.Q @ x + p.c
    scale_x = tol * (1.0 + float(np.abs(x).max(initial=0.0)))

    # feasibility
    feas = 0.0
    feas = max(feas, float(np.max(p.lower - x, initial=0.0)))
    feas = max(feas, float(np.max(x - p.upper, initial=0.0)))
    if p.eq is not None:
        feas = max(feas, abs(p.eq[0] @ x - p.eq[1]))
    if p.ineq is not None:
        G, h = p.ineq
        feas = max(feas, float(np.max(h - G @ x, initial=0.0)))

    at_lo = np.isfinite(p.lower) & (x - p.lower <= scale_x)
    at_up = np.isfinite(p.upper) & (p.upper - x <= scale_x) & ~at_lo
    free = ~(at_lo | at_up)

    # recover equality/inequality multipliers from the bound-free stationarity
    # rows (bound multipliers absorb the rest in closed form below)
    cols, kinds = [], []
    if p.eq is not None:
        cols.append(p.eq[0])
        kinds.append("eq")
    if p.ineq is not None:
        G, h = p.ineq
        for i in range(G.shape[0]):
            if G[i] @ x - h[i] <= scale_x * (1.0 + abs(h[i])):
                cols.append(G[i])
                kinds.append("ineq")
    resid = grad
    if cols and free.any():
        Amat = np.stack(cols, axis=1)
        # constraints with no component on the free variables get a zero
        # multiplier; keeping them would make the least-squares system rank
        # deficient
        keep = np.linalg.norm(Amat[free], axis=0) > 1e-12
        if keep.any():
            Ak = Amat[:, keep]
            lo = np.asarray([-np.inf if k == "eq" else 0.0
                             for k, kp in zip(kinds, keep) if kp])
            # scipy's trust-region iteration trips benign inf*0 warnings when
            # multiplier bounds are infinite
            with np.errstate(invalid="ignore", over="ignore"):
                fit = lsq_linear(Ak[free], grad[free],
                                 bounds=(lo, np.full(int(keep.sum()), np.inf)))
            resid = grad - Ak @ fit.x
    # stationarity must vanish on free components; at an active lower bound the
    # residual is the (nonnegative) bound multiplier, at an upper bound its negation
    stat = float(np.abs(resid[free]).max(initial=0.0))
    dual = max(float(np.max(-resid[at_lo], initial=0.0)),
               float(np.max(resid[at_up], initial=0.0)))

    stat_tol = tol * (1.0 + float(np.abs(p.c).max(initial=0.0)))
    residual = max(feas, stat, dual)
    passed = (stat <= stat_tol) and (feas <= scale_x) and (dual <= stat_tol)
    return passed, residual

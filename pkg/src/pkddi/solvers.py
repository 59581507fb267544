"""Convex solvers for the two margin classifiers.

Both solve the stated primal objectives with an unpenalized bias:

    logistic:  0.5 ||w||^2 + c * sum log(1 + exp(-y (Xw + b)))
    svm:       0.5 ||w||^2 + c * sum max(0, 1 - y (Xw + b))

The logistic objective is smooth and goes through L-BFGS; the SVM is
solved in the dual (box constraints plus one equality from the free bias)
with maximal-violating-pair SMO over a cached Gram matrix, stopping on the
exact duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit

try:  # the SMO inner loop is hot; numba removes the per-step dispatch cost
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

__all__ = [
    "SolverResult",
    "logreg_objective",
    "svm_objective",
    "train_logreg",
    "train_linear_svm",
    "gram_matrix",
]


@dataclass
class SolverResult:
    w: np.ndarray
    b: float
    converged: bool
    iterations: int
    note: str = ""
    alpha: np.ndarray | None = None  # SVM dual variables, for warm starts


def _margins(X, y, w, b):
    return y * (np.asarray(X @ w).ravel() + b)


def logreg_objective(X, y, c: float, w: np.ndarray, b: float) -> float:
    z = _margins(X, y, w, b)
    return 0.5 * float(w @ w) + c * float(np.logaddexp(0.0, -z).sum())


def svm_objective(X, y, c: float, w: np.ndarray, b: float) -> float:
    z = _margins(X, y, w, b)
    return 0.5 * float(w @ w) + c * float(np.maximum(0.0, 1.0 - z).sum())


def train_logreg(
    X,
    y: np.ndarray,
    c: float,
    *,
    grad_tol: float = 1e-6,
    max_iter: int = 2000,
    warm_start: tuple[np.ndarray, float] | None = None,
) -> SolverResult:
    """L2-regularized logistic regression via L-BFGS on [w, b]."""
    if c <= 0:
        raise ValueError("regularization parameter c must be positive")
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape

    def value_grad(theta):
        w, b = theta[:-1], theta[-1]
        z = _margins(X, y, w, b)
        value = 0.5 * w @ w + c * np.logaddexp(0.0, -z).sum()
        coef = -c * y * expit(-z)
        grad_w = w + np.asarray(X.T @ coef).ravel()
        grad_b = coef.sum()
        return value, np.concatenate([grad_w, [grad_b]])

    x0 = np.zeros(d + 1)
    if warm_start is not None:
        x0[:-1], x0[-1] = warm_start
    res = minimize(
        value_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "maxcor": 20, "ftol": 1e-14, "gtol": 1e-9},
    )
    _, grad = value_grad(res.x)
    gnorm = float(np.linalg.norm(grad))
    converged = gnorm <= grad_tol
    note = "" if converged else (
        f"logreg stopped with gradient norm {gnorm:.2e} after {res.nit} iterations"
    )
    return SolverResult(
        w=res.x[:-1], b=float(res.x[-1]), converged=converged,
        iterations=int(res.nit), note=note,
    )


def gram_matrix(X) -> np.ndarray:
    if sp.issparse(X):
        return (X @ X.T).toarray()
    X = np.asarray(X, dtype=np.float64)
    return X @ X.T


def _optimal_bias(u: np.ndarray, y: np.ndarray) -> float:
    """Bias minimizing the hinge sum for fixed w (u = Xw); for a flat
    minimum, the midpoint of the optimal interval.

    The hinge total is piecewise linear in b with breakpoints y_t - u_t:
    positive-class terms contribute (b_t - b)+ and negative-class terms
    (b - b_t)+, so sorted prefix/suffix sums evaluate every breakpoint in
    O(n log n).
    """
    b_pts = y - u
    order = np.argsort(b_pts, kind="stable")
    bs = b_pts[order]
    pos = y[order] > 0
    pos_vals = np.where(pos, bs, 0.0)
    neg_vals = np.where(~pos, bs, 0.0)
    pos_cnt_suffix = np.cumsum(pos[::-1])[::-1]
    pos_sum_suffix = np.cumsum(pos_vals[::-1])[::-1]
    neg_cnt_prefix = np.cumsum(~pos)
    neg_sum_prefix = np.cumsum(neg_vals)
    # totals at b = bs[k]: positive terms with b_t >= b, negative with b_t <= b
    totals = (pos_sum_suffix - bs * pos_cnt_suffix) + (
        bs * neg_cnt_prefix - neg_sum_prefix
    )
    best = totals.min()
    optimal = bs[totals <= best + 1e-12 * max(1.0, abs(best))]
    return float((optimal[0] + optimal[-1]) / 2.0)


# chunk status codes shared by both SMO kernels
_SMO_BUDGET = 0  # step budget exhausted, more progress possible
_SMO_KKT = 1  # maximal violation below tolerance
_SMO_STALLED = 2  # no feasible pair / zero step

_SMO_TAU = 1e-12
_SMO_KKT_TOL = 1e-9


def _smo_chunk_vec(K, diag_K, y, alpha, gy, c, bound_eps, max_steps):
    """Vectorized fallback kernel; same semantics as the jitted version."""
    pos = y > 0
    steps = 0
    while steps < max_steps:
        at_upper = alpha >= c - bound_eps
        at_lower = alpha <= bound_eps
        up = (pos & ~at_upper) | (~pos & ~at_lower)
        low = (~pos & ~at_upper) | (pos & ~at_lower)
        if not up.any() or not low.any():
            return steps, _SMO_STALLED
        i = int(np.argmax(np.where(up, gy, -np.inf)))
        violation = gy[i] - float(np.where(low, gy, np.inf).min())
        if violation < _SMO_KKT_TOL:
            return steps, _SMO_KKT
        Ki = K[i]
        diff = gy[i] - gy
        eta_vec = np.maximum(diag_K[i] + diag_K - 2.0 * Ki, _SMO_TAU)
        gain = np.where(low & (diff > 0), diff * diff / eta_vec, -np.inf)
        j = int(np.argmax(gain))
        if not np.isfinite(gain[j]):
            return steps, _SMO_STALLED
        step = diff[j] / eta_vec[j]
        hi_i = c - alpha[i] if y[i] > 0 else alpha[i]
        hi_j = alpha[j] if y[j] > 0 else c - alpha[j]
        step = min(step, hi_i, hi_j)
        if step <= 0:
            return steps, _SMO_STALLED
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        gy += step * (K[j] - Ki)
        steps += 1
    return steps, _SMO_BUDGET


def _smo_chunk_loops(K, diag_K, y, alpha, gy, c, bound_eps, max_steps):
    n = len(y)
    steps = 0
    while steps < max_steps:
        best_gy = -np.inf
        i = -1
        min_low = np.inf
        for t in range(n):
            a = alpha[t]
            at_up = a >= c - bound_eps
            at_lo = a <= bound_eps
            if y[t] > 0:
                in_up = not at_up
                in_low = not at_lo
            else:
                in_up = not at_lo
                in_low = not at_up
            g = gy[t]
            if in_up and g > best_gy:
                best_gy = g
                i = t
            if in_low and g < min_low:
                min_low = g
        if i < 0 or min_low == np.inf:
            return steps, _SMO_STALLED
        if best_gy - min_low < _SMO_KKT_TOL:
            return steps, _SMO_KKT
        gyi = gy[i]
        dKi = diag_K[i]
        best_gain = -1.0
        j = -1
        for t in range(n):
            a = alpha[t]
            if y[t] > 0:
                in_low = not (a <= bound_eps)
            else:
                in_low = not (a >= c - bound_eps)
            if not in_low:
                continue
            diff = gyi - gy[t]
            if diff <= 0:
                continue
            eta = dKi + diag_K[t] - 2.0 * K[i, t]
            if eta < _SMO_TAU:
                eta = _SMO_TAU
            gain = diff * diff / eta
            if gain > best_gain:
                best_gain = gain
                j = t
        if j < 0:
            return steps, _SMO_STALLED
        eta_j = dKi + diag_K[j] - 2.0 * K[i, j]
        if eta_j < _SMO_TAU:
            eta_j = _SMO_TAU
        step = (gyi - gy[j]) / eta_j
        hi_i = c - alpha[i] if y[i] > 0 else alpha[i]
        hi_j = alpha[j] if y[j] > 0 else c - alpha[j]
        if step > hi_i:
            step = hi_i
        if step > hi_j:
            step = hi_j
        if step <= 0:
            return steps, _SMO_STALLED
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        for t in range(n):
            gy[t] += step * (K[j, t] - K[i, t])
        steps += 1
    return steps, _SMO_BUDGET


if _HAVE_NUMBA:
    _smo_chunk = _njit(cache=True)(_smo_chunk_loops)
else:  # pragma: no cover - exercised only without numba
    _smo_chunk = _smo_chunk_vec


def train_linear_svm(
    X,
    y: np.ndarray,
    c: float,
    *,
    gap_tol: float = 1e-6,
    max_iter: int | None = None,
    K: np.ndarray | None = None,
    alpha0: np.ndarray | None = None,
) -> SolverResult:
    """L1-loss linear SVM via SMO on the dual.

    Working pairs come from the second-order selection rule (largest
    estimated decrease against the most violating index).  The loop runs
    in chunks; after each chunk the exact duality gap, computed with the
    hinge-optimal bias, decides termination.  ``K`` lets callers reuse the
    Gram matrix across a regularization grid; ``alpha0`` warm-starts from
    a feasible dual point (scaling a previous solution by c_new/c_old
    keeps both the box and the equality constraint satisfied).
    """
    if c <= 0:
        raise ValueError("regularization parameter c must be positive")
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    if K is None:
        K = gram_matrix(X)
    K = np.ascontiguousarray(K)
    if max_iter is None:
        max_iter = max(20000, 200 * n)

    alpha = (
        np.zeros(n) if alpha0 is None
        else np.clip(np.asarray(alpha0, dtype=np.float64), 0.0, c)
    )
    # gy = -y * grad(dual) = y - K (y*alpha); pair updates keep it current
    gy = y - (K @ (y * alpha) if alpha.any() else np.zeros(n))
    diag_K = np.ascontiguousarray(np.diag(K))
    bound_eps = 1e-12 * c

    def duality_gap() -> tuple[float, float, float, np.ndarray]:
        coef = alpha * y
        w = np.asarray(X.T @ coef).ravel()
        u = np.asarray(X @ w).ravel()
        dual = alpha.sum() - 0.5 * float(coef @ u)
        b = _optimal_bias(u, y)
        primal = 0.5 * float(w @ w) + c * float(
            np.maximum(0.0, 1.0 - y * (u + b)).sum()
        )
        return primal - dual, primal, b, w

    converged = False
    it = 0
    note = ""
    chunk = 512
    while True:
        gap, primal, _, _ = duality_gap()
        if gap <= gap_tol * max(abs(primal), 1e-12):
            converged = True
            break
        if it >= max_iter:
            break
        steps, status = _smo_chunk(
            K, diag_K, y, alpha, gy, c, bound_eps, min(chunk, max_iter - it)
        )
        it += steps
        if status in (_SMO_KKT, _SMO_STALLED):
            gap, primal, _, _ = duality_gap()
            converged = gap <= gap_tol * max(abs(primal), 1e-12)
            break

    gap, primal, b, w = duality_gap()
    if not converged:
        converged = gap <= gap_tol * max(abs(primal), 1e-12)
    if not converged:
        note = (
            f"svm stopped with duality gap {gap:.2e} "
            f"(primal {primal:.6g}) after {it} iterations"
        )
    return SolverResult(
        w=w, b=b, converged=converged, iterations=it, note=note, alpha=alpha
    )

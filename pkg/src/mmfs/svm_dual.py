"""Kernel SVM dual: working-pair solver, bias, scores and KKT multipliers.

The dual is solved in its minimisation form

    min  1/2 a'Ga - e'a   s.t.  y'a = 0,  0 <= a <= C

with G = diag(y) K diag(y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .kernel import GramMatrices, KernelParams, cross_kernel

TAU = 1e-12


@dataclass(frozen=True)
class SvmHyper:
    C: float

    def __post_init__(self):
        if not (math.isfinite(self.C) and self.C > 0):
            raise ValueError("C must be positive and finite")


@dataclass
class DualSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    support_indices: np.ndarray
    converged: bool = True
    kkt_violation: float = 0.0
    n_iter: int = 0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "bias": self.bias,
            "objective": self.objective,
            "support_indices": self.support_indices.tolist(),
            "converged": self.converged,
            "kkt_violation": self.kkt_violation,
            "n_iter": self.n_iter,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DualSolution":
        return cls(
            alpha=np.asarray(d["alpha"], dtype=float),
            bias=float(d["bias"]),
            objective=float(d["objective"]),
            support_indices=np.asarray(d["support_indices"], dtype=np.int64),
            converged=bool(d["converged"]),
            kkt_violation=float(d["kkt_violation"]),
            n_iter=int(d["n_iter"]),
        )


@dataclass
class KktMultipliers:
    nu: float
    lambda0: np.ndarray
    lambdaC: np.ndarray
    stationarity_residual: float
    flagged: bool = False


@numba.njit(cache=True)
def _smo(Q, y, C, alpha, tol, max_iter):
    """Second-order working-pair exchange (LIBSVM WSS3 selection, no shrinking).

    Updates ``alpha`` in place and returns (iterations, final violation).
    """
    n = Q.shape[0]
    grad = Q @ alpha - 1.0
    it = 0
    gap = 0.0
    while True:
        # i: maximal violator of the upper set
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * grad[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * grad[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0:
                        a = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                        if a <= 0:
                            a = TAU
                        obj = -(b * b) / a
                        if obj <= best:
                            best = obj
                            j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            break
        if it >= max_iter:
            break
        it += 1

        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            grad[t] += Q[t, i] * dai + Q[t, j] * daj
    return it, gap


def _matrix(G) -> np.ndarray:
    return G.G if isinstance(G, GramMatrices) else np.asarray(G, dtype=float)


def dual_objective(G, alpha) -> float:
    Q = _matrix(G)
    return float(alpha.sum() - 0.5 * alpha @ Q @ alpha)


def violation_bounds(Q, y, alpha, C):
    """(m, M): max over the upper set and min over the lower set of -y*grad."""
    grad = Q @ alpha - 1.0
    v = -y * grad
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    m = v[up].max() if up.any() else -np.inf
    M = v[low].min() if low.any() else np.inf
    return m, M, v


def _bias(Q, y, alpha, C, eps_sv) -> float:
    if not np.any(alpha > 0):
        return 1.0 if np.sum(y > 0) >= np.sum(y < 0) else -1.0
    m, M, v = violation_bounds(Q, y, alpha, C)
    free = (alpha > eps_sv) & (alpha < C - eps_sv)
    if free.any():
        return float(v[free].mean())
    if math.isfinite(m) and math.isfinite(M):
        return float(0.5 * (m + M))
    return float(m if math.isfinite(m) else M)


def solve_dual(G, y, hyper: SvmHyper, tol: float = 1e-8, alpha0=None, max_iter: int = 10**7) -> DualSolution:
    """Solve the kernel SVM dual for fixed Gram matrix ``G``.

    ``alpha0`` (feasible for the box and the equality constraint) warm-starts
    the solver; otherwise it starts from zero. Hitting ``max_iter`` returns the
    last iterate with ``converged=False``.
    """
    Q = np.ascontiguousarray(_matrix(G), dtype=float)
    y = np.ascontiguousarray(np.asarray(y, dtype=float).ravel())
    n = len(y)
    if Q.shape != (n, n):
        raise ValueError("Gram matrix does not match the labels")
    if not np.all(np.isfinite(Q)):
        raise ValueError("non-finite entries in the Gram matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    C = float(hyper.C)
    if alpha0 is None:
        alpha = np.zeros(n)
    else:
        alpha = np.array(alpha0, dtype=float)
        if alpha.shape != (n,) or np.any(alpha < 0) or np.any(alpha > C):
            raise ValueError("warm start outside the box")
        if abs(alpha @ y) > 1e-8 * max(1.0, C * n):
            raise ValueError("warm start violates sum(alpha*y) = 0")
    n_iter, gap = _smo(Q, y, C, alpha, float(tol), int(max_iter))
    converged = bool(gap < tol) or not np.isfinite(gap)
    eps_sv = 1e-8 * C
    bias = _bias(Q, y, alpha, C, eps_sv)
    return DualSolution(
        alpha=alpha,
        bias=bias,
        objective=dual_objective(Q, alpha),
        support_indices=np.flatnonzero(alpha > eps_sv),
        converged=converged,
        kkt_violation=float(gap) if np.isfinite(gap) else 0.0,
        n_iter=int(n_iter),
    )


def decision_values(X_train, y_train, sol: DualSolution, gamma, X) -> np.ndarray:
    """Scores sum_i alpha_i y_i K(x_i, x) for every row of ``X`` (bias excluded)."""
    sv = sol.support_indices
    if len(sv) == 0:
        return np.zeros(np.atleast_2d(X).shape[0])
    K = cross_kernel(X, np.asarray(X_train)[sv], gamma)
    return K @ (sol.alpha[sv] * np.asarray(y_train)[sv])


def score(ds_train, sol: DualSolution, params: KernelParams, x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != ds_train.n_features:
        raise ValueError("dimension mismatch")
    return float(decision_values(ds_train.X, ds_train.y, sol, params.gamma, x[None, :])[0])


def predict_labels(scores, bias: float) -> np.ndarray:
    """+1 where score + bias >= 0, else -1."""
    return np.where(np.asarray(scores) + bias >= 0, 1.0, -1.0)


def recover_multipliers(G, y, sol: DualSolution, hyper: SvmHyper, eps: float | None = None) -> KktMultipliers:
    """Closed-form multipliers from e - G a - nu y + l0 - lC = 0.

    nu is the bias; l0 picks up the negative residual where alpha sits at 0 and
    lC the positive residual where alpha sits at C.
    """
    Q = _matrix(G)
    y = np.asarray(y, dtype=float)
    C = hyper.C
    eps = 1e-8 * C if eps is None else eps
    a = sol.alpha
    nu = sol.bias
    r = 1.0 - Q @ a - nu * y
    lower = a <= eps
    upper = a >= C - eps
    lam0 = np.where(lower, np.maximum(0.0, -r), 0.0)
    lamC = np.where(upper & ~lower, np.maximum(0.0, r), 0.0)
    res = float(np.max(np.abs(r + lam0 - lamC))) if len(r) else 0.0
    return KktMultipliers(nu=nu, lambda0=lam0, lambdaC=lamC, stationarity_residual=res, flagged=res > 1e-4)


def recover_slacks(G, y, sol: DualSolution) -> np.ndarray:
    """Hinge slacks max(0, 1 - y_i (score_i + b)) at the training points."""
    Q = _matrix(G)
    y = np.asarray(y, dtype=float)
    # y_i * score_i = (G a)_i
    margins = Q @ sol.alpha + y * sol.bias
    return np.maximum(0.0, 1.0 - margins)


def primal_objective(G, y, sol: DualSolution, hyper: SvmHyper) -> float:
    Q = _matrix(G)
    xi = recover_slacks(Q, y, sol)
    return float(0.5 * sol.alpha @ Q @ sol.alpha + hyper.C * xi.sum())

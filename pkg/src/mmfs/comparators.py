"""Baselines: the isotropic kernel SVM (no feature selection) and the linear
l1-regularised SVM

    min_{w, b}  |w|_1 + C sum_i max(0, 1 - y_i (w'x_i + b)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from threadpoolctl import threadpool_limits

from .data import Dataset, FoldPlan, derive_seed, make_folds
from .kernel import KernelParams, gram
from .pipeline import (FINAL_TOL, INNER_SPLIT_KEY, GridSpec, InitialChoice, _map, evaluate_accuracy,
                       initial_solution, run_fold, split_fold)
from .svm_dual import SvmHyper, predict_labels, solve_dual

L1_THRESHOLD = 1e-2


@dataclass
class LinearL1Solution:
    w: np.ndarray
    b: float
    objective: float
    converged: bool = True
    gap: float = 0.0
    n_iter: int = 0
    dual: np.ndarray | None = None

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return predict_labels(self.decision(X), 0.0)

    def selected(self, threshold: float = L1_THRESHOLD) -> np.ndarray:
        return np.flatnonzero(np.abs(self.w) > threshold)


def l1_objective(X, y, w, b, C: float) -> float:
    margins = y * (X @ w + b)
    return float(np.abs(w).sum() + C * np.maximum(0.0, 1.0 - margins).sum())


def _dual_value(X, y, p) -> float:
    """Lower bound from a multiplier p in [-C, 0]^n, after shrinking it onto
    y'p = 0 and |X' diag(y) p|_inf <= 1 (both keep p in the box)."""
    p = p.copy()
    pos, neg = y > 0, y < 0
    P, N = p[pos].sum(), p[neg].sum()
    if P < N and P < 0:
        p[pos] *= N / P
    elif N < P and N < 0:
        p[neg] *= P / N
    v = np.max(np.abs(X.T @ (y * p))) if X.shape[1] else 0.0
    if v > 1.0:
        p /= v
    return float(-p.sum())


def solve_l1_svm(ds: Dataset, C: float, tol: float = 1e-6, method: str = "lp", **kw) -> LinearL1Solution:
    """Minimise |w|_1 + C sum(hinge).

    ``method="lp"`` solves the equivalent linear program with HiGHS;
    ``method="pdhg"`` runs the first-order iteration ``l1_svm_pdhg`` (extra
    keywords go to it).
    """
    if not (math.isfinite(C) and C > 0):
        raise ValueError("C must be positive and finite")
    if method == "pdhg":
        return l1_svm_pdhg(ds, C, tol, **kw)
    if method != "lp":
        raise ValueError(f"unknown method {method!r}")
    return l1_svm_lp(ds, C)


def l1_svm_lp(ds: Dataset, C: float) -> LinearL1Solution:
    """LP over (w+, w-, b, xi): min e'(w+ + w-) + C e'xi with
    y_i (x_i'(w+ - w-) + b) + xi_i >= 1 and w+, w-, xi >= 0."""
    X, y = ds.X, ds.y
    n, m = X.shape
    c = np.concatenate([np.ones(2 * m), [0.0], np.full(n, C)])
    yX = y[:, None] * X
    A = np.hstack([-yX, yX, -y[:, None], -np.eye(n)])
    bounds = [(0, None)] * (2 * m) + [(None, None)] + [(0, None)] * n
    res = linprog(c, A_ub=A, b_ub=-np.ones(n), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    w = res.x[:m] - res.x[m:2 * m]
    b = float(res.x[2 * m])
    return LinearL1Solution(w=w, b=b, objective=l1_objective(X, y, w, b, C), converged=True,
                            gap=0.0, n_iter=int(getattr(res, "nit", 0)), dual=np.asarray(res.ineqlin.marginals))


def l1_svm_pdhg(ds: Dataset, C: float, tol: float = 1e-6, max_iter: int = 200_000,
                start: "LinearL1Solution | None" = None, check_every: int = 50) -> LinearL1Solution:
    """First-order primal-dual iteration with diagonal step preconditioning.

    Writing A = diag(y)[X, e], the problem is min g(u) + F(Au) with g the l1
    norm on w (b free) and F the scaled hinge; each step applies the proximal
    map of g and of the conjugate of F. The best primal iterate is reported,
    so reported objectives never increase, and the run stops once its
    objective is within tol * (1 + |objective|) of a dual lower bound.
    ``start`` (a previous solution, possibly for another C) warm-starts it.
    """
    X, y = ds.X, ds.y
    n, m = X.shape
    A = y[:, None] * np.hstack([X, np.ones((n, 1))])
    absA = np.abs(A)
    col = absA.sum(axis=0)
    row = absA.sum(axis=1)
    tau = 1.0 / np.where(col > 0, col, 1.0)
    sigma = 1.0 / np.where(row > 0, row, 1.0)
    if start is None:
        u = np.zeros(m + 1)
        p = np.zeros(n)
    else:
        u = np.concatenate([start.w, [start.b]])
        p = np.clip(start.dual, -C, 0.0) if start.dual is not None else np.zeros(n)
    Au = A @ u

    def obj(uu, Auu):
        return float(np.abs(uu[:m]).sum() + C * np.maximum(0.0, 1.0 - Auu).sum())

    best_u, best_f = u.copy(), obj(u, Au)
    best_p, best_d = p.copy(), -np.inf
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        v = u - tau * (A.T @ p)
        u_new = v.copy()
        u_new[:m] = np.sign(v[:m]) * np.maximum(np.abs(v[:m]) - tau[:m], 0.0)
        Au_new = A @ u_new
        q = p + sigma * (2.0 * Au_new - Au)
        p = np.clip(q - sigma, -C, 0.0)
        u, Au = u_new, Au_new
        f = obj(u, Au)
        if f < best_f:
            best_f, best_u = f, u.copy()
        if it % check_every == 0:
            d = _dual_value(X, y, p)
            if d > best_d:
                best_d, best_p = d, p.copy()
            if best_f - best_d <= tol * (1.0 + abs(best_f)):
                converged = True
                break
    return LinearL1Solution(w=best_u[:m].copy(), b=float(best_u[m]), objective=best_f, converged=converged,
                            gap=float(best_f - best_d), n_iter=it, dual=best_p)


def l1_cv_choice(train: Dataset, C_values, inner_k: int = 5, seed: int = 0, fold: int = 0,
) -> tuple[float, float]:
    """C with the best mean validation accuracy on the same inner splits as
    the kernel grid search (ties to the smaller C). Returns (C, accuracy)."""
    plan = make_folds(train.n, inner_k, derive_seed(seed, INNER_SPLIT_KEY, fold), train.y)
    Cs = tuple(C_values)
    acc = np.zeros((inner_k, len(Cs)))
    for f in range(inner_k):
        tr, va = train.subset(plan.train_indices(f)), train.subset(plan.test_indices(f))
        for ci, C in enumerate(Cs):
            sol = solve_l1_svm(tr, C)
            acc[f, ci] = np.mean(sol.predict(va.X) == va.y)
    mean = acc.mean(axis=0)
    ci = int(np.argmax(mean))
    return Cs[ci], float(mean[ci])


@dataclass(frozen=True)
class MethodResult:
    method: str
    fold: int
    accuracy: float
    n_selected: int
    converged: bool = True


def no_fs_fold(trainval: Dataset, test: Dataset, init: InitialChoice) -> MethodResult:
    """Isotropic SVM at the grid-search choice, refit on trainval and scored on test."""
    params = KernelParams(np.full(trainval.n_features, init.gamma))
    sol = solve_dual(gram(trainval, params).G, trainval.y, SvmHyper(init.C), tol=FINAL_TOL)
    return MethodResult("NO-FS", -1, evaluate_accuracy(test, trainval, sol, params), trainval.n_features,
                        sol.converged)


def l1_fold(trainval: Dataset, test: Dataset, C_values, inner_k: int, seed: int, fold: int) -> MethodResult:
    C, _ = l1_cv_choice(trainval, C_values, inner_k, seed, fold)
    sol = solve_l1_svm(trainval, C)
    acc = float(np.mean(sol.predict(test.X) == test.y))
    return MethodResult("L1-SVM", fold, acc, int(len(sol.selected())), sol.converged)


def solve_no_fs(ds: Dataset, grid: GridSpec, folds: FoldPlan, inner_k: int = 5, seed: int = 0,
                paper_scaling: bool = False, inits: dict | None = None) -> list[MethodResult]:
    """Per outer fold: (C*, gamma*) by inner cross-validation, then test accuracy."""
    out = []
    for f in range(folds.k):
        tv, te = split_fold(ds, folds, f, paper_scaling)
        init = inits[f] if inits is not None else initial_solution(tv, grid, inner_k, seed, f)
        r = no_fs_fold(tv, te, init)
        out.append(MethodResult(r.method, f, r.accuracy, r.n_selected, r.converged))
    return out


def _compare_task(args):
    tv, te, grid, C2, inner_k, seed, f, kw = args
    with threadpool_limits(1):
        init = initial_solution(tv, grid, inner_k, seed, f)
        mm = run_fold(tv, te, C2, init=init, inner_k=inner_k, seed=seed, fold=f, **kw)
        nofs = no_fs_fold(tv, te, init)
        l1 = l1_fold(tv, te, grid.C_values, inner_k, seed, f)
    return [MethodResult("MM-FS", f, mm.accuracy, mm.n_selected, mm.converged),
            MethodResult("NO-FS", f, nofs.accuracy, nofs.n_selected, nofs.converged), l1], mm


def compare(ds: Dataset, folds: FoldPlan, grid: GridSpec, C2: float, *, inner_k: int = 5, seed: int = 0,
            paper_scaling: bool = False, nlp: dict | None = None, solve_eq17: bool = False,
            threshold: float = 1e-2, jobs: int = 1):
    """MM-FS at ``C2``, NO-FS and the l1-SVM on identical outer folds.

    Returns (rows ordered by method then fold, MM-FS fold results).
    """
    kw = dict(nlp=nlp, solve_eq17=solve_eq17, threshold=threshold)
    tasks = []
    for f in range(folds.k):
        tv, te = split_fold(ds, folds, f, paper_scaling)
        tasks.append((tv, te, grid, C2, inner_k, seed, f, kw))
    outs = _map(_compare_task, tasks, jobs)
    rows = [r for rs, _ in outs for r in rs]
    order = {"MM-FS": 0, "NO-FS": 1, "L1-SVM": 2}
    rows.sort(key=lambda r: (order[r.method], r.fold))
    return rows, [mm for _, mm in outs]


def write_comparison_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "fold", "accuracy", "n_selected", "converged"])
        for r in rows:
            w.writerow([r.method, r.fold, repr(float(r.accuracy)), r.n_selected, int(r.converged)])

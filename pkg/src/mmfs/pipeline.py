"""Per-fold solving strategy, the C2 frontier sweep, rankings and reports.

One outer fold runs four stages: isotropic grid search by inner
cross-validation, warm start from the SVM at (C*, gamma_init), the local
single-level solve, and a final SVM refit at the returned gamma that is scored
on the held-out fold.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from threadpoolctl import threadpool_limits

from .data import Dataset, FoldPlan, apply_scaling, derive_seed, fit_scaling, make_folds
from .kernel import KernelParams, PairwiseSquares, gram
from .minmax_nlp import MinMaxConfig, MinMaxPoint, selected_features, solve_lower_dual, solve_single_level, warm_start
from .svm_dual import DualSolution, SvmHyper, decision_values, predict_labels, recover_multipliers, solve_dual

log = logging.getLogger(__name__)

DEFAULT_C = (1e-4, 1e-3, 1e-2, 1e-1) + tuple(float(c) for c in range(1, 11)) + (1e2, 1e3, 1e4)
DEFAULT_GAMMA = tuple(10.0 ** k for k in range(-4, 5))
DEFAULT_C2 = (0.01,) + tuple(round(0.1 * k, 1) for k in range(1, 10)) + (0.99,)

# KKT tolerance for the many grid-search solves; the warm-start and refit solves use FINAL_TOL
CV_TOL = 1e-3
FINAL_TOL = 1e-8
INNER_SPLIT_KEY = 0x1A1


def _sorted_tuple(values, name: str, lo: float, hi: float, open_lo: bool) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError(f"{name} grid is empty")
    for v in vals:
        if not math.isfinite(v) or v > hi or v < lo or (open_lo and v <= lo):
            raise ValueError(f"{name} value {v} out of range")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError(f"{name} grid must be strictly ascending")
    return vals


@dataclass(frozen=True)
class GridSpec:
    C_values: tuple = DEFAULT_C
    gamma_values: tuple = DEFAULT_GAMMA
    C2_values: tuple = DEFAULT_C2

    def __post_init__(self):
        object.__setattr__(self, "C_values", _sorted_tuple(self.C_values, "C", 0.0, math.inf, True))
        object.__setattr__(self, "gamma_values", _sorted_tuple(self.gamma_values, "gamma", 0.0, math.inf, True))
        object.__setattr__(self, "C2_values", _sorted_tuple(self.C2_values, "C2", 0.0, 1.0, False))

    def to_dict(self) -> dict:
        return {"C_values": list(self.C_values), "gamma_values": list(self.gamma_values),
                "C2_values": list(self.C2_values)}


@dataclass(frozen=True)
class InitialChoice:
    C: float
    gamma: float
    cv_accuracy: float


def initial_solution(train: Dataset, grid: GridSpec, inner_k: int = 5, seed: int = 0, fold: int = 0,
                     tol: float = CV_TOL) -> InitialChoice:
    """Isotropic (C, gamma) with the best mean validation accuracy over ``inner_k`` splits.

    Ties go to the smaller gamma, then the smaller C. The inner splits are
    stratified and drawn from (seed, fold). Along ascending C the previous
    alpha warm-starts the next solve (it stays feasible as the box grows).
    """
    if inner_k < 2:
        raise ValueError("inner_k must be at least 2")
    Cs, gammas = grid.C_values, grid.gamma_values
    plan = make_folds(train.n, inner_k, derive_seed(seed, INNER_SPLIT_KEY, fold), train.y)
    acc = np.zeros((inner_k, len(gammas), len(Cs)))
    for f in range(inner_k):
        tr, va = plan.train_indices(f), plan.test_indices(f)
        Xtr, ytr = train.X[tr], train.y[tr]
        yva = train.y[va]
        D_tr = cdist(Xtr, Xtr, "sqeuclidean")
        D_va = cdist(train.X[va], Xtr, "sqeuclidean")
        yy = np.outer(ytr, ytr)
        for gi, g in enumerate(gammas):
            G = np.exp(-g * D_tr) * yy
            K_va = np.exp(-g * D_va)
            alpha = None
            for ci, C in enumerate(Cs):
                sol = solve_dual(G, ytr, SvmHyper(C), tol=tol, alpha0=alpha)
                alpha = sol.alpha
                pred = predict_labels(K_va @ (alpha * ytr), sol.bias)
                acc[f, gi, ci] = np.mean(pred == yva)
    mean = acc.mean(axis=0)
    best = (-1.0, 0, 0)
    for gi in range(len(gammas)):
        for ci in range(len(Cs)):
            if mean[gi, ci] > best[0]:
                best = (float(mean[gi, ci]), gi, ci)
    return InitialChoice(C=Cs[best[2]], gamma=gammas[best[1]], cv_accuracy=best[0])


def evaluate_accuracy(test: Dataset, train: Dataset, sol: DualSolution, params: KernelParams) -> float:
    """Fraction of ``test`` whose label matches sign(score + b), with sign(0) = +1."""
    if test.n == 0:
        raise ValueError("empty test set")
    scores = decision_values(train.X, train.y, sol, params.gamma, test.X)
    return float(np.mean(predict_labels(scores, sol.bias) == test.y))


def feature_ranking(gamma) -> np.ndarray:
    """Feature indices by descending gamma, ties by index."""
    gamma = np.asarray(gamma, dtype=float)
    return np.lexsort((np.arange(len(gamma)), -gamma))


@dataclass
class FoldResult:
    fold: int
    C2: float
    C_star: float
    gamma_init: float
    cv_accuracy: float
    point: MinMaxPoint
    refit: DualSolution
    accuracy: float
    ranking: np.ndarray
    n_selected: int

    @property
    def converged(self) -> bool:
        return bool(self.point.converged and self.refit.converged)

    @property
    def norm_gamma(self) -> float:
        return float(np.sum(np.abs(self.point.gamma)))

    def to_dict(self) -> dict:
        return {
            "fold": self.fold, "C2": self.C2, "C_star": self.C_star, "gamma_init": self.gamma_init,
            "cv_accuracy": self.cv_accuracy, "point": self.point.to_dict(), "refit": self.refit.to_dict(),
            "accuracy": self.accuracy, "ranking": self.ranking.tolist(), "n_selected": self.n_selected,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldResult":
        return cls(int(d["fold"]), float(d["C2"]), float(d["C_star"]), float(d["gamma_init"]),
                   float(d["cv_accuracy"]), MinMaxPoint.from_dict(d["point"]), DualSolution.from_dict(d["refit"]),
                   float(d["accuracy"]), np.asarray(d["ranking"], dtype=np.int64), int(d["n_selected"]))


def split_fold(ds: Dataset, plan: FoldPlan, f: int, paper_scaling: bool = False) -> tuple[Dataset, Dataset]:
    """(trainval, test) for outer fold ``f``, scaled to [-1, 1].

    By default the scaling is fitted on trainval only; ``paper_scaling`` fits
    it once on the whole data set instead.
    """
    spec = fit_scaling(ds) if paper_scaling else fit_scaling(ds.subset(plan.train_indices(f)))
    return (apply_scaling(ds.subset(plan.train_indices(f)), spec),
            apply_scaling(ds.subset(plan.test_indices(f)), spec))


def run_fold(trainval: Dataset, test: Dataset, C2: float, grid: GridSpec | None = None, *,
             init: InitialChoice | None = None, inner_k: int = 5, seed: int = 0, fold: int = 0,
             nlp: dict | None = None, solve_eq17: bool = False, threshold: float = 1e-2,
             iterate_log: list | None = None) -> FoldResult:
    """The four stages for one outer fold at trade-off ``C2``.

    ``init`` skips the grid search (it does not depend on C2, so sweeps pass
    it in). ``nlp`` holds MinMaxConfig overrides. ``solve_eq17`` computes the
    warm multipliers by solving the lower-level Lagrangian dual iteratively
    instead of recovering them in closed form.
    """
    if init is None:
        init = initial_solution(trainval, grid or GridSpec(), inner_k, seed, fold)
    C = init.C
    hyper = SvmHyper(C)
    sq = PairwiseSquares(trainval.X)
    gamma0 = np.full(trainval.n_features, init.gamma)
    G0 = gram(trainval, KernelParams(gamma0), sq).G
    sol0 = solve_dual(G0, trainval.y, hyper, tol=FINAL_TOL)
    if solve_eq17:
        a, nu, l0, lC, eq, kr, ok = solve_lower_dual(trainval, gamma0, C, sq)
        if not ok:
            log.warning("fold %d: lower-level dual not solved to tolerance (|h|=%.2g, kkt=%.2g)", fold, eq, kr)
        warm = MinMaxPoint(gamma0, a, nu, l0, lC)
    else:
        mult = recover_multipliers(G0, trainval.y, sol0, hyper)
        if mult.flagged:
            log.warning("fold %d: stationarity residual %.2g at the warm start", fold, mult.stationarity_residual)
        warm = warm_start(gamma0, sol0, mult)
    cfg = MinMaxConfig(C2=C2, C=C, **(nlp or {}))
    pt = solve_single_level(warm, trainval, cfg, sq, iterate_log)
    params = KernelParams(pt.gamma)
    refit = solve_dual(gram(trainval, params, sq).G, trainval.y, hyper, tol=FINAL_TOL)
    acc = evaluate_accuracy(test, trainval, refit, params)
    return FoldResult(fold=fold, C2=float(C2), C_star=C, gamma_init=init.gamma, cv_accuracy=init.cv_accuracy,
                      point=pt, refit=refit, accuracy=acc, ranking=feature_ranking(pt.gamma),
                      n_selected=int(len(selected_features(pt.gamma, threshold))))


@dataclass
class FrontierRecord:
    C2: float
    mean_accuracy: float
    mean_norm_gamma: float
    mean_n_selected: float
    n_flagged: int
    folds: list = field(default_factory=list)


@dataclass
class FrontierReport:
    records: list
    feature_names: tuple
    threshold: float = 1e-2

    def record(self, C2: float) -> FrontierRecord:
        for r in self.records:
            if r.C2 == C2:
                return r
        raise KeyError(C2)

    @property
    def n_flagged(self) -> int:
        return sum(r.n_flagged for r in self.records)


def aggregate(results: Sequence[FoldResult], C2_values, feature_names, threshold: float = 1e-2) -> FrontierReport:
    """Group fold results by C2 (grid order) and fold index."""
    records = []
    for c2 in C2_values:
        rs = sorted((r for r in results if r.C2 == c2), key=lambda r: r.fold)
        if not rs:
            raise ValueError(f"no fold results for C2 = {c2}")
        records.append(FrontierRecord(
            C2=c2,
            mean_accuracy=float(np.mean([r.accuracy for r in rs])),
            mean_norm_gamma=float(np.mean([r.norm_gamma for r in rs])),
            mean_n_selected=float(np.mean([r.n_selected for r in rs])),
            n_flagged=sum(not r.converged for r in rs),
            folds=rs,
        ))
    return FrontierReport(records, tuple(feature_names), threshold)


def _init_task(args):
    trainval, grid, inner_k, seed, f = args
    with threadpool_limits(1):
        return initial_solution(trainval, grid, inner_k, seed, f)


def _fold_task(args):
    trainval, test, c2, init, kw = args
    with threadpool_limits(1):
        return run_fold(trainval, test, c2, init=init, **kw)


def _map(fn, tasks, jobs: int):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def frontier(ds: Dataset, folds: FoldPlan, grid: GridSpec, *, C2_values=None, inner_k: int = 5, seed: int = 0,
             paper_scaling: bool = False, nlp: dict | None = None, solve_eq17: bool = False,
             threshold: float = 1e-2, jobs: int = 1, fold_indices=None) -> FrontierReport:
    """run_fold for every (C2, fold); the grid search runs once per fold.

    Work is distributed over ``jobs`` processes; every task runs with one BLAS
    thread and results are reduced by (C2, fold), so the report does not
    depend on ``jobs``.
    """
    c2s = tuple(grid.C2_values if C2_values is None else (float(c) for c in C2_values))
    if not c2s:
        raise ValueError("empty C2 grid")
    fidx = list(range(folds.k)) if fold_indices is None else [int(f) for f in fold_indices]
    splits = {f: split_fold(ds, folds, f, paper_scaling) for f in fidx}
    inits = _map(_init_task, [(splits[f][0], grid, inner_k, seed, f) for f in fidx], jobs)
    init_of = dict(zip(fidx, inits))
    kw = dict(inner_k=inner_k, seed=seed, nlp=nlp, solve_eq17=solve_eq17, threshold=threshold)
    tasks = [(splits[f][0], splits[f][1], c2, init_of[f], dict(kw, fold=f)) for c2 in c2s for f in fidx]
    results = _map(_fold_task, tasks, jobs)
    return aggregate(results, c2s, ds.feature_names, threshold)


def best_c2_on_test(report: FrontierReport) -> FrontierRecord:
    """The record with the highest mean test accuracy (ties to the smaller C2).

    This selects on the test folds and only mirrors how published tables
    report a single C2; a real choice of C2 needs validation data.
    """
    return max(report.records, key=lambda r: (r.mean_accuracy, -r.C2))


@dataclass
class RankTable:
    C2_values: tuple
    order: list          # per C2: feature indices by mean rank
    mean_rank: list      # per C2: mean 1-based rank of each feature
    mean_gamma: list     # per C2: mean gamma of each feature
    k: int = 5

    def top(self, k: int | None = None) -> np.ndarray:
        """(k x n_C2) matrix of feature indices; column c lists the top k at C2_values[c]."""
        k = self.k if k is None else k
        return np.array([o[:k] for o in self.order]).T


def rank_stability(report: FrontierReport, k: int = 5) -> RankTable:
    """Per C2, features sorted by their rank averaged over folds (ties by index)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    orders, mranks, mgammas = [], [], []
    for rec in report.records:
        m = len(report.feature_names)
        ranks = np.zeros((len(rec.folds), m))
        for i, r in enumerate(rec.folds):
            ranks[i, r.ranking] = np.arange(1, m + 1)
        mr = ranks.mean(axis=0)
        orders.append(np.lexsort((np.arange(m), mr)))
        mranks.append(mr)
        mgammas.append(np.mean([r.point.gamma for r in rec.folds], axis=0))
    return RankTable(tuple(r.C2 for r in report.records), orders, mranks, mgammas, k)


def correlation_matrix(ds: Dataset) -> np.ndarray:
    """Pearson correlations between features; a constant feature correlates 0
    with the others and 1 with itself."""
    if ds.n < 2:
        raise ValueError("need at least 2 individuals")
    Z = ds.X - ds.X.mean(axis=0)
    sd = np.sqrt(np.einsum("ij,ij->j", Z, Z))
    const = sd == 0
    Z = Z / np.where(const, 1.0, sd)
    Z[:, const] = 0.0
    R = np.clip(Z.T @ Z, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return R


# csv output ----------------------------------------------------------------

def _num(v) -> str:
    return repr(float(v))


def write_frontier_csv(report: FrontierReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["C2", "fold", "C_star", "gamma_init", "norm_gamma", "n_selected", "acc_test", "converged"])
        for rec in report.records:
            for r in rec.folds:
                w.writerow([_num(rec.C2), r.fold, _num(r.C_star), _num(r.gamma_init), _num(r.norm_gamma),
                            r.n_selected, _num(r.accuracy), int(r.converged)])


def write_frontier_summary_csv(report: FrontierReport, path) -> None:
    best = best_c2_on_test(report).C2
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["C2", "mean_acc_test", "mean_norm_gamma", "mean_n_selected", "n_flagged", "best_on_test"])
        for rec in report.records:
            w.writerow([_num(rec.C2), _num(rec.mean_accuracy), _num(rec.mean_norm_gamma),
                        _num(rec.mean_n_selected), rec.n_flagged, int(rec.C2 == best)])


def write_ranking_csv(table: RankTable, feature_names, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["C2", "rank", "feature_name", "mean_gamma"])
        for c2, order, mg in zip(table.C2_values, table.order, table.mean_gamma):
            for pos, j in enumerate(order, start=1):
                w.writerow([_num(c2), pos, feature_names[j], _num(mg[j])])


def write_correlation_csv(R: np.ndarray, feature_names, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature"] + list(feature_names))
        for name, row in zip(feature_names, R):
            w.writerow([name] + [_num(v) for v in row])

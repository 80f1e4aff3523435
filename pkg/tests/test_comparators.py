import numpy as np
import pytest

from mmfs.comparators import (compare, l1_cv_choice, l1_objective, solve_l1_svm, solve_no_fs,
                              write_comparison_csv)
from mmfs.data import Dataset, make_folds, make_synthetic
from mmfs.kernel import KernelParams, gram
from mmfs.pipeline import GridSpec, InitialChoice, evaluate_accuracy, split_fold
from mmfs.svm_dual import SvmHyper, solve_dual
from oracles import l1_svm_vertices


def _small(rng, n, m):
    X = np.round(rng.normal(size=(n, m)), 2)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[-1] = 1.0, -1.0
    return Dataset(X, y, [f"f{j}" for j in range(m)])


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("method", ["lp", "pdhg"])
def test_matches_vertex_oracle(seed, method):
    rng = np.random.default_rng(900 + seed)
    n, m = int(rng.integers(2, 5)), int(rng.integers(1, 5))
    ds = _small(rng, n, m)
    C = float(rng.choice([0.1, 1.0, 10.0]))
    ref = l1_svm_vertices(ds.X, ds.y, C)
    sol = solve_l1_svm(ds, C, tol=1e-7, method=method)
    assert sol.converged
    assert abs(sol.objective - ref) <= 1e-4 * (1 + abs(ref))
    assert sol.objective == pytest.approx(l1_objective(ds.X, ds.y, sol.w, sol.b, C), abs=1e-8)


def test_tiny_c_gives_zero_weights_and_majority_bias():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(9, 3))
    y = np.array([1.0] * 6 + [-1.0] * 3)
    sol = solve_l1_svm(Dataset(X, y, ["a", "b", "c"]), 1e-6)
    assert np.all(sol.w == 0.0)
    assert sol.b == pytest.approx(1.0)
    assert np.all(sol.predict(rng.normal(size=(5, 3))) == 1.0)


def test_one_informative_coordinate_large_c():
    X = np.array([[-2.0, 0.3], [-1.0, -0.4], [1.0, 0.2], [2.0, -0.1]])
    ds = Dataset(X, [-1.0, -1.0, 1.0, 1.0], ["a", "b"])
    for method in ("lp", "pdhg"):
        sol = solve_l1_svm(ds, 100.0, tol=1e-8, method=method)
        assert sol.selected().tolist() == [0]
        assert sol.objective == pytest.approx(l1_svm_vertices(X, ds.y, 100.0), rel=1e-4)


def test_validation():
    ds = _small(np.random.default_rng(0), 4, 2)
    with pytest.raises(ValueError):
        solve_l1_svm(ds, 0.0)
    with pytest.raises(ValueError):
        solve_l1_svm(ds, 1.0, method="simplex")


def test_pdhg_iteration_cap_flags_best_iterate():
    ds = make_synthetic(60, 2, 2, seed=3)
    sol = solve_l1_svm(ds, 10.0, tol=1e-12, method="pdhg", max_iter=100)
    assert not sol.converged and sol.n_iter == 100 and sol.gap > 0
    assert sol.objective == pytest.approx(l1_objective(ds.X, ds.y, sol.w, sol.b, 10.0))


def test_pdhg_reported_objective_bounds_dual():
    ds = make_synthetic(50, 2, 3, seed=4)
    lp = solve_l1_svm(ds, 1.0)
    pd = solve_l1_svm(ds, 1.0, tol=1e-6, method="pdhg")
    assert pd.converged
    assert pd.objective >= lp.objective - 1e-8
    assert pd.objective - lp.objective <= 1e-6 * (1 + lp.objective) + 1e-9


def test_cv_choice_prefers_smaller_c_on_ties():
    ds = make_synthetic(60, 1, 0, seed=5, separation=20.0)
    C, acc = l1_cv_choice(ds, (0.5, 1.0, 10.0))
    assert acc == 1.0 and C == 0.5


def test_no_fs_singleton_grid_equals_direct_evaluation():
    ds = make_synthetic(50, 2, 1, seed=6)
    folds = make_folds(ds.n, 5, seed=0, y=ds.y)
    grid = GridSpec(C_values=(1.0,), gamma_values=(0.1,))
    rows = solve_no_fs(ds, grid, folds)
    for f, r in enumerate(rows):
        tv, te = split_fold(ds, folds, f)
        p = KernelParams(np.full(3, 0.1))
        sol = solve_dual(gram(tv, p).G, tv.y, SvmHyper(1.0), tol=1e-8)
        assert r.fold == f and r.accuracy == evaluate_accuracy(te, tv, sol, p)


def _rings(n, seed):
    # class +1 inside radius 1, class -1 on a ring; no linear rule does well
    rng = np.random.default_rng(seed)
    r = np.where(np.arange(n) % 2 == 0, rng.uniform(0, 0.8, n), rng.uniform(1.4, 2.0, n))
    t = rng.uniform(0, 2 * np.pi, n)
    X = np.column_stack([r * np.cos(t), r * np.sin(t), rng.normal(size=n)])
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return Dataset(X, y, ["u", "v", "noise"])


def test_compare_shape_and_nonlinear_advantage(tmp_path):
    ds = _rings(80, 7)
    folds = make_folds(ds.n, 4, seed=0, y=ds.y)
    grid = GridSpec(C_values=(0.1, 1.0, 10.0), gamma_values=(0.1, 1.0, 10.0))
    rows, mm = compare(ds, folds, grid, 0.3)
    assert [r.method for r in rows] == ["MM-FS"] * 4 + ["NO-FS"] * 4 + ["L1-SVM"] * 4
    assert [r.fold for r in rows] == list(range(4)) * 3
    acc = {m: np.mean([r.accuracy for r in rows if r.method == m]) for m in ("MM-FS", "L1-SVM")}
    assert acc["MM-FS"] >= acc["L1-SVM"] - 0.02
    write_comparison_csv(rows, tmp_path / "a.csv")
    rows2, _ = compare(ds, folds, grid, 0.3, jobs=2)
    write_comparison_csv(rows2, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "method,fold,accuracy,n_selected,converged"

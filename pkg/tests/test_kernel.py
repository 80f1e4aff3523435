import math

import numpy as np
import pytest

from mmfs.data import Dataset
from mmfs.kernel import KernelParams, PairwiseSquares, cross_kernel, gram, gram_gamma_gradient, kernel_value
from oracles import rel_err


def _ds(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.where(np.arange(len(X)) % 2 == 0, 1.0, -1.0) if y is None else y
    return Dataset(X, y, [f"f{j}" for j in range(X.shape[1])])


def test_kernel_value_examples():
    x = np.array([0.3, -2.0])
    assert kernel_value(x, x, KernelParams([4.0, 9.0])) == 1.0
    assert kernel_value(x, -x, KernelParams([0.0, 0.0])) == 1.0
    assert kernel_value([0.0], [1.0], KernelParams([1.0])) == pytest.approx(0.3678794, abs=1e-7)
    with pytest.raises(ValueError):
        kernel_value([0.0, 1.0], [1.0], KernelParams([1.0]))


def test_params_validation():
    with pytest.raises(ValueError):
        KernelParams([-1.0])
    with pytest.raises(ValueError):
        KernelParams([np.inf])


def test_gram_zero_gamma():
    ds = _ds(np.random.default_rng(0).normal(size=(5, 3)))
    gm = gram(ds, KernelParams(np.zeros(3)))
    assert np.all(gm.K == 1.0)
    assert np.array_equal(gm.G, np.outer(ds.y, ds.y))


def test_gram_single_point():
    gm = gram(_ds([[1.0, 2.0]], np.array([1.0])), KernelParams([1.0, 1.0]))
    assert gm.K.tolist() == [[1.0]] and gm.G.tolist() == [[1.0]]


def test_gram_matches_scalar_calls():
    X = np.array([[0.0, 1.0], [1.0, -1.0], [0.5, 0.5]])
    ds = _ds(X)
    p = KernelParams([1.0, 1.0])
    K = gram(ds, p).K
    for i in range(3):
        for l in range(3):
            ref = math.exp(-sum((X[i, j] - X[l, j]) ** 2 for j in range(2)))
            assert K[i, l] == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_gram_invariants(seed):
    rng = np.random.default_rng(seed)
    ds = _ds(rng.normal(size=(12, 4)))
    gm = gram(ds, KernelParams(rng.uniform(0, 3, size=4)))
    assert np.array_equal(gm.K, gm.K.T)
    assert np.all(np.diag(gm.K) == 1.0)
    assert np.all((gm.K > 0) & (gm.K <= 1))
    assert np.linalg.eigvalsh(gm.G).min() >= -1e-10


@pytest.mark.parametrize("seed", range(10))
def test_kernel_decreases_in_gamma(seed):
    rng = np.random.default_rng(100 + seed)
    ds = _ds(rng.normal(size=(8, 3)))
    g = rng.uniform(0, 2, size=3)
    K0 = gram(ds, KernelParams(g)).K
    g2 = g.copy()
    g2[rng.integers(3)] += rng.uniform(0, 1)
    K1 = gram(ds, KernelParams(g2)).K
    off = ~np.eye(8, dtype=bool)
    assert np.all(K1[off] <= K0[off])


def test_gradient_examples():
    ds = _ds([[0.0, 3.0], [1.0, 3.0]], np.array([1.0, -1.0]))
    D = gram_gamma_gradient(ds, KernelParams([0.0, 0.0]), 0)
    assert D[0, 1] == pytest.approx(-ds.y[0] * ds.y[1])
    assert np.all(np.diag(D) == 0)
    with pytest.raises(IndexError):
        gram_gamma_gradient(ds, KernelParams([0.0, 0.0]), 2)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_finite_difference(seed):
    rng = np.random.default_rng(200 + seed)
    ds = _ds(rng.normal(size=(4, 3)))
    g = rng.uniform(0.1, 2, size=3)
    j = int(rng.integers(3))
    h = 1e-6
    gp, gm_ = g.copy(), g.copy()
    gp[j] += h
    gm_[j] -= h
    fd = (gram(ds, KernelParams(gp)).G - gram(ds, KernelParams(gm_)).G) / (2 * h)
    an = gram_gamma_gradient(ds, KernelParams(g), j)
    assert np.array_equal(an, an.T)
    assert rel_err(an, fd) <= 1e-6


@pytest.mark.parametrize("precompute", [True, False])
def test_pairwise_squares_agree(precompute):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(9, 4))
    sq = PairwiseSquares(X, precompute=precompute)
    g = rng.uniform(0, 2, size=4)
    ref = np.exp(-np.array([[np.dot(g, (a - b) ** 2) for b in X] for a in X]))
    np.testing.assert_allclose(sq.kernel(g), ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(cross_kernel(X, X, g), ref, rtol=1e-12, atol=1e-14)
    W = rng.normal(size=(9, 9))
    want = np.array([np.sum(W * (X[:, j][:, None] - X[:, j][None, :]) ** 2) for j in range(4)])
    np.testing.assert_allclose(sq.contract(W), want, rtol=1e-10)

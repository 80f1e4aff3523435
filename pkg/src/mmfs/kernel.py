"""Anisotropic Gaussian kernel, Gram matrices and their derivatives in gamma.

    K(x_i, x_l) = exp(-sum_j gamma_j (x_ij - x_lj)^2)
    G = diag(y) K diag(y)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset


@dataclass(frozen=True)
class KernelParams:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float).ravel()
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gamma must be finite and nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @classmethod
    def isotropic(cls, value: float, n_features: int) -> "KernelParams":
        return cls(np.full(n_features, float(value)))


@dataclass(frozen=True)
class GramMatrices:
    K: np.ndarray
    G: np.ndarray


def kernel_value(xi, xl, params: KernelParams) -> float:
    xi = np.asarray(xi, dtype=float).ravel()
    xl = np.asarray(xl, dtype=float).ravel()
    if xi.shape != xl.shape or xi.shape != params.gamma.shape:
        raise ValueError("dimension mismatch")
    return float(np.exp(-np.dot(params.gamma, (xi - xl) ** 2)))


def cross_kernel(A, B, gamma) -> np.ndarray:
    """Kernel matrix between the rows of ``A`` and the rows of ``B``."""
    gamma = np.asarray(gamma, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != gamma.shape[0] or B.shape[1] != gamma.shape[0]:
        raise ValueError("dimension mismatch")
    s = np.sqrt(gamma)
    return np.exp(-cdist(A * s, B * s, "sqeuclidean"))


class PairwiseSquares:
    """Squared coordinate differences (x_ij - x_lj)^2 over all pairs i < l.

    With ``precompute`` the (pairs x features) table is stored once, making each
    Gram build and gradient contraction one matrix-vector product. Without it,
    both are computed from the X'WX expansion (O(n M) memory), which is the
    choice for very wide data.
    """

    def __init__(self, X, precompute: bool = True):
        X = np.asarray(X, dtype=float)
        self.X = X
        self.n, self.m = X.shape
        self.iu, self.ju = np.triu_indices(self.n, k=1)
        self.precompute = precompute
        self.table = (X[self.iu] - X[self.ju]) ** 2 if precompute else None
        self._X2 = X * X

    def distances(self, gamma) -> np.ndarray:
        """Weighted squared distances sum_j gamma_j (x_ij - x_lj)^2 as an n x n matrix."""
        gamma = np.asarray(gamma, dtype=float)
        if gamma.shape != (self.m,):
            raise ValueError("dimension mismatch")
        if self.precompute:
            vals = self.table @ gamma
        else:
            Xs = self.X * np.sqrt(gamma)
            sq = np.einsum("ij,ij->i", Xs, Xs)
            vals = np.maximum(sq[self.iu] + sq[self.ju] - 2.0 * np.einsum("ij,ij->i", Xs[self.iu], Xs[self.ju]), 0.0)
        D = np.zeros((self.n, self.n))
        D[self.iu, self.ju] = vals
        D[self.ju, self.iu] = vals
        return D

    def kernel(self, gamma) -> np.ndarray:
        return np.exp(-self.distances(gamma))

    def contract(self, W) -> np.ndarray:
        """Return s_j = sum_{i,l} W_il (x_ij - x_lj)^2 for every feature j."""
        W = np.asarray(W, dtype=float)
        if self.precompute:
            return self.table.T @ (W[self.iu, self.ju] + W[self.ju, self.iu])
        r = W.sum(axis=1) + W.sum(axis=0)
        return self._X2.T @ r - 2.0 * np.einsum("ij,ij->j", self.X, W @ self.X)


def gram(ds: Dataset, params: KernelParams, squares: PairwiseSquares | None = None) -> GramMatrices:
    if params.gamma.shape[0] != ds.n_features:
        raise ValueError("gamma length does not match the number of features")
    sq = squares if squares is not None else PairwiseSquares(ds.X)
    K = sq.kernel(params.gamma)
    G = K * np.outer(ds.y, ds.y)
    return GramMatrices(K, G)


def gram_gamma_gradient(ds: Dataset, params: KernelParams, j: int, G: np.ndarray | None = None) -> np.ndarray:
    """Entrywise derivative dG_il/dgamma_j = -(x_ij - x_lj)^2 G_il."""
    if not 0 <= j < ds.n_features:
        raise IndexError(f"feature index {j} out of range")
    if G is None:
        G = gram(ds, params).G
    d = ds.X[:, j]
    return -((d[:, None] - d[None, :]) ** 2) * G

"""Dataset ingestion, [-1, 1] scaling, fold plans and synthetic data."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError("X must be two-dimensional")
        y = np.asarray(self.y, dtype=float).ravel()
        if len(y) != X.shape[0]:
            raise DataError(f"{len(y)} labels for {X.shape[0]} rows")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise DataError("labels must be -1 or +1")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)

    def majority_fraction(self) -> float:
        pos = float(np.mean(self.y > 0))
        return max(pos, 1.0 - pos)


def load_csv(path, label_column: str) -> Dataset:
    """Read a comma-separated file with a header row.

    The label column must hold exactly two distinct raw values; the
    lexicographically larger one becomes +1. All other columns are features,
    kept in file order.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header")
    li = header.index(label_column)
    names = [h for k, h in enumerate(header) if k != li]
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no data rows")

    raw_labels = []
    X = np.empty((len(body), len(names)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{r}: expected {len(header)} cells, got {len(row)}")
        raw_labels.append(row[li].strip())
        cells = [c for k, c in enumerate(row) if k != li]
        for j, c in enumerate(cells):
            try:
                X[r - 2, j] = float(c)
            except ValueError:
                raise DataError(f"{path}:{r}: non-numeric value {c!r} in column {names[j]!r}") from None
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite feature value")

    classes = sorted(set(raw_labels))
    if len(classes) != 2:
        raise DataError(f"{path}: label column must hold exactly 2 classes, found {len(classes)}")
    pos = classes[1]
    y = np.array([1.0 if lab == pos else -1.0 for lab in raw_labels])
    return Dataset(X, y, names)


def write_csv(ds: Dataset, path, label_column: str = "label") -> None:
    """Write ``ds`` so that ``load_csv(path, label_column)`` returns it again.

    Labels are written as ``neg``/``pos`` which keeps the +1 mapping stable.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + [label_column])
        for row, lab in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in row] + ["pos" if lab > 0 else "neg"])


@dataclass(frozen=True)
class ScalingSpec:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.asarray(self.lo, dtype=float))
        hi = _frozen(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise DataError("scaling bounds must satisfy lo <= hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


def fit_scaling(ds: Dataset) -> ScalingSpec:
    return ScalingSpec(ds.X.min(axis=0), ds.X.max(axis=0))


def apply_scaling(ds: Dataset, spec: ScalingSpec) -> Dataset:
    """Map each feature affinely so the fitted [min, max] becomes [-1, 1].

    Values outside the fitted range are not clipped. Constant features map to 0.
    """
    if spec.lo.shape[0] != ds.n_features:
        raise DataError("scaling spec does not match the number of features")
    span = spec.hi - spec.lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    Z = 2.0 * (ds.X - spec.lo) / safe - 1.0
    Z[:, const] = 0.0
    return Dataset(Z, ds.y, ds.feature_names)


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream addressed by ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)]))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit seed for the stream addressed by ``(seed, *keys)``."""
    state = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)]).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int = 0

    def __post_init__(self):
        a = _frozen(np.asarray(self.assignments, dtype=np.int64))
        object.__setattr__(self, "assignments", a)
        if self.k < 1 or a.min(initial=0) < 0 or a.max(initial=0) >= self.k:
            raise DataError("fold indices out of range")
        if np.any(np.bincount(a, minlength=self.k) == 0):
            raise DataError("every fold must be nonempty")

    def test_indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == f)

    def train_indices(self, f: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != f)

    def to_json(self) -> str:
        return json.dumps({"seed": int(self.seed), "k": int(self.k), "assignments": self.assignments.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        d = json.loads(text)
        return cls(k=d["k"], assignments=np.asarray(d["assignments"]), seed=d["seed"])


def make_folds(n: int, k: int, seed: int, y: Sequence[float] | None = None) -> FoldPlan:
    """Split ``n`` individuals into ``k`` disjoint test folds.

    With labels, each class is shuffled and dealt round-robin, the deal
    continuing across classes; per-class and overall fold sizes then differ
    by at most one.
    """
    if k < 2:
        raise DataError("need k >= 2 folds")
    if k > n:
        raise DataError(f"cannot make {k} folds from {n} individuals")
    rng = child_rng(seed, 0xF01D)
    groups = [np.arange(n)] if y is None else [np.flatnonzero(np.asarray(y) == c) for c in (1.0, -1.0)]
    assign = np.empty(n, dtype=np.int64)
    start = 0
    for g in groups:
        if len(g) == 0:
            continue
        g = rng.permutation(g)
        assign[g] = (start + np.arange(len(g))) % k
        start = (start + len(g)) % k
    return FoldPlan(k=k, assignments=assign, seed=seed)


def make_synthetic(n: int, informative: int, noise: int, seed: int, separation: float = 2.0) -> Dataset:
    """Two Gaussian blobs that differ only on the first ``informative`` coordinates.

    Class means sit at +/- separation/2 on each informative coordinate; all
    coordinates have unit variance. Labels are balanced (the +1 class gets the
    extra point when ``n`` is odd).
    """
    if informative < 1:
        raise DataError("need at least one informative feature")
    rng = child_rng(seed, 0x5E7)
    y = np.where(np.arange(n) < (n + 1) // 2, 1.0, -1.0)
    y = rng.permutation(y)
    m = informative + noise
    X = rng.standard_normal((n, m))
    X[:, :informative] += 0.5 * separation * y[:, None]
    names = [f"inf{j + 1}" for j in range(informative)] + [f"noise{j + 1}" for j in range(noise)]
    return Dataset(X, y, names)

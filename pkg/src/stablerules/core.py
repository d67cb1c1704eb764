"""Validated containers shared by every module.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be handed to worker processes or threads without copying defensively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidFraction, InvalidLabel, InvalidValue

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
BINARY = "binary"
COLUMN_KINDS = (CONTINUOUS, CATEGORICAL, BINARY)

BINARY_TASK = "binary"
REAL_TASK = "real"


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    column_names: tuple
    column_kinds: tuple

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DimensionMismatch(f"feature matrix must be 2-D, got shape {values.shape}")
        n, p = values.shape
        if n < 1 or p < 1:
            raise DimensionMismatch(f"feature matrix needs n >= 1 and p >= 1, got {values.shape}")
        names = tuple(str(c) for c in self.column_names)
        kinds = tuple(self.column_kinds)
        if len(names) != p or len(kinds) != p:
            raise DimensionMismatch(
                f"{p} columns but {len(names)} names and {len(kinds)} kinds"
            )
        if len(set(names)) != p:
            raise InvalidValue("column names must be unique")
        bad = [k for k in kinds if k not in COLUMN_KINDS]
        if bad:
            raise InvalidValue(f"unknown column kinds {bad}")
        if not np.all(np.isfinite(values)):
            raise InvalidValue("feature matrix contains NaN or Inf")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "column_kinds", kinds)

    @classmethod
    def from_array(cls, values, column_names=None, kind=CONTINUOUS) -> "FeatureMatrix":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        p = values.shape[1]
        if column_names is None:
            column_names = [f"x{j}" for j in range(p)]
        return cls(values, tuple(column_names), (kind,) * p)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def take_rows(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.values[np.asarray(idx, dtype=int)], self.column_names, self.column_kinds)

    def take_columns(self, idx) -> "FeatureMatrix":
        idx = [int(i) for i in idx]
        return FeatureMatrix(
            self.values[:, idx],
            tuple(self.column_names[i] for i in idx),
            tuple(self.column_kinds[i] for i in idx),
        )


@dataclass(frozen=True)
class LabelVector:
    values: np.ndarray
    task: str = REAL_TASK

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1:
            raise DimensionMismatch(f"labels must be 1-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidValue("labels contain NaN or Inf")
        if self.task not in (BINARY_TASK, REAL_TASK):
            raise InvalidLabel(f"unknown task {self.task!r}")
        if self.task == BINARY_TASK and not np.all(np.isin(values, (-1.0, 1.0))):
            raise InvalidLabel("binary labels must be drawn from {-1, +1}")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def take(self, idx) -> "LabelVector":
        return LabelVector(self.values[np.asarray(idx, dtype=int)], self.task)


@dataclass(frozen=True)
class SampleWeights:
    """Nonnegative per-sample weights learned to sum to roughly one."""

    w: np.ndarray
    delta: float = 0.05

    def __post_init__(self):
        w = _frozen(self.w)
        if w.ndim != 1:
            raise DimensionMismatch("sample weights must be 1-D")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidValue("sample weights must be finite and nonnegative")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, n: int) -> "SampleWeights":
        return cls(np.full(n, 1.0 / n))

    def __len__(self):
        return self.w.shape[0]

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def sum_within_tolerance(self) -> bool:
        return abs(self.total - 1.0) <= self.delta

    def mean_one(self) -> np.ndarray:
        """Weights rescaled to mean 1 (sum n)."""
        total = self.total
        if total <= 0:
            return np.zeros_like(self.w)
        return self.w * (len(self) / total)


@dataclass(frozen=True)
class SplitSpec:
    stable_idx: tuple
    unstable_idx: tuple
    p: Optional[int] = None

    def __post_init__(self):
        s = tuple(int(i) for i in self.stable_idx)
        v = tuple(int(i) for i in self.unstable_idx)
        if set(s) & set(v):
            raise InvalidValue("stable and unstable index sets overlap")
        p = len(s) + len(v) if self.p is None else int(self.p)
        if sorted(s + v) != list(range(p)):
            raise InvalidValue(f"stable/unstable indices must cover columns 0..{p - 1}")
        object.__setattr__(self, "stable_idx", s)
        object.__setattr__(self, "unstable_idx", v)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_sizes(cls, p_s: int, p_v: int) -> "SplitSpec":
        return cls(tuple(range(p_s)), tuple(range(p_s, p_s + p_v)))


@dataclass(frozen=True)
class ValidatedDataset:
    features: FeatureMatrix
    labels: LabelVector

    @property
    def n(self) -> int:
        return self.features.n

    @property
    def X(self) -> np.ndarray:
        return self.features.values

    @property
    def y(self) -> np.ndarray:
        return self.labels.values

    def subset(self, idx) -> "ValidatedDataset":
        return ValidatedDataset(self.features.take_rows(idx), self.labels.take(idx))


def validate_dataset(features, labels) -> ValidatedDataset:
    """Pair features with labels, enforcing every container invariant.

    Raw arrays are accepted and wrapped; labels in {-1, +1} infer a binary task.
    """
    if not isinstance(features, FeatureMatrix):
        features = FeatureMatrix.from_array(features)
    if not isinstance(labels, LabelVector):
        arr = np.asarray(labels, dtype=float)
        task = BINARY_TASK if arr.size and np.all(np.isin(arr, (-1.0, 1.0))) else REAL_TASK
        labels = LabelVector(arr, task)
    if len(labels) != features.n:
        raise DimensionMismatch(f"{features.n} feature rows but {len(labels)} labels")
    return ValidatedDataset(features, labels)


def split_train_test(ds: ValidatedDataset, test_fraction: float, seed: int):
    """Random train/test partition; the test side gets ceil(n * fraction) rows."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidFraction(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = ds.n
    n_test = math.ceil(n * test_fraction)
    if n_test >= n:
        raise InvalidFraction(f"test_fraction {test_fraction} leaves no training rows for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return ds.subset(train_idx), ds.subset(test_idx)


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray
    constant: tuple = field(default_factory=tuple)

    def apply(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def invert(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.std + self.mean


def standardize(features: FeatureMatrix):
    """Z-score continuous columns with the population (1/n) standard deviation.

    Categorical and binary columns, and constant continuous columns, get
    mean 0 / std 1 in the returned statistics so they pass through unchanged.
    Constant columns are listed in ``Standardization.constant``.
    """
    X = features.values
    mean = np.zeros(features.p)
    std = np.ones(features.p)
    constant = []
    for j, kind in enumerate(features.column_kinds):
        if kind != CONTINUOUS:
            continue
        sd = X[:, j].std()
        if sd <= 1e-12 * max(1.0, abs(X[:, j]).max()):
            constant.append(j)
            continue
        mean[j] = X[:, j].mean()
        std[j] = sd
    stats = Standardization(_frozen(mean), _frozen(std), tuple(constant))
    out = FeatureMatrix(stats.apply(X), features.column_names, features.column_kinds)
    return out, stats


def destandardize(features: FeatureMatrix, stats: Standardization) -> FeatureMatrix:
    return FeatureMatrix(stats.invert(features.values), features.column_names, features.column_kinds)


def as_weights(w, n: Optional[int] = None) -> np.ndarray:
    """Plain weight array from a SampleWeights, an array, or None (uniform)."""
    if w is None:
        if n is None:
            raise ValueError("n is required for uniform weights")
        return np.full(n, 1.0 / n)
    if isinstance(w, SampleWeights):
        return w.w
    return np.asarray(w, dtype=float)


def check_same_length(*arrays: Sequence) -> int:
    lengths = {len(a) for a in arrays}
    if len(lengths) != 1:
        raise DimensionMismatch(f"length mismatch: {sorted(lengths)}")
    return lengths.pop()

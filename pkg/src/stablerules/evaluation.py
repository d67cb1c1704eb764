"""Metrics: coefficient errors, RMSE, classification scores, correlation profiles."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from scipy import stats

from .core import SplitSpec, as_weights
from .errors import DimensionMismatch, EmptyInput, TooFewItems, TooFewSamples

PANELS = ("linear", "square", "cubic", "exp")
EXP_CLIP = 700.0


@dataclass(frozen=True)
class BetaErrors:
    beta_s_err: float
    beta_v_err: float
    beta_err: float

    def as_dict(self):
        return {"beta_s_err": self.beta_s_err, "beta_v_err": self.beta_v_err, "beta_err": self.beta_err}


def combine_beta_errors(beta_s_err: float, beta_v_err: float) -> BetaErrors:
    return BetaErrors(float(beta_s_err), float(beta_v_err), (float(beta_s_err) + float(beta_v_err)) / 2.0)


def beta_errors(est, beta_true, split: SplitSpec) -> BetaErrors:
    """Mean absolute coefficient error over stable and unstable indices."""
    beta_hat = np.asarray(getattr(est, "beta", est), dtype=float)
    beta_true = np.asarray(beta_true, dtype=float)
    if beta_hat.shape != beta_true.shape or len(beta_true) != split.p:
        raise DimensionMismatch(
            f"estimate {beta_hat.shape}, truth {beta_true.shape}, split over {split.p} columns"
        )
    err = np.abs(beta_hat - beta_true)
    s_err = err[list(split.stable_idx)].mean() if split.stable_idx else 0.0
    v_err = err[list(split.unstable_idx)].mean() if split.unstable_idx else 0.0
    return combine_beta_errors(s_err, v_err)


def regression_metrics(pred, y) -> float:
    """Root mean squared error."""
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if pred.shape != y.shape:
        raise DimensionMismatch(f"prediction shape {pred.shape} != target shape {y.shape}")
    if y.size == 0:
        raise EmptyInput("RMSE of an empty vector")
    return float(np.sqrt(np.mean((pred - y) ** 2)))


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple = ()


def classification_metrics(pred, y) -> ClassificationMetrics:
    """Confusion-matrix scores with +1 as the positive class.

    Ratios with a zero denominator are reported as 0 and named in ``undefined``.
    """
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if pred.shape != y.shape:
        raise DimensionMismatch("prediction and label lengths differ")
    if y.size == 0:
        raise EmptyInput("no predictions")
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y != 1)))
    fn = float(np.sum((pred != 1) & (y == 1)))
    undefined = []
    precision = tp / (tp + fp) if tp + fp > 0 else undefined.append("precision") or 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else undefined.append("recall") or 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        undefined.append("f1")
        f1 = 0.0
    return ClassificationMetrics(float(np.mean(pred == y)), precision, recall, f1, tuple(undefined))


def _pearson(a, b, w=None):
    """Pearson correlation, under the probability weights ``w`` when given."""
    if w is None:
        w = np.full(len(a), 1.0 / len(a))
    a = a - w @ a
    b = b - w @ b
    den = np.sqrt((w @ (a * a)) * (w @ (b * b)))
    if not np.isfinite(den) or den <= 1e-300:
        return 0.0, True
    return float(np.clip(w @ (a * b) / den, -1.0, 1.0)), False


@dataclass
class CorrelationProfile:
    """Pearson correlations of weighted columns against transforms of the others.

    ``panels[name][i, j]`` is the correlation of column i with T(column j) for the
    panel transform T;
    diagonal entries are unused and held at 0.
    """

    panels: Dict[str, np.ndarray]
    flagged: List[tuple] = field(default_factory=list)

    def pairs(self):
        p = next(iter(self.panels.values())).shape[0]
        return [(i, j) for i in range(p) for j in range(p) if i != j]

    def mean_abs(self, panel: str) -> float:
        M = self.panels[panel]
        p = M.shape[0]
        off = ~np.eye(p, dtype=bool)
        return float(np.mean(np.abs(M[off])))

    def summary(self) -> Dict[str, float]:
        return {name: self.mean_abs(name) for name in self.panels}

    def long_rows(self):
        for name, M in self.panels.items():
            for i, j in self.pairs():
                yield name, i, j, float(M[i, j])


PRODUCT = "product"
WEIGHTED = "weighted"


def correlation_profile(V, w=None, mode: str = PRODUCT) -> CorrelationProfile:
    """Correlations between each column and transforms of every other column.

    ``mode="product"`` multiplies the columns elementwise by mean-one weights
    and takes plain Pearson correlations of WV_i against T(WV_j).
    ``mode="weighted"`` instead computes Pearson correlations of V_i against
    T(V_j) under the probability measure given by the weights, which is the
    dependence the reweighting is meant to remove. Both agree for uniform w.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise DimensionMismatch("V must be 2-D")
    if mode not in (PRODUCT, WEIGHTED):
        raise ValueError(f"unknown profile mode {mode!r}")
    n, p = V.shape
    if n < 3:
        raise TooFewSamples(f"need at least 3 samples, got {n}")
    w = as_weights(w, n)
    if len(w) != n:
        raise DimensionMismatch(f"{n} rows but {len(w)} weights")
    w = w * (n / w.sum())
    if mode == PRODUCT:
        base, measure = V * w[:, None], None
    else:
        base, measure = V, w / n
    transforms = {
        "linear": base,
        "square": base ** 2,
        "cubic": base ** 3,
        "exp": np.exp(np.minimum(base, EXP_CLIP)),
    }
    panels = {name: np.zeros((p, p)) for name in PANELS}
    flagged = []
    for name in PANELS:
        T = transforms[name]
        for i in range(p):
            for j in range(p):
                if i == j:
                    continue
                r, degenerate = _pearson(base[:, i], T[:, j], measure)
                panels[name][i, j] = r
                if degenerate:
                    flagged.append((name, i, j))
    return CorrelationProfile(panels, flagged)


def spearman_consistency(model_scores, expert_scores) -> float:
    """Spearman rank correlation with average ranks for ties."""
    a = np.asarray(model_scores, dtype=float)
    b = np.asarray(expert_scores, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch("score vectors differ in length")
    if a.size < 2:
        raise TooFewItems("need at least two scored items")
    with warnings.catch_warnings():
        # constant inputs are reported as 0 below
        warnings.simplefilter("ignore", stats.ConstantInputWarning)
        rho = stats.spearmanr(a, b).statistic
    if not np.isfinite(rho):
        return 0.0
    return float(rho)

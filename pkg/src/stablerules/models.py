"""Linear predictors: least-squares baselines, DWR, and weighted SVM / SVR."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _ipm
from .core import SampleWeights, as_weights
from .decorrelation import DecorConfig, learn_weights
from .errors import DimensionMismatch, InvalidLabel, InvalidValue, Singular

KINDS = ("ols", "ridge", "lasso", "dwr", "svm", "wsvm", "svr", "wsvr")


@dataclass
class LinearModel:
    beta: np.ndarray
    b: float
    kind: str
    config: dict = field(default_factory=dict)
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.b = float(self.b)
        if self.kind not in KINDS:
            raise InvalidValue(f"unknown model kind {self.kind!r}")
        if not (np.all(np.isfinite(self.beta)) and np.isfinite(self.b)):
            raise InvalidValue("model coefficients must be finite")

    @property
    def is_classifier(self) -> bool:
        return self.kind in ("svm", "wsvm")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "beta": self.beta.tolist(), "b": self.b,
                           "config": self.config, "training_meta": self.training_meta},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LinearModel":
        d = json.loads(text)
        return cls(np.array(d["beta"]), d["b"], d["kind"], d.get("config", {}), d.get("training_meta", {}))


@dataclass
class SvmConfig:
    """Settings shared by the weighted SVM and SVR.

    Sample ``i`` gets loss weight ``scale * W_i + C`` where ``scale`` is n when
    ``mean_one_weights`` is set (W rescaled to mean one) and 1 otherwise.
    """

    C: float = 1.0
    epsilon: float = 0.1
    max_iters: int = 200
    tolerance: float = 1e-10
    mean_one_weights: bool = True

    def __post_init__(self):
        if self.C < 0 or self.epsilon < 0:
            raise InvalidValue("C and epsilon must be nonnegative")

    def to_dict(self):
        return asdict(self)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if X.shape[0] < 1:
        raise DimensionMismatch("need at least one sample")
    return X, y


def _weighted_center(X, y, w):
    total = w.sum()
    mx = w @ X / total
    my = float(w @ y / total)
    return X - mx, y - my, mx, my


def weighted_least_squares(X, y, w=None, ridge: float = 0.0, kind: str = "ols") -> LinearModel:
    """Minimize ``sum_i w_i (y_i - x_i beta - b)^2 + ridge ||beta||^2``; b unpenalized."""
    X, y = _check_xy(X, y)
    w = np.ones(len(y)) if w is None else as_weights(w, len(y))
    Xc, yc, mx, my = _weighted_center(X, y, w)
    Xw = Xc * w[:, None]
    A = Xw.T @ Xc + ridge * np.eye(X.shape[1])
    if ridge == 0:
        rank = np.linalg.matrix_rank(A)
        if rank < X.shape[1]:
            raise Singular(f"X^T W X has rank {rank} < {X.shape[1]}; use ridge with lambda > 0")
    beta = np.linalg.solve(A, Xw.T @ yc)
    return LinearModel(beta, my - mx @ beta, kind, {"lambda": ridge})


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def fit_lasso(X, y, lam: float, max_iters: int = 100_000, tol: float = 1e-7) -> LinearModel:
    """Coordinate descent on ``0.5 ||y - X beta - b||^2 + lam ||beta||_1``."""
    X, y = _check_xy(X, y)
    Xc, yc, mx, my = _weighted_center(X, y, np.ones(len(y)))
    col_sq = np.einsum("ij,ij->j", Xc, Xc)
    beta = np.zeros(X.shape[1])
    resid = yc.copy()
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iters + 1):
        max_change = 0.0
        for j in range(X.shape[1]):
            if col_sq[j] == 0:
                continue
            old = beta[j]
            rho = Xc[:, j] @ resid + col_sq[j] * old
            new = _soft(rho, lam) / col_sq[j]
            if new != old:
                resid -= Xc[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            converged = True
            break
    return LinearModel(beta, my - mx @ beta, "lasso", {"lambda": lam},
                       {"sweeps": sweeps, "converged": converged})


def fit_linear_baseline(X, y, method: str = "ols", lam: float = 0.0) -> LinearModel:
    if method == "ols":
        return weighted_least_squares(X, y, kind="ols")
    if lam < 0:
        raise InvalidValue("lambda must be nonnegative")
    if method == "ridge":
        return weighted_least_squares(X, y, ridge=lam, kind="ridge")
    if method == "lasso":
        return fit_lasso(X, y, lam)
    raise InvalidValue(f"unknown baseline {method!r}")


# --- decorrelated weighting regression -------------------------------------

def covariance_balance_and_grad(X, w):
    """Sum of squared off-diagonal weighted covariances, and its gradient.

    Weights are normalized to sum one inside, so the value is invariant to
    rescaling ``w``.
    """
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    s = w.sum()
    omega = w / s
    m = omega @ X
    Xt = X - m
    cov = (Xt * omega[:, None]).T @ Xt
    off = cov - np.diag(np.diag(cov))
    value = float(np.sum(off ** 2))
    # d cov_jk / d omega_i = xt_ij xt_ik - m_j m_k (the m-part is removed by the projection below)
    g_omega = 2.0 * np.einsum("ij,jk,ik->i", Xt, off, Xt)
    grad = (g_omega - g_omega @ omega) / s
    return value, grad


@dataclass
class DwrResult:
    model: LinearModel
    weights: SampleWeights
    objective: list
    converged: bool


def fit_dwr(X, y, lam: float = 1.0, decor: Optional[DecorConfig] = None, rounds: int = 2) -> DwrResult:
    """Decorrelated weighting regression.

    Alternates a weight step, projected gradient on ``lam * balance(W)`` plus
    the norm and sum penalties of ``decor``, with a weighted least-squares step
    for beta. The balance term only involves X, so the alternation settles
    after the first round; ``rounds`` is kept for symmetry with the joint form.
    """
    X, y = _check_xy(X, y)
    if X.shape[1] < 2:
        raise DimensionMismatch("DWR needs at least two columns")
    decor = decor or DecorConfig()
    cfg = DecorConfig(degree=1, gamma=lam, lambda_norm=decor.lambda_norm, lambda_sum=decor.lambda_sum,
                      max_iters=decor.max_iters, step_size=decor.step_size, tolerance=decor.tolerance,
                      standardize=decor.standardize)
    result = learn_weights(X, cfg, penalty=covariance_balance_and_grad)
    history = list(result.objective)
    model = weighted_least_squares(X, y, result.weights.w, kind="dwr")
    for _ in range(rounds - 1):
        again = learn_weights(X, cfg, init=result.weights, penalty=covariance_balance_and_grad)
        if again.final_objective >= result.final_objective:
            break
        result = again
        history.extend(again.objective[1:])
        model = weighted_least_squares(X, y, result.weights.w, kind="dwr")
    model.config = {"lambda": lam, **cfg.to_dict()}
    model.training_meta = {"weight_iterations": result.iterations, "converged": result.converged}
    return DwrResult(model, result.weights, history, result.converged)


# --- weighted SVM / SVR ------------------------------------------------------

def _loss_weights(w, n, cfg: SvmConfig):
    w = np.zeros(n) if w is None else as_weights(w, n)
    if len(w) != n:
        raise DimensionMismatch(f"{n} samples but {len(w)} weights")
    scale = n / w.sum() if (cfg.mean_one_weights and w.sum() > 0) else 1.0
    return scale * w + cfg.C


def svm_objective(beta, b, X, y, c) -> float:
    margins = 1.0 - y * (X @ beta + b)
    return 0.5 * float(beta @ beta) + float(c @ np.maximum(margins, 0.0))


def svr_objective(beta, b, X, y, c, epsilon) -> float:
    resid = np.abs(y - X @ beta - b) - epsilon
    return 0.5 * float(beta @ beta) + float(c @ np.maximum(resid, 0.0))


def _augment(X):
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _fit_meta(sol, objective):
    return {"iterations": sol.iterations, "converged": sol.converged,
            "objective_history": sol.history, "objective": objective}


def fit_weighted_svm(X, y, w=None, cfg: Optional[SvmConfig] = None) -> LinearModel:
    """Minimize ``0.5 ||beta||^2 + sum_i (W_i + C) hinge(y_i (x_i beta + b))``.

    ``w=None`` means all-zero weights, i.e. the plain SVM with margin weight C.
    """
    cfg = cfg or SvmConfig()
    X, y = _check_xy(X, y)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidLabel("SVM labels must be -1 or +1")
    c = _loss_weights(w, len(y), cfg)
    sol = _ipm.solve(y[:, None] * _augment(X), np.ones(len(y)), c, cfg.tolerance, cfg.max_iters)
    beta, b = sol.theta[:-1], sol.theta[-1]
    kind = "svm" if w is None else "wsvm"
    return LinearModel(beta, b, kind, cfg.to_dict(), _fit_meta(sol, svm_objective(beta, b, X, y, c)))


def fit_weighted_svr(X, y, w=None, cfg: Optional[SvmConfig] = None) -> LinearModel:
    """Minimize ``0.5 ||beta||^2 + sum_i (C + W_i) max(0, |y_i - x_i beta - b| - eps)``."""
    cfg = cfg or SvmConfig()
    X, y = _check_xy(X, y)
    c = _loss_weights(w, len(y), cfg)
    Xa = _augment(X)
    A = np.vstack([Xa, -Xa])
    h = np.concatenate([y - cfg.epsilon, -y - cfg.epsilon])
    sol = _ipm.solve(A, h, np.concatenate([c, c]), cfg.tolerance, cfg.max_iters)
    beta, b = sol.theta[:-1], sol.theta[-1]
    kind = "svr" if w is None else "wsvr"
    return LinearModel(beta, b, kind, cfg.to_dict(),
                       _fit_meta(sol, svr_objective(beta, b, X, y, c, cfg.epsilon)))


def predict(model: LinearModel, X, classify: Optional[bool] = None) -> np.ndarray:
    """``X beta + b``; classifiers (or ``classify=True``) threshold the sign at 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != len(model.beta):
        raise DimensionMismatch(f"model expects {len(model.beta)} features, got {X.shape[1]}")
    scores = X @ model.beta + model.b
    if classify is None:
        classify = model.is_classifier
    if classify:
        return np.where(scores >= 0, 1.0, -1.0)
    return scores

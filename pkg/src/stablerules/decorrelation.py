"""Sample reweighting that removes polynomial dependence between features.

For every ordered feature pair (source, target) a weighted least-squares
polynomial of degree ``k`` maps the source column onto the target column.
Under weights that make the two columns independent, every nonconstant
coefficient of that fit vanishes, so the sum of their squares over all
ordered pairs is used as a decorrelation penalty. Weights are learned by
projected gradient descent on

    gamma * penalty(W) + lam_norm * ||W||^2 + lam_sum * (sum(W) - 1)^2

over W >= 0, with the gradient of the penalty obtained by differentiating the
normal-equation solution in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .core import FeatureMatrix, SampleWeights, as_weights
from .errors import DimensionMismatch, InvalidValue, RankDeficient

log = logging.getLogger(__name__)

JITTER = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class PolyFit:
    coeffs: np.ndarray
    source: int = 0
    target: int = 1

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coeffs)


@dataclass
class DecorConfig:
    degree: int = 2
    gamma: float = 600.0
    lambda_norm: float = 0.0005
    lambda_sum: float = 0.0005
    max_iters: int = 2000
    step_size: float = 1e-2
    tolerance: float = 1e-8
    standardize: bool = True

    def __post_init__(self):
        if self.degree < 1:
            raise InvalidValue("degree must be >= 1")
        if min(self.gamma, self.lambda_norm, self.lambda_sum) < 0:
            raise InvalidValue("gamma and lambda multipliers must be nonnegative")
        if self.step_size <= 0 or self.max_iters < 0:
            raise InvalidValue("step_size must be positive and max_iters nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class WeightResult:
    weights: SampleWeights
    objective: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_objective(self) -> float:
        return self.objective[-1]


def _design(x, degree):
    return np.vander(np.asarray(x, dtype=float), degree + 1, increasing=True)


def _solve_normal(G, B):
    """Solve ``G c = B`` for a (stack of) weighted Gram matrices.

    The diagonal jitter is relative to the weight mass ``G[0, 0]`` so fits stay
    invariant to rescaling the weights; one refinement step against the
    unjittered system removes the bias it introduces.
    """
    k1 = G.shape[-1]
    Gj = G + (JITTER * G[..., 0, 0])[..., None, None] * np.eye(k1)
    cond = np.linalg.cond(Gj)
    if np.any(~np.isfinite(cond)) or np.any(cond > MAX_CONDITION):
        raise RankDeficient(f"weighted design matrix condition number {np.max(cond):.3g} exceeds {MAX_CONDITION:g}")
    c = np.linalg.solve(Gj, B)
    c = c + np.linalg.solve(Gj, B - G @ c)
    return c, Gj


def weighted_poly_fit(x_src, x_tgt, w, degree: int, source: int = 0, target: int = 1) -> PolyFit:
    """Weighted least-squares polynomial of ``x_tgt`` on ``x_src``.

    Minimizes ``sum_i w_i (x_tgt_i - sum_d c_d x_src_i^d)^2`` via the normal
    equations. ``coeffs[0]`` is the constant term.
    """
    x_src = np.asarray(x_src, dtype=float)
    x_tgt = np.asarray(x_tgt, dtype=float)
    w = as_weights(w, len(x_src))
    if not (len(x_src) == len(x_tgt) == len(w)):
        raise DimensionMismatch("x_src, x_tgt and w must have equal length")
    if degree < 1:
        raise InvalidValue("degree must be >= 1")
    if len(x_src) < degree + 1:
        raise RankDeficient(f"need at least {degree + 1} points for degree {degree}")
    A = _design(x_src, degree)
    Aw = A * w[:, None]
    c, _ = _solve_normal(Aw.T @ A, Aw.T @ x_tgt)
    return PolyFit(c, source, target)


def _varying_sources(X):
    spread = X.max(axis=0) - X.min(axis=0)
    return np.flatnonzero(spread > 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0)))


def _values(X):
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.asarray(X, dtype=float)


class PolynomialPenalty:
    """Pairwise polynomial decorrelation penalty for a fixed feature matrix.

    The design stack only depends on X, so it is built once and reused across
    weight evaluations. Constant columns carry no dependence information and
    are skipped as sources (their coefficients count as zero).
    """

    def __init__(self, X, degree: int = 2):
        X = _values(X)
        if X.ndim != 2 or X.shape[1] < 2:
            raise DimensionMismatch("the decorrelation penalty needs at least two columns")
        self.X = X
        self.degree = degree
        self.sources = _varying_sources(X)
        p = X.shape[1]
        self.A = np.stack([_design(X[:, s], degree) for s in self.sources]) if len(self.sources) else None
        mask = np.ones((len(self.sources), degree + 1, p))
        mask[:, 0, :] = 0.0
        mask[np.arange(len(self.sources)), :, self.sources] = 0.0
        self.mask = mask

    def fits(self, w):
        """Coefficients C (sources, k+1, p); C[a, :, t] fits column t on source a."""
        A = self.A
        Awt = (A * w[None, :, None]).transpose(0, 2, 1)
        return _solve_normal(Awt @ A, Awt @ self.X)

    def value(self, w) -> float:
        if self.A is None:
            return 0.0
        C, _ = self.fits(as_weights(w, self.X.shape[0]))
        return float(np.sum((C * self.mask) ** 2))

    def __call__(self, w):
        """Penalty value and exact gradient.

        For one pair ``dc/dw_i = G^{-1} a_i r_i`` with design row ``a_i`` and
        residual ``r_i``, so the gradient contracts the design against the
        residuals.
        """
        w = as_weights(w, self.X.shape[0])
        if self.A is None:
            return 0.0, np.zeros_like(w)
        C, G = self.fits(w)
        Cm = C * self.mask
        value = float(np.sum(Cm ** 2))
        Q = np.linalg.solve(G, Cm)
        R = self.X[None, :, :] - self.A @ C
        grad = 2.0 * np.sum((self.A @ Q) * R, axis=(0, 2))
        return value, grad


def decor_penalty(X, w, degree: int = 2) -> float:
    """Sum over ordered pairs of squared nonconstant polynomial coefficients."""
    return PolynomialPenalty(X, degree).value(w)


def decor_penalty_and_grad(X, w, degree: int = 2):
    """Penalty value and its exact gradient with respect to the weights."""
    return PolynomialPenalty(X, degree)(w)


def _quadratic_terms(w, cfg):
    s = w.sum()
    value = cfg.lambda_norm * float(w @ w) + cfg.lambda_sum * (s - 1.0) ** 2
    grad = 2.0 * cfg.lambda_norm * w + 2.0 * cfg.lambda_sum * (s - 1.0)
    return value, grad


def best_ray_scale(w, lambda_norm, lambda_sum) -> float:
    """Scale c > 0 minimizing ``lambda_norm*||c w||^2 + lambda_sum*(c*sum(w) - 1)^2``."""
    s = w.sum()
    denom = lambda_norm * float(w @ w) + lambda_sum * s * s
    if denom <= 0 or s <= 0:
        return 1.0
    return lambda_sum * s / denom


def learn_weights(X, cfg: Optional[DecorConfig] = None, init=None, penalty=None) -> WeightResult:
    """Learn decorrelating sample weights.

    ``penalty`` is a callable ``(X, w) -> (value, grad)`` of a scale-invariant
    balance penalty; it defaults to the polynomial penalty of degree
    ``cfg.degree``. Because that penalty is invariant to rescaling W, each
    accepted step is followed by the exact minimization of the quadratic terms
    along the ray through the new iterate, which can only lower the objective.
    """
    cfg = cfg or DecorConfig()
    X = _values(X)
    n, p = X.shape
    if p < 2:
        raise DimensionMismatch("learn_weights needs at least two columns")
    if n <= cfg.degree + 1:
        raise DimensionMismatch(f"need n > {cfg.degree + 1} samples, got {n}")
    if cfg.standardize:
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        X = (X - X.mean(axis=0)) / sd
    if penalty is None:
        poly = PolynomialPenalty(X, cfg.degree)

        def penalty(_, w):
            return poly(w)

    def evaluate(w):
        if cfg.gamma > 0:
            pv, pg = penalty(X, w)
        else:
            pv, pg = 0.0, np.zeros_like(w)
        return pv, pg

    def combine(w, pv, pg):
        qv, qg = _quadratic_terms(w, cfg)
        return cfg.gamma * pv + qv, cfg.gamma * pg + qg

    w = np.full(n, 1.0 / n) if init is None else as_weights(init, n).copy()
    pv, pg = evaluate(w)
    f, g = combine(w, pv, pg)
    history = [f]
    step = cfg.step_size
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        accepted = False
        for _ in range(60):
            trial = np.maximum(w - step * g, 0.0)
            if trial.sum() <= 0:
                step *= 0.5
                continue
            try:
                tv, tg = evaluate(trial)
            except RankDeficient:
                step *= 0.5
                continue
            f_trial, _ = combine(trial, tv, tg)
            if f_trial <= f + 1e-4 * float(g @ (trial - w)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        # penalty is scale invariant: value unchanged, gradient scales by 1/c
        c = best_ray_scale(trial, cfg.lambda_norm, cfg.lambda_sum)
        f_scaled, g_scaled = combine(trial * c, tv, tg / c)
        if f_scaled <= f_trial:
            trial, f_new, g = trial * c, f_scaled, g_scaled
        else:
            f_new, g = combine(trial, tv, tg)
        rel = abs(f - f_new) / max(abs(f), 1e-300)
        w, f = trial, f_new
        history.append(f)
        step *= 2.0
        if rel < cfg.tolerance:
            converged = True
            break
    if not converged:
        log.info("learn_weights hit max_iters=%d (objective %.6g)", cfg.max_iters, f)
    return WeightResult(SampleWeights(w), history, it, converged)

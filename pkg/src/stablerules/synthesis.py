"""Synthetic stable/unstable covariate environments with selection bias."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import SplitSpec
from .errors import EmptySelection, InvalidValue, TooFewStableColumns

LINEAR = "linear"
NONLINEAR = "nonlinear"

BETA_PATTERN = np.array([1 / 3, -2 / 3, 1.0, -1 / 3, 2 / 3, -1.0])


def default_split(p_total: int, stable_fraction: float = 0.4):
    p_s = int(round(stable_fraction * p_total))
    p_s = min(max(p_s, 2), p_total - 1)
    return p_s, p_total - p_s


@dataclass(frozen=True)
class EnvSpec:
    kind: str = NONLINEAR
    n: int = 1000
    p_total: int = 10
    p_s: Optional[int] = None
    p_v: Optional[int] = None
    seed: int = 0
    noise_std: float = 0.3

    def __post_init__(self):
        if self.kind not in (LINEAR, NONLINEAR):
            raise InvalidValue(f"unknown environment kind {self.kind!r}")
        if self.n < 1:
            raise InvalidValue("n must be >= 1")
        p_s, p_v = self.p_s, self.p_v
        if p_s is None and p_v is None:
            p_s, p_v = default_split(self.p_total)
        elif p_s is None:
            p_s = self.p_total - p_v
        elif p_v is None:
            p_v = self.p_total - p_s
        if p_s + p_v != self.p_total or p_s < 0 or p_v < 0:
            raise InvalidValue(f"p_s + p_v must equal p_total ({p_s} + {p_v} != {self.p_total})")
        object.__setattr__(self, "p_s", int(p_s))
        object.__setattr__(self, "p_v", int(p_v))

    @property
    def split(self) -> SplitSpec:
        return SplitSpec.from_sizes(self.p_s, self.p_v)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BiasSpec:
    r: float = 2.0
    b_fraction: float = 0.2

    def __post_init__(self):
        if not 1.0 < abs(self.r) <= 3.0:
            raise InvalidValue(f"bias rate must satisfy 1 < |r| <= 3, got {self.r}")
        if not 0.0 < self.b_fraction <= 1.0:
            raise InvalidValue("b_fraction must lie in (0, 1]")

    def n_biased(self, p_total: int, p_v: int) -> int:
        return int(min(p_v, max(1, round(self.b_fraction * p_total))))

    def to_dict(self):
        return asdict(self)


def _mix(base, rng, kind):
    """Column i of the output mixes base column i with base column i+1 (cyclic)."""
    nxt = np.roll(base, -1, axis=1)
    if kind == LINEAR:
        return 0.8 * base + 0.2 * nxt
    out = base + 0.4 * nxt + 0.4 * np.exp(nxt) + 0.4 * nxt ** 2 + 0.1 * nxt ** 3
    return out + rng.standard_normal(base.shape)


def _covariates(rng, kind, n, p_s, p_v):
    Z = rng.standard_normal((n, p_s))
    X = rng.standard_normal((n, p_v))
    S = _mix(Z, rng, kind) if p_s else Z
    if kind == LINEAR:
        V = 0.8 * X + 0.2 * np.roll(X, -1, axis=1) + rng.standard_normal((n, p_v))
    else:
        V = _mix(X, rng, kind) if p_v else X
    return S, V


def gen_covariates(spec: EnvSpec):
    """Draw the stable block S (n x p_s) and unstable block V (n x p_v)."""
    rng = np.random.default_rng(spec.seed)
    return _covariates(rng, spec.kind, spec.n, spec.p_s, spec.p_v)


def beta_stable(p_s: int) -> np.ndarray:
    return np.resize(BETA_PATTERN, p_s).astype(float)


def true_beta(p_s: int, p_v: int) -> np.ndarray:
    return np.concatenate([beta_stable(p_s), np.zeros(p_v)])


def outcome_function(S) -> np.ndarray:
    """Noise-free outcome: linear stable part plus the S_1 * S_2 interaction."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[1] < 2:
        raise TooFewStableColumns("the outcome needs at least two stable columns")
    return S @ beta_stable(S.shape[1]) + S[:, 0] * S[:, 1]


def gen_labels(S, V, noise_std: float = 0.3, rng=None) -> np.ndarray:
    """Y = S beta_s + V beta_v + S_1 S_2 + N(0, noise_std^2), with beta_v = 0."""
    f = outcome_function(S)
    del V  # zero coefficients
    rng = np.random.default_rng(rng)
    if noise_std == 0:
        return f
    return f + noise_std * rng.standard_normal(len(f))


def selection_probability(S, V, bias: BiasSpec, p_total: Optional[int] = None) -> np.ndarray:
    """Per-row acceptance probability prod_i |r|^(-5 D_i) over the biased columns."""
    S = np.asarray(S, dtype=float)
    V = np.asarray(V, dtype=float)
    p_total = p_total or S.shape[1] + V.shape[1]
    nb = bias.n_biased(p_total, V.shape[1])
    f = outcome_function(S)
    D = np.abs(f[:, None] - np.sign(bias.r) * V[:, :nb])
    return np.abs(bias.r) ** (-5.0 * D.sum(axis=1))


def bias_sample(S, V, Y, bias: BiasSpec, seed) -> np.ndarray:
    """Indices of rows kept by independent Bernoulli(Pr) thinning.

    ``Y`` is not used by the rule itself (it acts on the noise-free outcome)
    but is part of the signature so callers pass whole environments.
    """
    del Y
    pr = selection_probability(S, V, bias)
    keep = np.random.default_rng(seed).random(len(pr)) < pr
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        raise EmptySelection("bias sampling rejected every row; enlarge n")
    return idx


@dataclass
class Environment:
    S: np.ndarray
    V: np.ndarray
    Y: np.ndarray
    spec: EnvSpec
    bias: Optional[BiasSpec] = None
    drawn: int = 0

    @property
    def X(self) -> np.ndarray:
        return np.hstack([self.S, self.V])

    @property
    def beta(self) -> np.ndarray:
        return true_beta(self.spec.p_s, self.spec.p_v)

    def column_names(self):
        return [f"S_{i}" for i in range(self.spec.p_s)] + [f"V_{j}" for j in range(self.spec.p_v)]

    def sidecar(self) -> dict:
        return {"env": self.spec.to_dict(), "bias": None if self.bias is None else self.bias.to_dict(),
                "rows_drawn": self.drawn}


def make_environment(spec: EnvSpec, bias: Optional[BiasSpec] = None, batch: int = 20000,
                     max_draws: int = 20_000_000) -> Environment:
    """Generate ``spec.n`` rows, optionally thinned by the bias rule.

    With a bias, batches are drawn from one seeded stream and thinned until
    ``spec.n`` rows survive, so the result is a pure function of (spec, bias).
    """
    rng = np.random.default_rng(spec.seed)
    if bias is None:
        S, V = _covariates(rng, spec.kind, spec.n, spec.p_s, spec.p_v)
        Y = gen_labels(S, V, spec.noise_std, rng)
        return Environment(S, V, Y, spec, None, spec.n)
    parts, got, drawn = [], 0, 0
    while got < spec.n:
        if drawn >= max_draws:
            raise EmptySelection(f"only {got} of {spec.n} rows survived {drawn} draws")
        S, V = _covariates(rng, spec.kind, batch, spec.p_s, spec.p_v)
        Y = gen_labels(S, V, spec.noise_std, rng)
        pr = selection_probability(S, V, bias, spec.p_total)
        keep = rng.random(batch) < pr
        drawn += batch
        if keep.any():
            parts.append((S[keep], V[keep], Y[keep]))
            got += int(keep.sum())
    S = np.vstack([p[0] for p in parts])[: spec.n]
    V = np.vstack([p[1] for p in parts])[: spec.n]
    Y = np.concatenate([p[2] for p in parts])[: spec.n]
    return Environment(S, V, Y, spec, bias, drawn)


def write_environment_csv(env: Environment, path, extra: Optional[dict] = None) -> str:
    """Write ``S_*, V_*, Y`` columns plus a JSON sidecar next to ``path``."""
    header = env.column_names() + ["Y"]
    data = np.column_stack([env.S, env.V, env.Y])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    sidecar_path = str(path).rsplit(".", 1)[0] + ".json"
    meta = env.sidecar()
    if extra:
        meta.update(extra)
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return sidecar_path

"""Seeded multi-repeat experiment grids over synthetic environments."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .decorrelation import DecorConfig, learn_weights
from .errors import StableRulesError
from .evaluation import PANELS, PRODUCT, WEIGHTED, beta_errors, combine_beta_errors, correlation_profile, regression_metrics
from .models import SvmConfig, fit_dwr, fit_linear_baseline, fit_weighted_svr, predict
from .synthesis import NONLINEAR, BiasSpec, EnvSpec, make_environment

log = logging.getLogger(__name__)

METHODS = ("ols", "lasso", "ridge", "svm", "dwr", "dwr_svm", "our")
TEST_RS = (-3.0, -2.0, -1.5, 1.5, 2.0, 3.0)


@dataclass
class ExperimentConfig:
    methods: Sequence[str] = METHODS
    ns: Sequence[int] = (1000,)
    ps: Sequence[int] = (10,)
    repeats: int = 50
    env: str = NONLINEAR
    seed: int = 0
    noise_std: float = 0.3
    train_r: Optional[float] = None
    test_rs: Sequence[float] = TEST_RS
    test_n: Optional[int] = None
    decor: DecorConfig = field(default_factory=DecorConfig)
    our_C: float = 0.5
    svm_C: float = 1.0
    dwr_svm_C: float = 0.0
    epsilon: float = 0.1
    dwr_lambda: Optional[float] = None
    lasso_lambda: float = 1.0
    ridge_lambda: float = 1.0
    jobs: int = 1

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must be distinct")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if isinstance(self.decor, dict):
            self.decor = DecorConfig(**self.decor)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


def derive_seed(base: int, *path: int) -> int:
    return int(np.random.SeedSequence([int(base), *[int(x) for x in path]]).generate_state(1)[0])


def _svr(C, cfg):
    return SvmConfig(C=C, epsilon=cfg.epsilon)


def _test_envs(cfg, n, p, cell, rep):
    envs = []
    for k, r in enumerate(cfg.test_rs):
        spec = EnvSpec(cfg.env, cfg.test_n or n, p, seed=derive_seed(cfg.seed, cell, rep, k + 1),
                       noise_std=cfg.noise_std)
        envs.append((r, make_environment(spec, BiasSpec(r))))
    return envs


def _fit_methods(cfg, X, Y):
    """Fit every configured method; failures are returned in place of models."""
    models, meta = {}, {}
    needs_dwr = {"dwr", "dwr_svm"} & set(cfg.methods)
    dwr = None
    if needs_dwr:
        try:
            dwr = fit_dwr(X, Y, lam=cfg.dwr_lambda if cfg.dwr_lambda is not None else cfg.decor.gamma,
                          decor=cfg.decor)
            meta["dwr_converged"] = dwr.converged
        except StableRulesError as exc:
            dwr = exc
    ours = None
    if "our" in cfg.methods:
        try:
            ours = learn_weights(X, cfg.decor)
            meta["our_iterations"] = ours.iterations
        except StableRulesError as exc:
            ours = exc
    for m in cfg.methods:
        try:
            if m in ("ols", "lasso", "ridge"):
                lam = {"ols": 0.0, "lasso": cfg.lasso_lambda, "ridge": cfg.ridge_lambda}[m]
                models[m] = fit_linear_baseline(X, Y, m, lam)
            elif m == "svm":
                models[m] = fit_weighted_svr(X, Y, None, _svr(cfg.svm_C, cfg))
            elif m in ("dwr", "dwr_svm"):
                if isinstance(dwr, Exception):
                    raise dwr
                models[m] = dwr.model if m == "dwr" else fit_weighted_svr(X, Y, dwr.weights, _svr(cfg.dwr_svm_C, cfg))
            elif m == "our":
                if isinstance(ours, Exception):
                    raise ours
                models[m] = fit_weighted_svr(X, Y, ours.weights, _svr(cfg.our_C, cfg))
        except (StableRulesError, np.linalg.LinAlgError) as exc:
            models[m] = exc
    return models, meta


def _run_repeat(args):
    cfg, cell, n, p, rep = args
    seed = derive_seed(cfg.seed, cell, rep)
    spec = EnvSpec(cfg.env, n, p, seed=seed, noise_std=cfg.noise_std)
    env = make_environment(spec, BiasSpec(cfg.train_r) if cfg.train_r else None)
    tests = _test_envs(cfg, n, p, cell, rep)
    models, meta = _fit_methods(cfg, env.X, env.Y)
    out = {"cell": cell, "rep": rep, "seed": seed, "results": {}, "failures": [], "meta": meta}
    for m, model in models.items():
        if isinstance(model, Exception):
            out["failures"].append({"method": m, "error": str(model)})
            continue
        errs = beta_errors(model, env.beta, spec.split)
        rmse = {r: regression_metrics(predict(model, t.X), t.Y) for r, t in tests}
        out["results"][m] = {"beta_s_err": errs.beta_s_err, "beta_v_err": errs.beta_v_err, "rmse": rmse}
    return out


def _map(fn, tasks, jobs):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


@dataclass
class ExperimentReport:
    config: dict
    rows: List[dict]
    per_repeat: List[dict]
    failures: List[dict]
    seeds: List[dict]
    wall_time: float = 0.0

    def row(self, method, n=None, p=None) -> dict:
        for r in self.rows:
            if r["method"] == method and (n is None or r["n"] == n) and (p is None or r["p"] == p):
                return r
        raise KeyError(method)

    def to_json(self) -> str:
        """Deterministic JSON; wall time is left out so equal seeds give equal bytes."""
        return json.dumps({"config": self.config, "rows": self.rows, "per_repeat": self.per_repeat,
                           "failures": self.failures, "seeds": self.seeds},
                          indent=2, sort_keys=True, default=float)


def _aggregate(values):
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return float("nan"), float("nan")
    return float(a.mean()), float(a.std())


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run every (n, p) cell for ``cfg.repeats`` seeded repeats.

    Each repeat draws a training environment, fits all methods on it, scores
    coefficient errors against the true beta and RMSE on bias-shifted test
    environments. A failing method is recorded and the grid continues.
    """
    start = time.perf_counter()
    cells = [(n, p) for n in cfg.ns for p in cfg.ps]
    tasks = [(cfg, ci, n, p, rep) for ci, (n, p) in enumerate(cells) for rep in range(cfg.repeats)]
    outputs = _map(_run_repeat, tasks, cfg.jobs)
    rows, per_repeat, failures, seeds = [], [], [], []
    for ci, (n, p) in enumerate(cells):
        outs = [o for o in outputs if o["cell"] == ci]
        seeds.extend({"n": n, "p": p, "rep": o["rep"], "seed": o["seed"]} for o in outs)
        for o in outs:
            failures.extend({"n": n, "p": p, "rep": o["rep"], **f} for f in o["failures"])
        for m in cfg.methods:
            res = [o["results"][m] for o in outs if m in o["results"]]
            s_mean, s_std = _aggregate([r["beta_s_err"] for r in res])
            v_mean, v_std = _aggregate([r["beta_v_err"] for r in res])
            b_mean, b_std = _aggregate([(r["beta_s_err"] + r["beta_v_err"]) / 2 for r in res])
            row = {"n": n, "p": p, "method": m, "repeats": len(res), "failures": cfg.repeats - len(res),
                   **combine_beta_errors(s_mean, v_mean).as_dict(),
                   "beta_s_err_std": s_std, "beta_v_err_std": v_std, "beta_err_std": b_std}
            rmses = []
            for r in cfg.test_rs:
                mean, std = _aggregate([x["rmse"][r] for x in res])
                row[f"rmse_r={r:g}"] = mean
                row[f"rmse_r={r:g}_std"] = std
                rmses.append(mean)
            row["rmse_mean"] = float(np.mean(rmses)) if rmses else float("nan")
            rows.append(row)
            for o in outs:
                if m in o["results"]:
                    r = o["results"][m]
                    per_repeat.append({"n": n, "p": p, "rep": o["rep"], "method": m,
                                       "beta_s_err": r["beta_s_err"], "beta_v_err": r["beta_v_err"],
                                       **{f"rmse_r={k:g}": v for k, v in r["rmse"].items()}})
    return ExperimentReport(cfg.to_dict(), rows, per_repeat, failures, seeds, time.perf_counter() - start)


# --- C / gamma / lambda ablation -----------------------------------------------

@dataclass
class AblationConfig:
    gammas: Sequence[float] = (600.0, 800.0, 1000.0)
    lambdas: Sequence[float] = (0.0001, 0.0005, 0.001)
    Cs: Sequence[float] = (0.0, 0.5, 1.0)
    n: int = 1000
    p: int = 10
    repeats: int = 20
    env: str = NONLINEAR
    seed: int = 0
    noise_std: float = 0.3
    train_r: Optional[float] = None
    test_rs: Sequence[float] = TEST_RS
    decor: DecorConfig = field(default_factory=DecorConfig)
    epsilon: float = 0.1
    jobs: int = 1

    def to_dict(self):
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _ablation_repeat(args):
    cfg, rep = args
    seed = derive_seed(cfg.seed, 0, rep)
    spec = EnvSpec(cfg.env, cfg.n, cfg.p, seed=seed, noise_std=cfg.noise_std)
    env = make_environment(spec, BiasSpec(cfg.train_r) if cfg.train_r else None)
    exp_cfg = ExperimentConfig(methods=("our",), test_rs=cfg.test_rs, seed=cfg.seed, env=cfg.env,
                               noise_std=cfg.noise_std)
    tests = _test_envs(exp_cfg, cfg.n, cfg.p, 0, rep)
    out = []
    for g in cfg.gammas:
        for lam in cfg.lambdas:
            dc = replace(cfg.decor, gamma=g, lambda_norm=lam, lambda_sum=lam)
            try:
                weights = learn_weights(env.X, dc).weights
            except StableRulesError as exc:
                out.append({"gamma": g, "lambda": lam, "rep": rep, "error": str(exc)})
                continue
            for C in cfg.Cs:
                model = fit_weighted_svr(env.X, env.Y, weights, SvmConfig(C=C, epsilon=cfg.epsilon))
                e = beta_errors(model, env.beta, spec.split)
                rmse = float(np.mean([regression_metrics(predict(model, t.X), t.Y) for _, t in tests]))
                out.append({"gamma": g, "lambda": lam, "C": C, "rep": rep, "seed": seed,
                            "beta_s_err": e.beta_s_err, "beta_v_err": e.beta_v_err, "rmse": rmse})
    return out


def run_ablation(cfg: AblationConfig) -> ExperimentReport:
    """Sweep (gamma, lambda, C) for the reweighted SVR; lambda sets both quadratic terms."""
    start = time.perf_counter()
    outputs = _map(_ablation_repeat, [(cfg, rep) for rep in range(cfg.repeats)], cfg.jobs)
    flat = [r for o in outputs for r in o]
    failures = [r for r in flat if "error" in r]
    ok = [r for r in flat if "error" not in r]
    rows = []
    for g in cfg.gammas:
        for lam in cfg.lambdas:
            for C in cfg.Cs:
                res = [r for r in ok if (r["gamma"], r["lambda"], r["C"]) == (g, lam, C)]
                s_mean, s_std = _aggregate([r["beta_s_err"] for r in res])
                v_mean, v_std = _aggregate([r["beta_v_err"] for r in res])
                rm, rs = _aggregate([r["rmse"] for r in res])
                rows.append({"gamma": g, "lambda": lam, "C": C, "repeats": len(res),
                             **combine_beta_errors(s_mean, v_mean).as_dict(),
                             "beta_s_err_std": s_std, "beta_v_err_std": v_std,
                             "rmse": rm, "rmse_std": rs})
    seeds = sorted({(r["rep"], r["seed"]) for r in ok})
    return ExperimentReport(cfg.to_dict(), rows, ok, failures,
                            [{"rep": a, "seed": b} for a, b in seeds], time.perf_counter() - start)


# --- correlation profiles -------------------------------------------------------

@dataclass
class ProfileConfig:
    n: int = 2000
    p: int = 10
    seeds: int = 20
    env: str = NONLINEAR
    seed: int = 0
    noise_std: float = 0.3
    train_r: Optional[float] = None
    decor: DecorConfig = field(default_factory=DecorConfig)
    dwr_lambda: Optional[float] = None
    jobs: int = 1

    def to_dict(self):
        return asdict(self)


def profile_row(report: ExperimentReport, mode: str, weights: str) -> dict:
    for r in report.rows:
        if r["mode"] == mode and r["weights"] == weights:
            return r
    raise KeyError((mode, weights))


def _standardized(X):
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - X.mean(axis=0)) / sd


def _profile_repeat(args):
    cfg, rep = args
    seed = derive_seed(cfg.seed, 0, rep)
    spec = EnvSpec(cfg.env, cfg.n, cfg.p, seed=seed, noise_std=cfg.noise_std)
    env = make_environment(spec, BiasSpec(cfg.train_r) if cfg.train_r else None)
    X = env.X
    lam = cfg.dwr_lambda if cfg.dwr_lambda is not None else cfg.decor.gamma
    weights = {
        "uniform": None,
        "dwr": fit_dwr(X, env.Y, lam=lam, decor=cfg.decor).weights.w,
        "our": learn_weights(X, cfg.decor).weights.w,
    }
    Z = _standardized(env.V)
    out = {"rep": rep, "seed": seed, "summary": {}, "long": []}
    for mode in (PRODUCT, WEIGHTED):
        for name, w in weights.items():
            prof = correlation_profile(Z, w, mode)
            out["summary"][(mode, name)] = prof.summary()
            out["long"].extend((mode, name, panel, i, j, v) for panel, i, j, v in prof.long_rows())
    return out


def run_profiles(cfg: ProfileConfig) -> ExperimentReport:
    """Correlation profiles of the standardized unstable block under uniform, DWR and learned weights."""
    start = time.perf_counter()
    outputs = _map(_profile_repeat, [(cfg, rep) for rep in range(cfg.seeds)], cfg.jobs)
    rows = []
    for mode in (PRODUCT, WEIGHTED):
        for name in ("uniform", "dwr", "our"):
            row = {"mode": mode, "weights": name}
            for panel in PANELS:
                row[f"mean_abs_{panel}"], row[f"std_abs_{panel}"] = _aggregate(
                    [o["summary"][(mode, name)][panel] for o in outputs])
            rows.append(row)
    long_rows = [{"rep": o["rep"], "mode": m, "weights": w, "panel": panel, "i": i, "j": j, "corr": v}
                 for o in outputs for (m, w, panel, i, j, v) in o["long"]]
    seeds = [{"rep": o["rep"], "seed": o["seed"]} for o in outputs]
    return ExperimentReport(cfg.to_dict(), rows, long_rows, [], seeds, time.perf_counter() - start)


# --- writers --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_csv(rows: List[dict], path) -> None:
    """CSV with floats at full precision so repeated runs are byte-identical."""
    if not rows:
        open(path, "w").close()
        return
    header = list(rows[0].keys())
    for r in rows[1:]:
        header.extend(k for k in r if k not in header)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([_fmt(r.get(k, "")) for k in header])


def rsweep_rows(report: ExperimentReport) -> List[dict]:
    """Long-format (method, r, RMSE) rows for plotting error against bias rate."""
    out = []
    rs = report.config.get("test_rs", [])
    for row in report.rows:
        for r in rs:
            out.append({"n": row["n"], "p": row["p"], "method": row["method"], "r": float(r),
                        "rmse": row[f"rmse_r={r:g}"], "rmse_std": row[f"rmse_r={r:g}_std"]})
    return out


def write_report(report: ExperimentReport, csv_path, json_path=None, extra_csv: Optional[Dict[str, List[dict]]] = None):
    write_rows_csv(report.rows, csv_path)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
    for path, rows in (extra_csv or {}).items():
        write_rows_csv(rows, path)

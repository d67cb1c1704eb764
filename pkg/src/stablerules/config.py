"""Flat key-value run configuration with precedence flags > env > file > defaults."""

from __future__ import annotations

import json
import os
from typing import Any, Dict, Optional

from .errors import ConfigTypeError, UnknownKey

SEED_ENV = "STABLERULES_SEED"

# key -> (default, accepted types); None in the default means "unset"
SCHEMA: Dict[str, tuple] = {
    "seed": (0, (int,)),
    "jobs": (1, (int,)),
    # synthesis
    "env": ("nonlinear", (str,)),
    "n": (1000, (int,)),
    "p": (10, (int,)),
    "noise_std": (0.3, (int, float)),
    "r": (None, (int, float)),
    "b_fraction": (0.2, (int, float)),
    # mining
    "min_support": (0.05, (int, float)),
    "min_confidence": (0.6, (int, float)),
    "max_antecedent": (4, (int,)),
    # selection
    "max_rules": (20, (int,)),
    "min_rules": (1, (int,)),
    "folds": (5, (int,)),
    # decorrelation
    "degree": (2, (int,)),
    "gamma": (600.0, (int, float)),
    "lambda_norm": (0.0005, (int, float)),
    "lambda_sum": (0.0005, (int, float)),
    "max_iters": (2000, (int,)),
    "step_size": (0.01, (int, float)),
    "tolerance": (1e-8, (int, float)),
    # models
    "C": (0.5, (int, float)),
    "epsilon": (0.1, (int, float)),
    "lam": (1.0, (int, float)),
    "dwr_lambda": (None, (int, float)),
    # experiments
    "repeats": (50, (int,)),
    "train_r": (None, (int, float)),
}


def defaults() -> Dict[str, Any]:
    return {k: v[0] for k, v in SCHEMA.items()}


def check_entry(key: str, value):
    if key not in SCHEMA:
        raise UnknownKey(key)
    types = SCHEMA[key][1]
    if value is None:
        return value
    if isinstance(value, bool) or not isinstance(value, types):
        names = " or ".join(t.__name__ for t in types)
        raise ConfigTypeError(f"key {key!r} expects {names}, got {type(value).__name__}")
    return float(value) if float in types and not isinstance(value, float) else value


def load_config(path) -> Dict[str, Any]:
    """Read a flat JSON object; an empty file means no overrides."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return {}
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigTypeError("configuration file must hold a JSON object")
    return {k: check_entry(k, v) for k, v in data.items()}


def resolve(file_values: Optional[dict] = None, flags: Optional[dict] = None,
            environ: Optional[dict] = None) -> Dict[str, Any]:
    """Merge defaults, file values, the seed environment variable and explicit flags."""
    environ = os.environ if environ is None else environ
    out = defaults()
    for k, v in (file_values or {}).items():
        out[k] = check_entry(k, v)
    if environ.get(SEED_ENV):
        try:
            out["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigTypeError(f"{SEED_ENV} must be an integer") from None
    for k, v in (flags or {}).items():
        if v is not None:
            out[k] = check_entry(k, v)
    return out

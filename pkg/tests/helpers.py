"""Shared instance generators and oracles for the selection tests."""

import itertools

import numpy as np

from stablerules.mining import Rule, RuleMatrix
from stablerules.selection import _holdout_accuracy, holdout_split


def random_rule_instance(seed, width, n=60):
    """Rule matrix where the first half of the rules track the label and the rest are noise."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    M = np.zeros((n, width))
    rules = []
    for j in range(width):
        q = rng.uniform(0.5, 1.0) if j < width // 2 else 0.5
        cons = 1 if rng.random() < 0.5 else -1
        fire = np.where(y == cons, rng.random(n) < q, rng.random(n) < 1 - q)
        M[:, j] = fire
        conf = (fire & (y == cons)).sum() / max(fire.sum(), 1)
        rules.append(Rule(frozenset({f"i{j}"}), cons, 0.1, float(np.clip(conf, 0.05, 0.99)), 1.0))
    return RuleMatrix(M, rules), y


def exhaustive_best(rm, y, bounds, seed, holdout=0.2):
    """Best held-out accuracy over every subset with size inside the bounds."""
    train, test = holdout_split(len(y), holdout, seed)
    best = -1.0
    for k in range(bounds.min_rules, min(bounds.max_rules, rm.width) + 1):
        for cols in itertools.combinations(range(rm.width), k):
            best = max(best, _holdout_accuracy(rm, y, list(cols), train, test)[0])
    return best

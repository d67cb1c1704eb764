"""Rule scoring, greedy rule elimination and per-item pruning."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import LabelVector, ValidatedDataset
from .errors import BoundsInfeasible, EmptyRuleSet, InvalidLabel, InvalidValue, NonConvergence
from .mining import Rule, RuleMatrix, build_rule_matrix, rule_stats, write_rules_text
from .models import SvmConfig, fit_weighted_svm

log = logging.getLogger(__name__)

GRAD_TOL = 1e-6
MAX_ITERS = 5000


@dataclass
class RuleScoreModel:
    """Linear score ``h = (RM * theta) w + b`` over rule activations."""

    w: np.ndarray
    b: float
    theta: np.ndarray
    objective: List[float] = field(default_factory=list)
    grad_norm: float = 0.0
    iterations: int = 0

    def decision(self, activations) -> np.ndarray:
        return (np.asarray(activations, dtype=float) * self.theta) @ self.w + self.b

    def predict(self, activations) -> np.ndarray:
        return np.where(self.decision(activations) >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class SelectionBounds:
    max_rules: int
    min_rules: int = 1

    def __post_init__(self):
        if self.min_rules < 1 or self.max_rules < 1:
            raise InvalidValue("rule-count bounds must be >= 1")
        if self.min_rules > self.max_rules:
            raise InvalidValue(f"min_rules {self.min_rules} exceeds max_rules {self.max_rules}")


def _labels(labels) -> np.ndarray:
    y = np.asarray(getattr(labels, "values", labels), dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidLabel("rule scoring needs labels in {-1, +1}")
    return y


def _squared_hinge(Z, y, w, b):
    slack = np.maximum(0.0, 1.0 - y * (Z @ w + b))
    f = float(w @ w + slack @ slack)
    coef = -2.0 * slack * y
    return f, 2.0 * w + Z.T @ coef, float(coef.sum())


def _fit_scores(Z, y, max_iters=MAX_ITERS, tol=GRAD_TOL):
    """Gradient descent on the squared-hinge objective.

    Each iteration starts from a Barzilai-Borwein step and backtracks until the
    Armijo condition holds, so the objective never increases.
    """
    r = Z.shape[1]
    w, b = np.zeros(r), 0.0
    f, gw, gb = _squared_hinge(Z, y, w, b)
    history = [f]
    # the gradient is Lipschitz with constant at most 2 (1 + ||[Z, 1]||^2)
    base = 1.0 / (2.0 * (1.0 + np.linalg.norm(np.hstack([Z, np.ones((len(y), 1))]), 2) ** 2))
    step = base
    gnorm = math.sqrt(float(gw @ gw) + gb * gb)
    it = 0
    while gnorm >= tol and it < max_iters:
        it += 1
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new, gw_new, gb_new = _squared_hinge(Z, y, w_new, b_new)
            if f_new <= f - 1e-4 * step * gnorm ** 2 or step <= base:
                break
            step = max(0.5 * step, base)
        dw, db = w_new - w, b_new - b
        yw, yb = gw_new - gw, gb_new - gb
        sy = float(dw @ yw) + db * yb
        w, b, gw, gb = w_new, b_new, gw_new, gb_new
        f = f_new
        history.append(f)
        gnorm = math.sqrt(float(gw @ gw) + gb * gb)
        step = (float(dw @ dw) + db * db) / sy if sy > 0 else base
        step = max(step, base)
    return w, b, history, gnorm, it


def score_rules(rm: RuleMatrix, labels, max_iters: int = MAX_ITERS, tol: float = GRAD_TOL) -> RuleScoreModel:
    """Minimize ``||w||^2 + ||max(0, 1 - y h(x))||^2`` over the rule weights.

    Raises NonConvergence (carrying the final model) when the iteration cap is
    hit before the gradient norm drops below ``tol``.
    """
    if rm.width == 0:
        raise EmptyRuleSet("cannot score an empty rule set")
    y = _labels(labels)
    if len(y) != rm.values.shape[0]:
        raise InvalidValue("label count does not match rule-matrix rows")
    theta = rm.scores
    w, b, history, gnorm, it = _fit_scores(rm.scaled(), y, max_iters, tol)
    model = RuleScoreModel(w, b, theta, history, gnorm, it)
    if gnorm >= tol:
        raise NonConvergence(f"rule scoring stopped after {it} iterations, gradient norm {gnorm:.3g}", model,
                             module="selection")
    return model


def _score_lenient(rm, y):
    try:
        return score_rules(rm, y)
    except NonConvergence as exc:
        log.warning("%s; using the last iterate", exc)
        return exc.result


def holdout_split(n: int, fraction: float = 0.2, seed: int = 0):
    """Seeded (train, held-out) index split with ``ceil(fraction * n)`` held out."""
    perm = np.random.default_rng(seed).permutation(n)
    k = min(max(1, math.ceil(fraction * n)), n - 1)
    return np.sort(perm[k:]), np.sort(perm[:k])


def _holdout_accuracy(rm: RuleMatrix, y, cols, train, test) -> tuple:
    sub = rm.take_rules(cols)
    model = _score_lenient(sub.take_rows(train), y[train])
    acc = float(np.mean(model.predict(sub.values[test]) == y[test]))
    return acc, model


@dataclass
class SelectionStep:
    removed: int
    accuracy: float
    accepted: bool
    forced: bool = False

    def to_dict(self):
        return {"removed": self.removed, "accuracy": self.accuracy,
                "accepted": self.accepted, "forced": self.forced}


@dataclass
class SelectionResult:
    indices: List[int]
    rules: List[Rule]
    accuracy: float
    history: List[SelectionStep] = field(default_factory=list)

    @property
    def best_trail(self) -> List[float]:
        """Held-out accuracy after each accepted, unforced step."""
        return [s.accuracy for s in self.history if s.accepted and not s.forced]

    def provenance(self) -> dict:
        return {"selected": self.indices, "accuracy": self.accuracy,
                "steps": [s.to_dict() for s in self.history]}


def rules_selection(rm: RuleMatrix, labels, bounds: SelectionBounds, seed: int = 0,
                    holdout: float = 0.2) -> SelectionResult:
    """Greedy backward elimination by smallest squared rule weight.

    Rules are first dropped unconditionally until at most ``bounds.max_rules``
    remain. After that a removal is kept only when held-out accuracy does not
    fall below the best seen; the first rejected removal, or reaching
    ``bounds.min_rules``, ends the search.
    """
    if rm.width == 0:
        raise EmptyRuleSet("no rules to select from")
    if rm.width < bounds.min_rules:
        raise BoundsInfeasible(f"{rm.width} rules available but at least {bounds.min_rules} required")
    y = _labels(labels)
    train, test = holdout_split(len(y), holdout, seed)
    current = list(range(rm.width))
    history: List[SelectionStep] = []

    acc, model = _holdout_accuracy(rm, y, current, train, test)
    while len(current) > bounds.max_rules:
        drop = current[int(np.argmin(model.w ** 2))]
        current.remove(drop)
        acc, model = _holdout_accuracy(rm, y, current, train, test)
        history.append(SelectionStep(drop, acc, True, forced=True))

    best = acc
    history.append(SelectionStep(-1, acc, True))
    while len(current) > bounds.min_rules:
        drop = current[int(np.argmin(model.w ** 2))]
        candidate = [c for c in current if c != drop]
        cand_acc, cand_model = _holdout_accuracy(rm, y, candidate, train, test)
        if cand_acc >= best:
            current, model, best = candidate, cand_model, cand_acc
            history.append(SelectionStep(drop, cand_acc, True))
        else:
            history.append(SelectionStep(drop, cand_acc, False))
            break
    return SelectionResult(current, [rm.rules[i] for i in current], best, history)


# --- item pruning --------------------------------------------------------------

def kfold_indices(n: int, folds: int, seed: int = 0):
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cv_accuracy(rules: Sequence[Rule], ds: ValidatedDataset, folds: int = 5, seed: int = 0,
                cfg: Optional[SvmConfig] = None) -> float:
    """Mean k-fold accuracy of a hinge-loss classifier on score-scaled rule activations."""
    Z = build_rule_matrix(ds, rules).scaled()
    y = ds.y
    accs = []
    for test in kfold_indices(ds.n, folds, seed):
        train = np.setdiff1d(np.arange(ds.n), test)
        model = fit_weighted_svm(Z[train], y[train], None, cfg or SvmConfig())
        pred = np.where(Z[test] @ model.beta + model.b >= 0, 1.0, -1.0)
        accs.append(np.mean(pred == y[test]))
    return float(np.mean(accs))


def delete_item(rules: Sequence[Rule], item: str, ds: ValidatedDataset) -> List[Rule]:
    """Remove ``item`` from every antecedent and refresh the rule statistics.

    Rules left with an empty antecedent, or that never fire with their class,
    are discarded.
    """
    out = []
    for r in rules:
        if item not in r.antecedent:
            out.append(r)
            continue
        ant = r.antecedent - {item}
        if not ant:
            continue
        updated = rule_stats(ant, r.consequent, ds)
        if updated.confidence > 0:
            out.append(updated)
    return out


@dataclass
class ItemStep:
    item: str
    accuracy: float
    accepted: bool
    n_rules: int

    def to_dict(self):
        return {"item": self.item, "accuracy": self.accuracy, "accepted": self.accepted, "n_rules": self.n_rules}


@dataclass
class ItemReduceResult:
    rules: List[Rule]
    accuracy: float
    history: List[ItemStep] = field(default_factory=list)

    def provenance(self) -> dict:
        return {"final_accuracy": self.accuracy, "n_rules": len(self.rules),
                "deletions": [s.to_dict() for s in self.history]}


def item_reduce(rules: Sequence[Rule], ds: ValidatedDataset, folds: int = 5, seed: int = 0,
                cfg: Optional[SvmConfig] = None) -> ItemReduceResult:
    """Greedily delete single items while cross-validated accuracy does not drop.

    Each pass tries every distinct item; the best candidate wins, with ties
    going to the item found in the most rules and then to the smallest name.
    """
    if folds < 2:
        raise InvalidValue("folds must be >= 2")
    current = list(rules)
    if not current:
        return ItemReduceResult([], float("nan"), [])
    best = cv_accuracy(current, ds, folds, seed, cfg)
    history: List[ItemStep] = []
    while True:
        items = sorted({i for r in current for i in r.antecedent})
        choice = None
        for item in items:
            cand = delete_item(current, item, ds)
            if not cand:
                continue
            acc = cv_accuracy(cand, ds, folds, seed, cfg)
            count = sum(item in r.antecedent for r in current)
            key = (acc, count)
            if choice is None or key > choice[0]:
                choice = (key, item, cand)
        if choice is None:
            break
        (acc, _), item, cand = choice
        if acc >= best:
            current, best = cand, acc
            history.append(ItemStep(item, acc, True, len(cand)))
        else:
            history.append(ItemStep(item, acc, False, len(cand)))
            break
    return ItemReduceResult(current, best, history)


def write_selection(rules: Sequence[Rule], path, provenance: dict) -> str:
    """Write rules in the text format plus a JSON provenance sidecar."""
    write_rules_text(rules, path)
    sidecar = str(path).rsplit(".", 1)[0] + ".json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(provenance, fh, indent=2, sort_keys=True)
    return sidecar

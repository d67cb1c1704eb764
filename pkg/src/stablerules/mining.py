"""Apriori frequent itemsets, class association rules, and rule matrices."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .core import BINARY, FeatureMatrix, ValidatedDataset
from .errors import EmptyDatabase, InvalidValue, MissingSupportEntry, UnknownItem

POSITIVE = "positive"
NEGATIVE = "negative"
CLASS_PREFIX = "__class__="

DEFAULT_MIN_SUPPORT = 0.05
DEFAULT_MIN_CONFIDENCE = 0.6
DEFAULT_MAX_ANTECEDENT = 4


def class_item(label) -> str:
    return f"{CLASS_PREFIX}{int(label):+d}"


def _sort_key(itemset):
    return (len(itemset), sorted(itemset))


@dataclass(frozen=True)
class Rule:
    antecedent: frozenset
    consequent: int
    support: float
    confidence: float
    lift: float

    def __post_init__(self):
        object.__setattr__(self, "antecedent", frozenset(self.antecedent))
        if not self.antecedent:
            raise InvalidValue("rule antecedent must be nonempty")
        if self.consequent not in (-1, 1):
            raise InvalidValue(f"consequent must be -1 or +1, got {self.consequent}")

    @property
    def score(self) -> float:
        """Activation scale: confidence for positive rules, its inverse for negative ones."""
        return self.confidence if self.consequent == 1 else 1.0 / self.confidence

    @property
    def key(self):
        return (len(self.antecedent), tuple(sorted(self.antecedent)), self.consequent)

    def to_line(self) -> str:
        items = ",".join(sorted(self.antecedent))
        return "\t".join(
            [items, f"{self.consequent:+d}", repr(self.support), repr(self.confidence), repr(self.lift)]
        )

    @classmethod
    def from_line(cls, line: str) -> "Rule":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 5:
            raise InvalidValue(f"expected 5 tab-separated fields, got {len(parts)}")
        items, consequent, support, confidence, lift = parts
        return cls(frozenset(items.split(",")), int(consequent), float(support), float(confidence), float(lift))

    def to_dict(self) -> dict:
        return {
            "antecedent": sorted(self.antecedent),
            "consequent": self.consequent,
            "support": self.support,
            "confidence": self.confidence,
            "lift": self.lift,
        }

    @classmethod
    def from_dict(cls, d) -> "Rule":
        return cls(frozenset(d["antecedent"]), int(d["consequent"]), float(d["support"]),
                   float(d["confidence"]), float(d["lift"]))


def mine_frequent_itemsets(transactions: Sequence[Iterable[str]], min_support: float,
                           max_len: Optional[int] = None) -> Dict[frozenset, float]:
    """Level-wise Apriori.

    Returns a dict mapping every itemset with support >= ``min_support``
    (optionally capped at ``max_len`` items) to its exact support count/n.
    """
    if not 0.0 < min_support <= 1.0:
        raise InvalidValue(f"min_support must lie in (0, 1], got {min_support}")
    db = [frozenset(t) for t in transactions]
    n = len(db)
    if n == 0:
        raise EmptyDatabase("no transactions")
    # Small tolerance so that e.g. 0.3 * 10 still admits count 3.
    min_count = min_support * n - 1e-9 * n

    counts: Dict[frozenset, int] = {}
    for t in db:
        for item in t:
            key = frozenset((item,))
            counts[key] = counts.get(key, 0) + 1
    level = {s: c for s, c in counts.items() if c >= min_count}
    frequent = dict(level)
    k = 1
    while level and (max_len is None or k < max_len):
        k += 1
        candidates = _apriori_gen(list(level), k)
        if not candidates:
            break
        cand_counts = dict.fromkeys(candidates, 0)
        for t in db:
            if len(t) < k:
                continue
            for c in candidates:
                if c <= t:
                    cand_counts[c] += 1
        level = {s: c for s, c in cand_counts.items() if c >= min_count}
        frequent.update(level)
    return {s: frequent[s] / n for s in sorted(frequent, key=_sort_key)}


def _apriori_gen(prev: List[frozenset], k: int) -> List[frozenset]:
    """Join (k-1)-itemsets sharing k-2 items, then prune by downward closure."""
    prev_set = set(prev)
    ordered = sorted(tuple(sorted(s)) for s in prev)
    out = set()
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a[:-1] != b[:-1]:
                break
            cand = frozenset(a) | frozenset(b)
            if all(frozenset(sub) in prev_set for sub in combinations(sorted(cand), k - 1)):
                out.add(cand)
    return sorted(out, key=_sort_key)


def derive_rules(itemsets: Dict[frozenset, float], min_confidence: float, consequent: int,
                 n: Optional[int] = None, max_antecedent: Optional[int] = None) -> List[Rule]:
    """Every strong rule ``A => class`` supported by the mined itemsets.

    ``itemsets`` must contain the class item used for ``consequent`` (see
    :func:`class_item`). ``n`` is accepted for interface symmetry; supports are
    already fractions.
    """
    target = class_item(consequent)
    c_key = frozenset((target,))
    rules = []
    for itemset, supp in itemsets.items():
        if target not in itemset or len(itemset) < 2:
            continue
        antecedent = itemset - c_key
        if any(i.startswith(CLASS_PREFIX) for i in antecedent):
            continue
        if max_antecedent is not None and len(antecedent) > max_antecedent:
            continue
        if antecedent not in itemsets:
            raise MissingSupportEntry(f"support of antecedent {sorted(antecedent)} missing")
        if c_key not in itemsets:
            raise MissingSupportEntry(f"support of consequent {target} missing")
        conf = supp / itemsets[antecedent]
        if conf + 1e-12 < min_confidence:
            continue
        rules.append(Rule(antecedent, int(consequent), supp, conf, conf / itemsets[c_key]))
    rules.sort(key=rule_sort_key)
    return rules


def rule_sort_key(rule: Rule):
    """Higher score first, then shorter antecedent, then lexicographic."""
    return (-rule.score, len(rule.antecedent), tuple(sorted(rule.antecedent)))


def dataset_transactions(ds: ValidatedDataset, with_class: bool = True) -> List[frozenset]:
    """One transaction per row: names of the 1-valued binary columns (+ class item)."""
    X = ds.X
    names = np.asarray(ds.features.column_names, dtype=object)
    out = []
    for i in range(ds.n):
        items = set(names[X[i] > 0.5])
        if with_class:
            items.add(class_item(ds.y[i]))
        out.append(frozenset(items))
    return out


def mine_rules(ds: ValidatedDataset, min_support: float = DEFAULT_MIN_SUPPORT,
               min_confidence: float = DEFAULT_MIN_CONFIDENCE,
               max_antecedent: int = DEFAULT_MAX_ANTECEDENT):
    """Mine class rules on a one-hot dataset. Returns ``(positive_rules, negative_rules)``."""
    transactions = dataset_transactions(ds)
    itemsets = mine_frequent_itemsets(transactions, min_support, max_len=max_antecedent + 1)
    out = []
    for label in (1, -1):
        if frozenset((class_item(label),)) not in itemsets:
            out.append([])
            continue
        out.append(derive_rules(itemsets, min_confidence, label, ds.n, max_antecedent))
    return out[0], out[1]


def rule_stats(antecedent, consequent: int, ds: ValidatedDataset) -> Rule:
    """Recompute support/confidence/lift of ``antecedent => consequent`` on ``ds``."""
    cols = _column_indices(ds.features, [antecedent])
    fires = np.all(ds.X[:, cols[0]] > 0.5, axis=1)
    hit = ds.y == consequent
    supp_a = fires.mean()
    supp = (fires & hit).mean()
    supp_c = hit.mean()
    conf = supp / supp_a if supp_a > 0 else 0.0
    lift = conf / supp_c if supp_c > 0 else 0.0
    return Rule(frozenset(antecedent), int(consequent), float(supp), float(conf), float(lift))


@dataclass(frozen=True)
class RuleMatrix:
    values: np.ndarray
    rules: tuple
    class_tag: Optional[str] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "rules", tuple(self.rules))
        if values.ndim != 2 or values.shape[1] != len(self.rules):
            raise InvalidValue(f"rule matrix shape {values.shape} does not match {len(self.rules)} rules")

    @property
    def width(self) -> int:
        return len(self.rules)

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rules], dtype=float)

    def scaled(self) -> np.ndarray:
        """Activations multiplied column-wise by each rule's score."""
        return self.values * self.scores

    def take_rules(self, idx) -> "RuleMatrix":
        idx = [int(i) for i in idx]
        return RuleMatrix(self.values[:, idx], tuple(self.rules[i] for i in idx), self.class_tag)

    def take_rows(self, idx) -> "RuleMatrix":
        return RuleMatrix(self.values[np.asarray(idx, dtype=int)], self.rules, self.class_tag)


def _column_indices(features: FeatureMatrix, antecedents):
    index = {name: j for j, name in enumerate(features.column_names)}
    out = []
    for ant in antecedents:
        missing = sorted(i for i in ant if i not in index)
        if missing:
            raise UnknownItem(f"items {missing} are not dataset columns")
        out.append([index[i] for i in sorted(ant)])
    return out


def build_rule_matrix(ds: ValidatedDataset, rules: Sequence[Rule], class_tag: Optional[str] = None) -> RuleMatrix:
    """Entry (i, j) is 1 iff sample i has every antecedent item of rule j."""
    kinds = set(ds.features.column_kinds)
    if kinds - {BINARY}:
        values = ds.X
        if not np.all((values == 0) | (values == 1)):
            raise InvalidValue("rule matrices need a one-hot (0/1) dataset")
    cols = _column_indices(ds.features, [r.antecedent for r in rules])
    present = ds.X > 0.5
    M = np.zeros((ds.n, len(rules)))
    for j, c in enumerate(cols):
        M[:, j] = np.all(present[:, c], axis=1)
    return RuleMatrix(M, tuple(rules), class_tag)


def concat_rule_matrices(*matrices: RuleMatrix) -> RuleMatrix:
    tags = {m.class_tag for m in matrices}
    tag = tags.pop() if len(tags) == 1 else None
    return RuleMatrix(
        np.hstack([m.values for m in matrices]),
        tuple(r for m in matrices for r in m.rules),
        tag,
    )


def write_rules_text(rules: Sequence[Rule], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rules:
            fh.write(r.to_line() + "\n")


def read_rules_text(path) -> List[Rule]:
    with open(path, encoding="utf-8") as fh:
        return [Rule.from_line(line) for line in fh if line.strip()]


def rules_to_json(rules: Sequence[Rule]) -> str:
    return json.dumps([r.to_dict() for r in rules], indent=2)


def rules_from_json(text: str) -> List[Rule]:
    return [Rule.from_dict(d) for d in json.loads(text)]

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablerules.core import BINARY, FeatureMatrix, validate_dataset
from stablerules.errors import EmptyDatabase, MissingSupportEntry, UnknownItem
from stablerules.mining import (Rule, build_rule_matrix, class_item, derive_rules, mine_frequent_itemsets,
                                mine_rules, read_rules_text, rule_stats, rules_from_json, rules_to_json,
                                write_rules_text)


def brute_force_itemsets(transactions, min_support):
    db = [frozenset(t) for t in transactions]
    items = sorted(set().union(*db))
    out = {}
    for k in range(1, len(items) + 1):
        for combo in combinations(items, k):
            s = frozenset(combo)
            supp = sum(s <= t for t in db) / len(db)
            if supp >= min_support - 1e-12:
                out[s] = supp
    return out


def random_db(rng, n_items, n_trans):
    items = [chr(ord("a") + i) for i in range(n_items)]
    p = rng.uniform(0.2, 0.8)
    return [[it for it in items if rng.random() < p] for _ in range(n_trans)]


class TestApriori:
    def test_toy(self):
        got = mine_frequent_itemsets([["A", "B"], ["A", "B"], ["A", "C"], ["B"]], 0.5)
        assert got == {frozenset("A"): 0.75, frozenset("B"): 0.75, frozenset("AB"): 0.5}

    def test_nothing_qualifies(self):
        assert mine_frequent_itemsets([["A"], ["B"]], 1.0 - 1e-6) == {}

    def test_singleton(self):
        assert mine_frequent_itemsets([["A"]], 1.0) == {frozenset("A"): 1.0}

    def test_empty_database(self):
        with pytest.raises(EmptyDatabase):
            mine_frequent_itemsets([], 0.5)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            db = random_db(rng, int(rng.integers(1, 13)), int(rng.integers(1, 30)))
            ms = float(rng.choice([0.05, 0.1, 0.2, 0.34, 0.5]))
            if not any(db):
                continue
            assert mine_frequent_itemsets(db, ms) == brute_force_itemsets(db, ms)

    @given(st.lists(st.sets(st.sampled_from("abcdefg"), min_size=1), min_size=1, max_size=25),
           st.sampled_from([0.1, 0.2, 0.3, 0.5]))
    def test_downward_closed(self, db, ms):
        got = mine_frequent_itemsets(db, ms)
        for s, supp in got.items():
            for k in range(1, len(s)):
                for sub in combinations(sorted(s), k):
                    assert got[frozenset(sub)] >= supp


class TestRules:
    def test_independence_lift(self):
        A, C = frozenset({"a"}), frozenset({class_item(1)})
        rules = derive_rules({A: 0.6, C: 0.5, A | C: 0.3}, 0.5, 1)
        assert len(rules) == 1
        assert rules[0].confidence == pytest.approx(0.5)
        assert rules[0].lift == pytest.approx(1.0)

    def test_exact_implication_only(self):
        db = [["a", class_item(1)], ["a", class_item(1)], ["b", class_item(1)], ["b", class_item(-1)]]
        rules = derive_rules(mine_frequent_itemsets(db, 0.25), 1.0, 1)
        assert [sorted(r.antecedent) for r in rules] == [["a"]]

    def test_missing_support(self):
        with pytest.raises(MissingSupportEntry):
            derive_rules({frozenset({"a", class_item(1)}): 0.3, frozenset({class_item(1)}): 0.5}, 0.1, 1)

    def test_brute_force_rules(self):
        db = [["A", "B", class_item(1)], ["A", "B", class_item(1)], ["A", "C", class_item(-1)], ["B", class_item(1)]]
        n = len(db)
        got = derive_rules(mine_frequent_itemsets(db, 0.25), 0.5, 1)
        expected = set()
        for k in (1, 2, 3):
            for ant in combinations("ABC", k):
                a = frozenset(ant)
                sa = sum(a <= frozenset(t) for t in db) / n
                sac = sum(a | {class_item(1)} <= frozenset(t) for t in db) / n
                if sa >= 0.25 and sac >= 0.25 and sac / sa >= 0.5:
                    expected.add(a)
        assert {r.antecedent for r in got} == expected

    def test_negative_score_inverts(self):
        r = Rule(frozenset({"a"}), -1, 0.2, 0.8, 1.1)
        assert r.score == pytest.approx(1.25)

    def test_text_and_json_round_trip(self, tmp_path):
        rules = [Rule(frozenset({"a", "b"}), 1, 0.1, 0.7, 1.4), Rule(frozenset({"c"}), -1, 0.2, 0.9, 1.8)]
        path = tmp_path / "r.txt"
        write_rules_text(rules, path)
        assert read_rules_text(path) == rules
        assert rules_from_json(rules_to_json(rules)) == rules
        assert path.read_text().splitlines()[0] == "a,b\t+1\t0.1\t0.7\t1.4"


def toy_dataset():
    X = np.array([[1, 1, 1, 0], [1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 1]], dtype=float)
    fm = FeatureMatrix(X, ("A", "B", "C", "D"), (BINARY,) * 4)
    return validate_dataset(fm, [1, 1, -1, -1, 1])


class TestRuleMatrix:
    def test_subset_semantics(self):
        ds = toy_dataset()
        rules = [Rule(frozenset("AB"), 1, 0.1, 0.9, 1.0), Rule(frozenset("D"), -1, 0.1, 0.6, 1.0),
                 Rule(frozenset("AC"), -1, 0.1, 0.7, 1.0)]
        rm = build_rule_matrix(ds, rules)
        assert rm.values[0, 0] == 1.0 and rm.values[0, 1] == 0.0
        names = ds.features.column_names
        for i in range(ds.n):
            present = {names[j] for j in range(4) if ds.X[i, j] == 1}
            for j, r in enumerate(rules):
                assert rm.values[i, j] == float(r.antecedent <= present)

    def test_unknown_item(self):
        with pytest.raises(UnknownItem):
            build_rule_matrix(toy_dataset(), [Rule(frozenset("Z"), 1, 0.1, 0.9, 1.0)])

    def test_scaled_uses_scores(self):
        rules = [Rule(frozenset("A"), 1, 0.1, 0.8, 1.0), Rule(frozenset("B"), -1, 0.1, 0.5, 1.0)]
        rm = build_rule_matrix(toy_dataset(), rules)
        np.testing.assert_allclose(rm.scaled()[0], [0.8, 2.0])

    def test_mine_rules_statistics_consistent(self):
        ds = toy_dataset()
        pos, neg = mine_rules(ds, 0.2, 0.6, 3)
        for r in list(pos) + list(neg):
            again = rule_stats(r.antecedent, r.consequent, ds)
            assert again.support == pytest.approx(r.support)
            assert again.confidence == pytest.approx(r.confidence)
            assert r.score < np.inf

"""Tabular data preparation: CSV loading, binning, one-hot encoding, imputation."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import BINARY, FeatureMatrix, LabelVector, ValidatedDataset
from .errors import (AllMissingColumn, DegenerateColumn, InvalidValue, ParseError,
                     SchemaMismatch)
from .models import SvmConfig, fit_weighted_svm
from .selection import kfold_indices

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
BINARY_KIND = "binary"
LABEL = "label"
SCHEMA_KINDS = (CONTINUOUS, CATEGORICAL, BINARY_KIND, LABEL)
MISSING_TOKENS = {"", "na", "nan", "null", "?"}

EQUAL_WIDTH = "equal_width"
QUANTILE = "quantile"


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    strategy: Optional[str] = None
    bins: Optional[int] = None

    def __post_init__(self):
        if self.kind not in SCHEMA_KINDS:
            raise InvalidValue(f"column {self.name!r}: unknown kind {self.kind!r}")


def parse_schema(entries) -> List[ColumnSchema]:
    schema = [ColumnSchema(e["name"], e["kind"], e.get("strategy"), e.get("bins")) for e in entries]
    labels = [c.name for c in schema if c.kind == LABEL]
    if len(labels) != 1:
        raise SchemaMismatch(f"schema needs exactly one label column, found {labels}")
    return schema


def load_schema(path) -> List[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return parse_schema(data["columns"] if isinstance(data, dict) else data)


@dataclass
class Table:
    """Column-oriented table. Missing cells are NaN (numeric) or None (categorical)."""

    columns: Dict[str, np.ndarray]
    schema: List[ColumnSchema]

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def label(self) -> str:
        return next(c.name for c in self.schema if c.kind == LABEL)

    def kind(self, name) -> str:
        return next(c.kind for c in self.schema if c.name == name)

    def features(self) -> List[ColumnSchema]:
        return [c for c in self.schema if c.kind != LABEL]

    def take(self, idx) -> "Table":
        idx = np.asarray(idx, dtype=int)
        return Table({k: v[idx] for k, v in self.columns.items()}, list(self.schema))

    def with_column(self, name, values, kind) -> "Table":
        cols = dict(self.columns)
        cols[name] = values
        schema = [ColumnSchema(c.name, kind) if c.name == name else c for c in self.schema]
        return Table(cols, schema)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parse_label(cell: str) -> float:
    v = float(cell)
    if v == 1.0:
        return 1.0
    if v in (0.0, -1.0):
        return -1.0
    raise ValueError(cell)


def _parse_binary(cell: str) -> float:
    c = cell.strip().lower()
    if c in ("1", "1.0", "true", "yes"):
        return 1.0
    if c in ("0", "0.0", "false", "no"):
        return 0.0
    raise ValueError(cell)


def load_csv(path, schema: Sequence[ColumnSchema]) -> Table:
    """Read a headered UTF-8 CSV, typing each column by its schema entry.

    ``ParseError`` carries the 1-based data row and the column name.
    """
    schema = list(schema)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaMismatch(f"{path} is empty") from None
        names = [c.name for c in schema]
        missing = [n for n in names if n not in header]
        if missing:
            raise SchemaMismatch(f"header lacks schema column(s) {missing}")
        extra = [h for h in header if h not in names]
        if extra:
            raise SchemaMismatch(f"header has columns not in the schema: {extra}")
        pos = {h: i for i, h in enumerate(header)}
        raw: Dict[str, list] = {n: [] for n in names}
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"row {r} has {len(row)} fields, expected {len(header)}", r, None)
            for col in schema:
                cell = row[pos[col.name]]
                if _is_missing(cell):
                    if col.kind == LABEL:
                        raise ParseError(f"row {r}: missing label", r, col.name)
                    raw[col.name].append(None)
                    continue
                try:
                    if col.kind == CONTINUOUS:
                        raw[col.name].append(float(cell))
                    elif col.kind == BINARY_KIND:
                        raw[col.name].append(_parse_binary(cell))
                    elif col.kind == LABEL:
                        raw[col.name].append(_parse_label(cell))
                    else:
                        raw[col.name].append(cell.strip())
                except ValueError:
                    raise ParseError(f"row {r}, column {col.name!r}: cannot parse {cell!r} as {col.kind}",
                                     r, col.name) from None
    cols = {}
    for col in schema:
        vals = raw[col.name]
        if col.kind in (CONTINUOUS, BINARY_KIND, LABEL):
            cols[col.name] = np.array([np.nan if v is None else v for v in vals], dtype=float)
        else:
            cols[col.name] = np.array(vals, dtype=object)
    return Table(cols, schema)


# --- discretization -------------------------------------------------------------

def bin_edges(values, strategy: str = QUANTILE, k: int = 4) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if k < 2:
        raise InvalidValue("need at least 2 bins")
    if x.size == 0 or x.min() == x.max():
        raise DegenerateColumn("cannot bin a constant or empty column")
    if strategy == EQUAL_WIDTH:
        return np.linspace(x.min(), x.max(), k + 1)
    if strategy == QUANTILE:
        return np.unique(np.quantile(x, np.linspace(0.0, 1.0, k + 1)))
    raise InvalidValue(f"unknown binning strategy {strategy!r}")


def apply_bins(values, edges):
    """Bin index per value; bins are [e_i, e_i+1) with the last one closed.

    Values outside the edges are clamped to the end bins and flagged.
    """
    x = np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=float)
    idx = np.searchsorted(edges[1:-1], x, side="right")
    out_of_range = np.isfinite(x) & ((x < edges[0]) | (x > edges[-1]))
    labels = np.array([None if not np.isfinite(v) else f"b{i}" for v, i in zip(x, idx)], dtype=object)
    return labels, out_of_range


def discretize(table: Table, column: str, strategy: str = QUANTILE, k: int = 4, edges=None):
    """Replace a continuous column by bin labels.

    Returns ``(table, edges, clamped_mask)``; pass the training ``edges`` back
    in to bin a test split identically.
    """
    if table.kind(column) != CONTINUOUS:
        raise InvalidValue(f"column {column!r} is not continuous")
    if edges is None:
        edges = bin_edges(table.columns[column], strategy, k)
    labels, clamped = apply_bins(table.columns[column], edges)
    return table.with_column(column, labels, CATEGORICAL), np.asarray(edges, dtype=float), clamped


# --- encoding -------------------------------------------------------------------

def one_hot(table: Table, vocab: Optional[Dict[str, List[str]]] = None):
    """Binary indicator columns ``name=category`` per categorical column.

    Binary columns pass through unchanged. Returns ``(features, vocab, unseen)``
    where ``unseen`` lists (row, column) pairs whose category was not in the
    vocabulary; those rows are all zeros in that column group.
    """
    fitted = vocab is None
    vocab = {} if fitted else {k: list(v) for k, v in vocab.items()}
    blocks, names, unseen = [], [], []
    for col in table.features():
        vals = table.columns[col.name]
        if col.kind == BINARY_KIND:
            blocks.append(np.nan_to_num(vals.astype(float))[:, None])
            names.append(col.name)
            continue
        if col.kind == CONTINUOUS:
            raise InvalidValue(f"column {col.name!r} must be discretized before encoding")
        if fitted:
            vocab[col.name] = sorted({v for v in vals if v is not None})
        cats = vocab[col.name]
        index = {c: j for j, c in enumerate(cats)}
        block = np.zeros((len(vals), len(cats)))
        for i, v in enumerate(vals):
            j = index.get(v)
            if j is None:
                unseen.append((i, col.name))
            else:
                block[i, j] = 1.0
        blocks.append(block)
        names.extend(f"{col.name}={c}" for c in cats)
    values = np.hstack(blocks) if blocks else np.zeros((table.n_rows, 0))
    return FeatureMatrix(values, tuple(names), tuple([BINARY] * len(names))), vocab, unseen


# --- imputation and balancing ----------------------------------------------------

def _mode(values):
    present = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
    if not present:
        return None
    uniq, counts = np.unique(np.array(present, dtype=object if isinstance(present[0], str) else float),
                             return_counts=True)
    return uniq[int(np.argmax(counts))]


def fit_fill_values(table: Table) -> dict:
    fill = {}
    for col in table.features():
        vals = table.columns[col.name]
        if col.kind == CONTINUOUS:
            finite = vals[np.isfinite(vals)]
            if finite.size == 0:
                raise AllMissingColumn(f"column {col.name!r} has no observed values")
            fill[col.name] = float(np.median(finite))
        else:
            m = _mode(list(vals))
            if m is None:
                raise AllMissingColumn(f"column {col.name!r} has no observed values")
            fill[col.name] = m.item() if hasattr(m, "item") else m
    return fill


def impute(table: Table, fill: dict) -> Table:
    cols = dict(table.columns)
    for name, value in fill.items():
        vals = cols[name].copy()
        if vals.dtype == object:
            vals[[v is None for v in vals]] = value
        else:
            vals[~np.isfinite(vals)] = value
        cols[name] = vals
    return Table(cols, list(table.schema))


def balance(table: Table, seed) -> Table:
    """Oversample the smaller class with replacement until both classes match."""
    y = table.columns[table.label]
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2 or counts[0] == counts[1]:
        return table
    minority = classes[int(np.argmin(counts))]
    pool = np.flatnonzero(y == minority)
    extra = np.random.default_rng(seed).choice(pool, size=int(counts.max() - counts.min()), replace=True)
    return table.take(np.concatenate([np.arange(table.n_rows), extra]))


def impute_and_balance(table: Table, seed, fill: Optional[dict] = None):
    """Median / mode imputation, then random oversampling to class parity.

    Returns ``(table, fill)``; ``fill`` holds the values learned from ``table``.
    """
    fill = fit_fill_values(table) if fill is None else fill
    return balance(impute(table, fill), seed), fill


# --- feature selection -----------------------------------------------------------

@dataclass
class FeatureRanking:
    order: List[str]
    scores: Dict[int, float]
    selected: List[str]

    def to_dict(self):
        return {"order": self.order, "scores": {str(k): v for k, v in self.scores.items()},
                "selected": self.selected}


def _cv_accuracy(X, y, folds, seed, cfg):
    accs = []
    for test in kfold_indices(len(y), folds, seed):
        train = np.setdiff1d(np.arange(len(y)), test)
        m = fit_weighted_svm(X[train], y[train], None, cfg)
        accs.append(np.mean(np.where(X[test] @ m.beta + m.b >= 0, 1.0, -1.0) == y[test]))
    return float(np.mean(accs))


def feature_select(ds: ValidatedDataset, sizes: Optional[Sequence[int]] = None, folds: int = 5,
                   seed: int = 0, cfg: Optional[SvmConfig] = None) -> FeatureRanking:
    """Recursive elimination by squared linear-SVM coefficients, scored by k-fold accuracy.

    The ranking lists features from last eliminated (most important) to first.
    """
    if folds < 2:
        raise InvalidValue("folds must be >= 2")
    cfg = cfg or SvmConfig()
    X, y = ds.X, ds.y
    names = list(ds.features.column_names)
    remaining = list(range(X.shape[1]))
    eliminated = []
    while len(remaining) > 1:
        m = fit_weighted_svm(X[:, remaining], y, None, cfg)
        worst = int(np.argmin(m.beta ** 2))
        eliminated.append(remaining.pop(worst))
    order = remaining + eliminated[::-1]
    sizes = sorted(set(sizes)) if sizes else list(range(1, len(order) + 1))
    scores = {k: _cv_accuracy(X[:, order[:k]], y, folds, seed, cfg) for k in sizes if 1 <= k <= len(order)}
    best_k = max(scores, key=lambda k: (scores[k], -k))
    return FeatureRanking([names[i] for i in order], scores, [names[i] for i in order[:best_k]])


# --- fitted pipeline -------------------------------------------------------------

@dataclass
class Pipeline:
    """Fitted preprocessing parameters, learned from a training split only."""

    fill: dict = field(default_factory=dict)
    edges: Dict[str, List[float]] = field(default_factory=dict)
    vocab: Dict[str, List[str]] = field(default_factory=dict)
    strategy: str = QUANTILE
    bins: int = 4

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Pipeline":
        return cls(**json.loads(text))

    def _encode(self, table: Table):
        table = impute(table, self.fill)
        for name, edges in self.edges.items():
            table, _, _ = discretize(table, name, edges=edges)
        feats, _, unseen = one_hot(table, self.vocab)
        labels = LabelVector(table.columns[table.label], "binary")
        return ValidatedDataset(feats, labels), unseen

    def transform(self, table: Table) -> ValidatedDataset:
        return self._encode(table)[0]


def fit_pipeline(table: Table, seed: int = 0, strategy: str = QUANTILE, bins: int = 4):
    """Fit imputation, binning and vocabulary on ``table``; returns (pipeline, dataset).

    The training dataset is class-balanced after encoding; ``transform``
    replays the same steps without balancing.
    """
    fill = fit_fill_values(table)
    filled = impute(table, fill)
    edges = {}
    for col in filled.features():
        if col.kind == CONTINUOUS:
            s = col.strategy or strategy
            k = col.bins or bins
            filled, e, _ = discretize(filled, col.name, s, k)
            edges[col.name] = e.tolist()
    _, vocab, _ = one_hot(filled)
    pipe = Pipeline(fill, edges, vocab, strategy, bins)
    balanced = balance(table, seed)
    return pipe, pipe.transform(balanced)

"""Mixed-type tabular data with an explicit missingness mask.

A :class:`Dataset` stores every column in one float64 matrix. Continuous
columns hold their values; categorical columns hold the integer index of the
level in the column's (sorted) level list. Masked cells hold NaN and are
never read through the public accessors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DataError, SchemaError

MISSING_TOKENS = ("", "NA")
NA = "NA"


@dataclass(frozen=True)
class Continuous:
    is_categorical = False

    def to_json(self) -> dict:
        return {"kind": "continuous"}


@dataclass(frozen=True)
class Categorical:
    levels: tuple

    is_categorical = True

    def __post_init__(self):
        levels = tuple(str(v) for v in self.levels)
        if not levels:
            raise SchemaError("categorical column needs at least one level")
        if len(set(levels)) != len(levels):
            raise SchemaError(f"duplicate levels in {levels!r}")
        if list(levels) != sorted(levels):
            raise SchemaError(f"levels must be in canonical (sorted) order: {levels!r}")
        object.__setattr__(self, "levels", levels)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def to_json(self) -> dict:
        return {"kind": "categorical", "levels": list(self.levels)}


ColumnKind = Union[Continuous, Categorical]


def kind_from_json(obj: Mapping) -> ColumnKind:
    if obj["kind"] == "continuous":
        return Continuous()
    if obj["kind"] == "categorical":
        return Categorical(tuple(obj["levels"]))
    raise SchemaError(f"unknown column kind {obj['kind']!r}")


class Dataset:
    """Immutable column-typed matrix plus missingness mask (True = missing).

    Parameters
    ----------
    names : sequence of str
        Unique column names.
    kinds : sequence of ColumnKind
        One kind per column.
    values : array_like, shape (n_rows, n_cols)
        Cell values; categorical cells are level indices. Values under the
        mask are ignored and replaced by NaN.
    mask : array_like of bool, optional
        Missingness mask. Defaults to ``isnan(values)``.
    overrides : dict, optional
        ``{(row, col): raw}`` for observed categorical cells whose raw level was
        unknown to the schema. They are analysed as the stored level index but
        written back verbatim.
    """

    def __init__(self, names, kinds, values, mask=None, overrides=None):
        names = [str(n) for n in names]
        kinds = list(kinds)
        values = np.array(values, dtype=np.float64, copy=True)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        if len(names) != values.shape[1] or len(kinds) != values.shape[1]:
            raise SchemaError(
                f"{len(names)} names / {len(kinds)} kinds for {values.shape[1]} columns"
            )
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        if mask is None:
            mask = np.isnan(values)
        else:
            mask = np.array(mask, dtype=bool, copy=True)
            if mask.shape != values.shape:
                raise DataError(f"mask shape {mask.shape} != values shape {values.shape}")
            if np.any(np.isnan(values) & ~mask):
                raise DataError("observed cells must not be NaN")
        values[mask] = np.nan
        for j, kind in enumerate(kinds):
            if kind.is_categorical:
                col = values[~mask[:, j], j]
                if col.size and (
                    np.any(col != np.floor(col)) or col.min() < 0 or col.max() >= kind.n_levels
                ):
                    raise DataError(f"column {names[j]!r}: invalid level index")
        values.setflags(write=False)
        mask.setflags(write=False)
        self._names = names
        self._kinds = kinds
        self._values = values
        self._mask = mask
        self._index = {n: j for j, n in enumerate(names)}
        self.overrides = dict(overrides or {})

    # -- shape and schema ------------------------------------------------
    @property
    def names(self) -> list[str]:
        return list(self._names)

    @property
    def kinds(self) -> list[ColumnKind]:
        return list(self._kinds)

    @property
    def n_rows(self) -> int:
        return self._values.shape[0]

    @property
    def n_cols(self) -> int:
        return self._values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def values(self) -> np.ndarray:
        """Read-only value matrix; masked cells are NaN."""
        return self._values

    def schema(self) -> list[tuple[str, ColumnKind]]:
        return list(zip(self._names, self._kinds))

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"no column named {name!r}") from None

    def kind(self, col) -> ColumnKind:
        return self._kinds[self._col(col)]

    def _col(self, col) -> int:
        return self.index(col) if isinstance(col, str) else int(col)

    # -- cell access -----------------------------------------------------
    def cell(self, row: int, col):
        """Return the cell as float / level name, or None when masked."""
        j = self._col(col)
        if self._mask[row, j]:
            return None
        kind = self._kinds[j]
        v = self._values[row, j]
        if kind.is_categorical:
            return self.overrides.get((row, j), kind.levels[int(v)])
        return float(v)

    def observed(self, col) -> tuple[np.ndarray, np.ndarray]:
        """Row indices and values of the observed cells of one column."""
        j = self._col(col)
        rows = np.flatnonzero(~self._mask[:, j])
        return rows, self._values[rows, j]

    def codes(self, col) -> np.ndarray:
        """Observed level indices of a categorical column (masked rows dropped)."""
        j = self._col(col)
        if not self._kinds[j].is_categorical:
            raise SchemaError(f"column {self._names[j]!r} is not categorical")
        return self.observed(j)[1].astype(np.int64)

    # -- copy-and-mutate -------------------------------------------------
    def replace(self, values=None, mask=None, overrides=None) -> "Dataset":
        return Dataset(
            self._names,
            self._kinds,
            self._values if values is None else values,
            self._mask if mask is None else mask,
            self.overrides if overrides is None else overrides,
        )

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        pos = {int(r): i for i, r in enumerate(rows)}
        overrides = {
            (pos[r], j): raw for (r, j), raw in self.overrides.items() if r in pos
        }
        return Dataset(self._names, self._kinds, self._values[rows], self._mask[rows], overrides)

    def select(self, names: Sequence[str]) -> "Dataset":
        cols = [self.index(n) for n in names]
        remap = {j: i for i, j in enumerate(cols)}
        overrides = {
            (r, remap[j]): raw for (r, j), raw in self.overrides.items() if j in remap
        }
        return Dataset(
            [self._names[j] for j in cols],
            [self._kinds[j] for j in cols],
            self._values[:, cols],
            self._mask[:, cols],
            overrides,
        )

    def drop(self, names: Iterable[str]) -> "Dataset":
        drop = set(names)
        for n in drop:
            self.index(n)
        return self.select([n for n in self._names if n not in drop])

    def same_schema(self, other: "Dataset") -> bool:
        return self.schema() == other.schema()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema() == other.schema()
            and np.array_equal(self._mask, other._mask)
            and np.array_equal(self._values, other._values, equal_nan=True)
        )

    def __repr__(self):
        return f"Dataset({self.n_rows} rows x {self.n_cols} cols, {int(self._mask.sum())} masked)"


def missing_proportions(d: Dataset) -> np.ndarray:
    """Fraction of masked cells per column."""
    if d.n_rows == 0:
        return np.zeros(d.n_cols)
    return d.mask.sum(axis=0) / d.n_rows


# -- CSV ---------------------------------------------------------------------

def format_float(v: float) -> str:
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_csv(
    path,
    schema: Mapping[str, ColumnKind] | Sequence[ColumnKind] | None = None,
    missing_tokens: Sequence[str] = MISSING_TOKENS,
    unknown_levels: Mapping[str, int] | None = None,
) -> Dataset:
    """Read a CSV file with a header row into a :class:`Dataset`.

    Columns not covered by ``schema`` are inferred: all observed cells numeric
    gives a continuous column, anything else a categorical one with sorted
    levels. ``unknown_levels`` maps a column name to the level index used for
    raw values missing from a declared categorical schema; without an entry
    such values raise :class:`SchemaError`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file (a header row is required)")
    header, body = rows[0], rows[1:]
    body = [r for r in body if r]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(
                f"{path}: row {i + 2} has {len(r)} fields, header has {len(header)}"
            )
    p = len(header)
    if schema is None:
        declared = {}
    elif isinstance(schema, Mapping):
        unknown = set(schema) - set(header)
        if unknown:
            raise SchemaError(f"{path}: schema names unknown columns {sorted(unknown)}")
        declared = dict(schema)
    else:
        schema = list(schema)
        if len(schema) != p:
            raise SchemaError(f"{path}: schema has {len(schema)} columns, file has {p}")
        declared = dict(zip(header, schema))
    unknown_levels = dict(unknown_levels or {})
    missing = set(missing_tokens)

    n = len(body)
    values = np.full((n, p), np.nan)
    mask = np.zeros((n, p), dtype=bool)
    overrides = {}
    kinds: list[ColumnKind] = []
    for j, name in enumerate(header):
        raw = [r[j] for r in body]
        miss = np.array([tok in missing for tok in raw], dtype=bool)
        mask[:, j] = miss
        kind = declared.get(name)
        obs = [tok for tok, m in zip(raw, miss) if not m]
        if kind is None:
            if all(_is_float(tok) for tok in obs):
                kind = Continuous()
            else:
                kind = Categorical(tuple(sorted(set(obs))))
        if kind.is_categorical:
            lookup = {lvl: k for k, lvl in enumerate(kind.levels)}
            for i, tok in enumerate(raw):
                if miss[i]:
                    continue
                code = lookup.get(tok)
                if code is None:
                    if name not in unknown_levels:
                        raise SchemaError(
                            f"{path}: column {name!r} row {i + 2}: unknown level {tok!r}"
                        )
                    code = unknown_levels[name]
                    overrides[(i, j)] = tok
                values[i, j] = code
        else:
            for i, tok in enumerate(raw):
                if miss[i]:
                    continue
                try:
                    values[i, j] = float(tok)
                except ValueError:
                    raise DataError(
                        f"{path}: column {name!r} row {i + 2}: {tok!r} is not numeric"
                    ) from None
                if math.isnan(values[i, j]):
                    raise DataError(f"{path}: column {name!r} row {i + 2}: NaN literal")
        kinds.append(kind)
    return Dataset(header, kinds, values, mask, overrides)


def write_csv(d: Dataset, path) -> None:
    """Write ``d`` as CSV; masked cells become ``NA``."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(d.names)
        kinds = d.kinds
        vals, mask = d.values, d.mask
        for i in range(d.n_rows):
            row = []
            for j, kind in enumerate(kinds):
                if mask[i, j]:
                    row.append(NA)
                elif kind.is_categorical:
                    row.append(d.overrides.get((i, j), kind.levels[int(vals[i, j])]))
                else:
                    row.append(format_float(vals[i, j]))
            w.writerow(row)


# -- dummy coding ------------------------------------------------------------

@dataclass(frozen=True)
class DummyCodec:
    """K-1 binary encoding of one categorical column.

    The first level in canonical order is the excluded (reference) level.
    """

    source: str
    levels: tuple
    columns: tuple

    @property
    def excluded(self) -> str:
        return self.levels[0]


def dummy_encode(d: Dataset, columns: Sequence[str]) -> tuple[Dataset, list[DummyCodec]]:
    """Replace each named categorical column by K-1 continuous 0/1 columns."""
    targets = {}
    for name in columns:
        kind = d.kind(name)
        if not kind.is_categorical:
            raise SchemaError(f"column {name!r} is not categorical")
        if kind.n_levels < 2:
            raise SchemaError(f"column {name!r} needs at least two levels to dummy code")
        targets[name] = kind

    names, kinds, cols, masks, codecs = [], [], [], [], []
    for j, (name, kind) in enumerate(d.schema()):
        v, m = d.values[:, j], d.mask[:, j]
        if name not in targets:
            names.append(name)
            kinds.append(kind)
            cols.append(v)
            masks.append(m)
            continue
        emitted = tuple(f"{name}_{lvl}" for lvl in kind.levels[1:])
        clash = set(emitted) & (set(d.names) - {name})
        if clash:
            raise SchemaError(f"dummy column names collide with existing columns: {sorted(clash)}")
        for k, col_name in enumerate(emitted, start=1):
            names.append(col_name)
            kinds.append(Continuous())
            cols.append(np.where(m, np.nan, (v == k).astype(np.float64)))
            masks.append(m)
        codecs.append(DummyCodec(name, kind.levels, emitted))
    out = Dataset(names, kinds, np.column_stack(cols), np.column_stack(masks))
    return out, codecs


def dummy_decode(codec: DummyCodec, probs) -> np.ndarray:
    """Back-transform K-1 dummy scores to level indices.

    Scores may lie outside [0, 1]. The excluded level scores ``1 - sum(p)``;
    the highest score wins, ties going to the earlier level.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        probs = probs.reshape(1, -1)
    k1 = len(codec.levels) - 1
    if probs.shape[1] != k1:
        raise DataError(f"codec {codec.source!r} expects {k1} scores per row, got {probs.shape[1]}")
    scores = np.column_stack([1.0 - probs.sum(axis=1), probs])
    return np.argmax(scores, axis=1)


# -- splitting ---------------------------------------------------------------

def train_test_split(d: Dataset, test_fraction: float = 1 / 3, seed: int = 0):
    """Random disjoint row partition; rows keep their original order."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = d.n_rows
    n_test = int(math.floor(test_fraction * n + 0.5))
    if n_test == 0 or n_test == n:
        raise DataError(f"split of {n} rows with fraction {test_fraction} leaves an empty part")
    perm = np.random.default_rng(seed).permutation(n)
    test = np.sort(perm[:n_test])
    train = np.sort(perm[n_test:])
    return d.take(train), d.take(test)

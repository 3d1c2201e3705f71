"""Random forests with regression and probability leaves and OOB predictions.

Each tree is grown on a bootstrap of n rows drawn with replacement. At every
node ``mtry`` predictors are drawn without replacement and the split that
minimises the size-weighted child variance (regression) or Gini impurity
(probability) is kept. Categorical predictors are split by ordering their
levels at the node by mean response (first-class frequency in probability
mode) and cutting that order like a numeric predictor.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import Sequence

import numba
import numpy as np

from . import _tree
from .errors import DataError, SchemaError

REGRESSION = "regression"
PROBABILITY = "probability"
MAX_CATEGORICAL_LEVELS = 64
THREADS_ENV = "MFP_NUM_THREADS"

# numba falls back to another threading layer when TBB is too old; not actionable
warnings.filterwarnings("ignore", message="The TBB threading layer")


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise DataError(f"{THREADS_ENV}={env!r} is not an integer") from None
        return max(1, n)
    return os.cpu_count() or 1


def _set_kernel_threads(threads: int) -> None:
    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


@dataclass
class ForestParams:
    """Forest hyper-parameters.

    ``mtry`` and ``min_node_size`` default (None) to floor(sqrt(p)) and to
    5 (regression) / 10 (probability). ``max_depth`` 0 means unlimited.
    """

    num_trees: int = 500
    mtry: int | None = None
    min_node_size: int | None = None
    max_depth: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_node_size is not None and self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def resolved(self, n_predictors: int, mode: str) -> "ForestParams":
        mtry = self.mtry if self.mtry is not None else max(1, math.isqrt(n_predictors))
        if not 1 <= mtry <= n_predictors:
            raise ValueError(f"mtry={mtry} outside [1, {n_predictors}]")
        mns = self.min_node_size
        if mns is None:
            mns = 10 if mode == PROBABILITY else 5
        return ForestParams(self.num_trees, mtry, mns, self.max_depth, self.seed)

    def to_json(self) -> dict:
        return asdict(self)


class Forest:
    """A trained ensemble. Trees are stored as concatenated flat node arrays."""

    def __init__(
        self, mode, n_classes, is_cat, n_levels, majority, seen, params,
        offsets, feature, threshold, cat_mask, left, right, value,
        n_train, inbag=None, train_X=None,
    ):
        self.mode = mode
        self.n_classes = int(n_classes)
        self.is_cat = np.asarray(is_cat, dtype=np.bool_)
        self.n_levels = np.asarray(n_levels, dtype=np.int64)
        self.majority = np.asarray(majority, dtype=np.int64)
        self.seen = np.asarray(seen, dtype=np.uint64)
        self.params = params
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.cat_mask = np.asarray(cat_mask, dtype=np.uint64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_train = int(n_train)
        # in-memory only; not part of the persisted model
        self.inbag = inbag
        self._train_X = train_X

    @property
    def num_trees(self) -> int:
        return len(self.offsets) - 1

    @property
    def n_features(self) -> int:
        return len(self.is_cat)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def tree_nodes(self, t: int) -> slice:
        return slice(int(self.offsets[t]), int(self.offsets[t + 1]))

    def _prepare(self, X) -> np.ndarray:
        X = np.array(X, dtype=np.float64, order="C", copy=True)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} predictor columns, got shape {X.shape}")
        if np.isnan(X).any():
            raise DataError("predictor matrix contains NaN")
        for j in np.flatnonzero(self.is_cat):
            col = X[:, j]
            codes = col.astype(np.int64)
            if np.any(codes != col) or np.any(codes < 0):
                raise DataError(f"predictor {j}: invalid level index")
            inside = codes < MAX_CATEGORICAL_LEVELS
            known = np.zeros(len(codes), dtype=bool)
            known[inside] = ((self.seen[j] >> codes[inside].astype(np.uint64)) & np.uint64(1)) == 1
            col[~known] = self.majority[j]
        return X

    def _finish(self, sums: np.ndarray, counts) -> np.ndarray:
        out = sums / np.asarray(counts, dtype=np.float64).reshape(-1, 1)
        return out[:, 0] if self.mode == REGRESSION else out

    def predict(self, X, threads: int | None = None) -> np.ndarray:
        """Average leaf payload over all trees.

        Returns a vector (regression) or an (n, n_classes) probability matrix.
        Categorical levels never seen in training are mapped to the training
        majority level of that predictor.
        """
        X = self._prepare(X)
        _set_kernel_threads(threads or default_threads())
        sums = _tree.predict_sum(
            X, self.is_cat, self.offsets, self.feature, self.threshold,
            self.cat_mask, self.left, self.right, self.value,
        )
        return self._finish(sums, np.full(len(X), self.num_trees))

    def tree_predict(self, X, t: int) -> np.ndarray:
        """Prediction of tree ``t`` alone."""
        X = self._prepare(X)
        sl = self.tree_nodes(t)
        sums = _tree.predict_sum(
            X, self.is_cat, np.array([0, sl.stop - sl.start], dtype=np.int64),
            self.feature[sl], self.threshold[sl], self.cat_mask[sl],
            self.left[sl], self.right[sl], self.value[sl],
        )
        return self._finish(sums, np.ones(len(X)))

    def oob_predict(self, threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Out-of-bag prediction for every training row plus a coverage flag.

        Uncovered rows (in-bag for every tree) get NaN predictions.
        """
        if self.inbag is None or self._train_X is None:
            raise ValueError("forest does not retain in-bag records (loaded from disk?)")
        _set_kernel_threads(threads or default_threads())
        sums, cnt = _tree.oob_sum(
            self._train_X, self.is_cat, self.offsets, self.feature, self.threshold,
            self.cat_mask, self.left, self.right, self.value, self.inbag,
        )
        covered = cnt > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            pred = self._finish(sums, cnt)
        return pred, covered

    def train_predict(self, threads: int | None = None):
        """(apparent, oob, covered) for the training rows, in one pass.

        Same values as ``predict(train_X)`` and ``oob_predict()``.
        """
        if self.inbag is None or self._train_X is None:
            raise ValueError("forest does not retain in-bag records (loaded from disk?)")
        _set_kernel_threads(threads or default_threads())
        full, sums, cnt = _tree.train_sums(
            self._train_X, self.is_cat, self.offsets, self.feature, self.threshold,
            self.cat_mask, self.left, self.right, self.value, self.inbag,
        )
        covered = cnt > 0
        apparent = self._finish(full, np.full(len(cnt), self.num_trees))
        with np.errstate(invalid="ignore", divide="ignore"):
            oob = self._finish(sums, cnt)
        return apparent, oob, covered

    def oob_fraction(self) -> np.ndarray:
        """Per training row, the fraction of trees whose bootstrap excluded it."""
        if self.inbag is None:
            raise ValueError("forest does not retain in-bag records")
        return (self.inbag == 0).mean(axis=0)

    def structure_equal(self, other: "Forest") -> bool:
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("offsets", "feature", "threshold", "cat_mask", "left", "right", "value")
        )


def _feature_meta(X: np.ndarray, kinds):
    p = X.shape[1]
    is_cat = np.zeros(p, dtype=np.bool_)
    n_levels = np.zeros(p, dtype=np.int64)
    majority = np.full(p, -1, dtype=np.int64)
    seen = np.zeros(p, dtype=np.uint64)
    for j, kind in enumerate(kinds):
        if not kind.is_categorical:
            continue
        L = kind.n_levels
        if L > MAX_CATEGORICAL_LEVELS:
            raise DataError(
                f"categorical predictor {j} has {L} levels; at most {MAX_CATEGORICAL_LEVELS} supported"
            )
        codes = X[:, j].astype(np.int64)
        if np.any(codes != X[:, j]) or codes.min() < 0 or codes.max() >= L:
            raise DataError(f"predictor {j}: invalid level index")
        counts = np.bincount(codes, minlength=L)
        is_cat[j] = True
        n_levels[j] = L
        majority[j] = int(np.argmax(counts))
        bits = 0
        for c in np.flatnonzero(counts):
            bits |= 1 << int(c)
        seen[j] = np.uint64(bits)
    return is_cat, n_levels, majority, seen


def fit_forest(
    X,
    y,
    kinds: Sequence | None = None,
    mode: str = REGRESSION,
    params: ForestParams | None = None,
    n_classes: int | None = None,
    threads: int | None = None,
) -> Forest:
    """Grow a random forest on a complete predictor matrix.

    Parameters
    ----------
    X : array_like, shape (n, p)
        Predictors without missing values; categorical columns hold level indices.
    y : array_like, shape (n,)
        Response; class indices in probability mode.
    kinds : sequence of ColumnKind, optional
        Column kinds of ``X``; all continuous when omitted.
    mode : {"regression", "probability"}
    params : ForestParams
    n_classes : int, optional
        Number of classes in probability mode (default ``max(y) + 1``).
    threads : int, optional
        Worker threads for tree growing; results do not depend on it.
    """
    from .tabular import Continuous

    params = params or ForestParams()
    X = np.array(X, dtype=np.float64, order="C", copy=True)
    y = np.array(y, dtype=np.float64, copy=True).ravel()
    if X.ndim != 2:
        raise DataError("X must be a 2-d matrix")
    n, p = X.shape
    if p == 0:
        raise DataError("cannot fit a forest without predictors")
    if n < 2:
        raise DataError("need at least two training rows")
    if len(y) != n:
        raise DataError(f"X has {n} rows, y has {len(y)}")
    if np.isnan(X).any() or np.isnan(y).any():
        raise DataError("training data contains missing values")
    if mode not in (REGRESSION, PROBABILITY):
        raise ValueError(f"unknown forest mode {mode!r}")
    kinds = list(kinds) if kinds is not None else [Continuous()] * p
    if len(kinds) != p:
        raise SchemaError(f"{len(kinds)} kinds for {p} predictors")
    if mode == PROBABILITY:
        if np.any(y != np.floor(y)) or y.min() < 0:
            raise DataError("probability mode needs class indices as response")
        R = int(n_classes) if n_classes is not None else int(y.max()) + 1
        if y.max() >= R:
            raise DataError(f"class index {int(y.max())} >= n_classes={R}")
    else:
        R = 0
    rp = params.resolved(p, mode)
    is_cat, n_levels, majority, seen = _feature_meta(X, kinds)
    seed = np.uint64(int(rp.seed) & 0xFFFFFFFFFFFFFFFF)
    Xt = np.ascontiguousarray(X.T)
    gsort = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))

    def grow(t):
        return _tree.build_tree(
            Xt, gsort, y, R, is_cat, n_levels, rp.mtry, rp.min_node_size, rp.max_depth, seed, t
        )

    threads = threads or default_threads()
    if threads > 1 and rp.num_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(grow, range(rp.num_trees)))
    else:
        trees = [grow(t) for t in range(rp.num_trees)]

    sizes = [len(t[0]) for t in trees]
    offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(sizes)
    cat = lambda k: np.concatenate([t[k] for t in trees])  # noqa: E731
    return Forest(
        mode, R if R else 1, is_cat, n_levels, majority, seen, rp,
        offsets, cat(0), cat(1), cat(2), cat(3), cat(4), cat(5),
        n_train=n, inbag=np.stack([t[6] for t in trees]), train_X=X,
    )


def predict(f: Forest, X, threads: int | None = None) -> np.ndarray:
    return f.predict(X, threads)


def oob_predict(f: Forest, threads: int | None = None):
    return f.oob_predict(threads)

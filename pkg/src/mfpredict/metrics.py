"""Evaluation metrics for imputations and predictions.

The normalised MSE compares an imputation with a reference imputation: the
mean for continuous variables, the class proportions for categorical ones.
Values below 1 are an improvement over the reference.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateInputError


def _as_1d(a, dtype=np.float64):
    return np.asarray(a, dtype=dtype).ravel()


def _check_len(a, b):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")


def mse(truth, pred) -> float:
    truth, pred = _as_1d(truth), _as_1d(pred)
    _check_len(truth, pred)
    return float(np.mean((truth - pred) ** 2))


def nmse_continuous(truth, pred, ref_mean: float | None = None) -> float:
    """Sum of squared errors divided by the squared error of ``ref_mean``.

    ``ref_mean`` defaults to the mean of ``truth``.
    """
    truth, pred = _as_1d(truth), _as_1d(pred)
    _check_len(truth, pred)
    if ref_mean is None:
        ref_mean = truth.mean()
    denom = np.sum((truth - ref_mean) ** 2)
    if denom <= 0:
        raise DegenerateInputError("NMSE undefined: truth equals the reference mean everywhere")
    return float(np.sum((truth - pred) ** 2) / denom)


def r_squared(truth, pred, ref_mean: float | None = None) -> float:
    return 1.0 - nmse_continuous(truth, pred, ref_mean)


def one_hot(classes, n_classes: int) -> np.ndarray:
    classes = _as_1d(classes, np.int64)
    out = np.zeros((len(classes), n_classes))
    out[np.arange(len(classes)), classes] = 1.0
    return out


def _prob_rows(truth, probs):
    truth = _as_1d(truth, np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("probabilities must be an (n, R) matrix")
    _check_len(truth, probs)
    if probs.shape[1] < 2:
        raise ValueError("need at least two classes")
    if len(truth) and (truth.min() < 0 or truth.max() >= probs.shape[1]):
        raise ValueError("class index out of range")
    return truth, probs


def brier(truth, probs) -> float:
    """Multi-class Brier score: mean over rows of the squared distance to one-hot truth."""
    truth, probs = _prob_rows(truth, probs)
    return float(np.sum((probs - one_hot(truth, probs.shape[1])) ** 2) / len(truth))


def brier_ref(proportions) -> float:
    """Brier score of always predicting the class proportions: 1 - sum p_j^2."""
    p = _as_1d(proportions)
    return float(1.0 - np.sum(p * p))


def class_proportions(classes, n_classes: int) -> np.ndarray:
    classes = _as_1d(classes, np.int64)
    return np.bincount(classes, minlength=n_classes) / len(classes)


def bss(truth, probs, proportions=None) -> float:
    """Brier skill score against the class-proportion reference.

    ``proportions`` defaults to the class proportions of ``truth``.
    """
    truth, probs = _prob_rows(truth, probs)
    if proportions is None:
        proportions = class_proportions(truth, probs.shape[1])
    ref = brier_ref(proportions)
    if ref <= 0:
        raise DegenerateInputError("NMSE undefined: reference Brier score is zero (single class)")
    return 1.0 - brier(truth, probs) / ref


def nmse_categorical(truth, probs, proportions=None) -> float:
    """Brier score relative to the class-proportion reference.

    Computed as ``1 - bss`` so that identity holds exactly in floating point.
    """
    return 1.0 - bss(truth, probs, proportions)


def mer(truth, pred) -> float:
    """Misclassification error rate."""
    truth, pred = _as_1d(truth, np.int64), _as_1d(pred, np.int64)
    _check_len(truth, pred)
    if len(truth) == 0:
        return 0.0
    return float(np.mean(truth != pred))


def f1(truth, pred, positive=1) -> float:
    truth, pred = _as_1d(truth, np.int64), _as_1d(pred, np.int64)
    _check_len(truth, pred)
    tp = np.sum((pred == positive) & (truth == positive))
    fp = np.sum((pred == positive) & (truth != positive))
    fn = np.sum((pred != positive) & (truth == positive))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return float(2 * precision * recall / (precision + recall))


def macro_f1(truth, pred) -> float:
    """Unweighted mean F1 over the classes present in truth or prediction."""
    truth, pred = _as_1d(truth, np.int64), _as_1d(pred, np.int64)
    _check_len(truth, pred)
    classes = np.union1d(truth, pred)
    if len(classes) == 0:
        return 0.0
    return float(np.mean([f1(truth, pred, c) for c in classes]))


def auroc(truth, scores) -> float:
    """Area under the ROC curve via the Mann-Whitney U statistic (midranks for ties)."""
    truth, scores = _as_1d(truth, np.int64), _as_1d(scores)
    _check_len(truth, scores)
    pos = truth == 1
    n_pos = int(pos.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInputError("AUROC needs both classes")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def weighted_auroc(scores, p) -> float:
    """Expected AUROC of ``scores`` when row i is a case with probability ``p[i]``.

    Pairs (i, j), i != j, are weighted by p_i (1 - p_j); ties count one half.
    For large samples this matches the AUROC of outcomes drawn as
    Bernoulli(p_i), without the outcome noise.
    """
    scores, p = _as_1d(scores), _as_1d(p)
    _check_len(scores, p)
    q = 1.0 - p
    order = np.argsort(scores, kind="stable")
    s, ps, qs = scores[order], p[order], q[order]
    # group tied scores
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    q_group = np.add.reduceat(qs, starts)
    p_group = np.add.reduceat(ps, starts)
    below = np.r_[0.0, np.cumsum(q_group)[:-1]]
    num = np.sum(p_group * below)
    # ties contribute one half, excluding self-pairs
    pq_self = np.add.reduceat(ps * qs, starts)
    num += 0.5 * np.sum(p_group * q_group - pq_self)
    den = p.sum() * q.sum() - np.sum(p * q)
    if den <= 0:
        raise DegenerateInputError("weighted AUROC undefined")
    return float(num / den)

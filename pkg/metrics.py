"""Accuracy, MCC and ROC AUC, each next to a slow brute-force twin.

The brute-force versions exist so the fast ones can be checked against an
independent derivation; nothing in training calls them.
"""
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.stats import rankdata

from errors import DataError, ShapeError

THRESHOLD = 0.5


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.tp, self.tn, self.fp, self.fn)


@dataclass(frozen=True)
class MetricsRecord:
    accuracy: float
    mcc: float
    roc_auc: Optional[float]   # None when the test set holds a single class
    confusion: Confusion

    def to_json(self, model: str, seed: int) -> Dict[str, Any]:
        return {
            "model": str(model),
            "seed": int(seed),
            "accuracy": float(self.accuracy),
            "mcc": float(self.mcc),
            "roc_auc": None if self.roc_auc is None else float(self.roc_auc),
        }


def _binary(name: str, values) -> np.ndarray:
    arr = np.asarray(values).reshape(-1)
    if not np.all((arr == 0) | (arr == 1)):
        raise DataError(f"{name} must hold only 0 and 1")
    return arr.astype(np.int64)


def _pair(pred, truth) -> Tuple[np.ndarray, np.ndarray]:
    p = _binary("predictions", pred)
    t = _binary("labels", truth)
    if p.shape != t.shape:
        raise ShapeError(f"{p.shape[0]} predictions for {t.shape[0]} labels")
    if p.size == 0:
        raise ShapeError("metrics need at least one item")
    return p, t


def confusion(pred, truth) -> Confusion:
    p, t = _pair(pred, truth)
    return Confusion(
        tp=int(np.sum((p == 1) & (t == 1))),
        tn=int(np.sum((p == 0) & (t == 0))),
        fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))),
    )


def accuracy(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(p == t))


def mcc(c: Confusion) -> float:
    """Matthews correlation; 0 whenever a marginal is empty."""
    if c.n < 1:
        raise ShapeError("MCC needs at least one item")
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom)


def roc_auc(scores, truth) -> Optional[float]:
    """Mann-Whitney U over (positive, negative) pairs, ties worth one half.

    Returns None when only one class is present.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    t = _binary("labels", truth)
    if s.shape != t.shape:
        raise ShapeError(f"{s.shape[0]} scores for {t.shape[0]} labels")
    n_pos = int(t.sum())
    n_neg = int(t.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s, method="average")
    u = ranks[t == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate_scores(scores, truth, threshold: float = THRESHOLD) -> MetricsRecord:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    pred = (s >= threshold).astype(np.int64)
    c = confusion(pred, truth)
    return MetricsRecord(
        accuracy=accuracy(pred, truth),
        mcc=mcc(c),
        roc_auc=roc_auc(s, truth),
        confusion=c,
    )


# ---------------- brute-force references ----------------

def accuracy_bruteforce(pred, truth) -> float:
    hits = 0
    for a, b in zip(list(pred), list(truth)):
        hits += int(int(a) == int(b))
    return hits / len(list(truth))


def mcc_bruteforce(pred, truth) -> float:
    tp = tn = fp = fn = 0
    for a, b in zip(list(pred), list(truth)):
        a, b = int(a), int(b)
        if a == 1 and b == 1:
            tp += 1
        elif a == 0 and b == 0:
            tn += 1
        elif a == 1:
            fp += 1
        else:
            fn += 1
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    return 0.0 if denom == 0 else (tp * tn - fp * fn) / math.sqrt(denom)


def roc_auc_bruteforce(scores, truth) -> Optional[float]:
    pos = [float(s) for s, y in zip(scores, truth) if int(y) == 1]
    neg = [float(s) for s, y in zip(scores, truth) if int(y) == 0]
    if not pos or not neg:
        return None
    credit = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                credit += 1.0
            elif a == b:
                credit += 0.5
    return credit / (len(pos) * len(neg))

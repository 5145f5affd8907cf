"""Rank AUC, cost-sensitive thresholds, F1 and the Kruskal-Wallis H test."""
from dataclasses import dataclass

import numpy as np
import math

from scipy.stats import rankdata

from .utils import DataError


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and the same length")
    if y.all() or not y.any():
        raise DataError("need at least one positive and one negative")
    return s, y


def auc(scores, labels):
    """Mann-Whitney AUC: (concordant + 0.5 * tied pairs) / (P * N), via midranks."""
    s, y = _check(scores, labels)
    ranks = rankdata(s)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class ConfusionAtThreshold:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    cost_fn: float = 10.0
    cost_fp: float = 1.0

    @property
    def fnr(self):
        return self.fn / (self.fn + self.tp) if self.fn + self.tp else 0.0

    @property
    def fpr(self):
        return self.fp / (self.fp + self.tn) if self.fp + self.tn else 0.0

    @property
    def cost(self):
        return self.cost_fn * self.fn + self.cost_fp * self.fp


def confusion_at(scores, labels, threshold, cost_fn=10.0, cost_fp=1.0):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    pred = s > threshold
    return ConfusionAtThreshold(float(threshold), int(np.sum(pred & y)), int(np.sum(pred & ~y)),
                                int(np.sum(~pred & ~y)), int(np.sum(~pred & y)),
                                cost_fn, cost_fp)


def candidate_thresholds(scores):
    u = np.unique(np.asarray(scores, dtype=float))
    return np.concatenate([[-np.inf], (u[:-1] + u[1:]) / 2.0, [np.inf]])


def optimal_threshold(scores, labels, cost_fn=10.0, cost_fp=1.0):
    """Cheapest cut-off among midpoints of the sorted unique scores and +/-inf.

    Positive prediction means ``score > threshold``. Equal costs resolve to
    the lowest threshold.
    """
    s, y = _check(scores, labels)
    u = np.unique(s)

    def count_at_or_above(values):
        per_value = np.bincount(np.searchsorted(u, values), minlength=len(u))
        return np.append(np.cumsum(per_value[::-1])[::-1], 0)

    # candidate c predicts positive for scores >= u[c]; c == len(u) predicts none
    pos_ge = count_at_or_above(s[y])
    neg_ge = count_at_or_above(s[~y])
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    fn = n_pos - pos_ge
    fp = neg_ge
    cost = cost_fn * fn + cost_fp * fp
    c = int(np.argmin(cost))
    thresholds = candidate_thresholds(s)
    return ConfusionAtThreshold(float(thresholds[c]), int(pos_ge[c]), int(fp[c]),
                                int(n_neg - fp[c]), int(fn[c]), cost_fn, cost_fp)


def f1_at(scores, labels, threshold):
    """F1 with positive prediction ``score > threshold``; 0 when P + R = 0."""
    s, y = _check(scores, labels)
    pred = s > threshold
    tp = np.sum(pred & y)
    fp = np.sum(pred & ~y)
    fn = np.sum(~pred & y)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


def _gamma_p_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_fraction(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a, x):
    """Regularised upper incomplete gamma Q(a, x): series below a + 1, else continued fraction."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_p_series(a, x))
    return _gamma_q_fraction(a, x)


def chi2_sf(x, df):
    """Chi-square survival function, Q(df / 2, x / 2)."""
    if x <= 0:
        return 1.0
    return float(gamma_q(df / 2.0, x / 2.0))


@dataclass
class KruskalWallisResult:
    h: float
    p: float
    df: int
    alpha: float = 0.05

    @property
    def significant(self):
        return self.p < self.alpha


def kruskal_wallis(values, groups, alpha=0.05):
    """Kruskal-Wallis H with midranks and tie correction; chi-square p-value."""
    v = np.asarray(values, dtype=float)
    g = np.asarray(groups)
    if v.shape != g.shape:
        raise ValueError("values and groups must align")
    labels = np.unique(g)
    if len(labels) < 2:
        raise DataError("Kruskal-Wallis needs at least two non-empty groups")
    n = len(v)
    if n < 2:
        raise DataError("Kruskal-Wallis needs N >= 2")
    ranks = rankdata(v)
    h = sum(ranks[g == lab].sum() ** 2 / np.sum(g == lab) for lab in labels)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    _, tie_counts = np.unique(v, return_counts=True)
    correction = 1.0 - np.sum(tie_counts ** 3 - tie_counts) / (n ** 3 - n)
    df = len(labels) - 1
    if correction <= 0:
        return KruskalWallisResult(0.0, 1.0, df, alpha)
    h = max(0.0, float(h / correction))
    return KruskalWallisResult(h, chi2_sf(h, df), df, alpha)

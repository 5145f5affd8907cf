"""Gradient-boosted trees on logistic loss, with optional GOSS sampling."""
import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..utils import check_binary_labels, check_features, derive_seed, require_both_classes
from . import _tree
from .tree import grow

NEWTON_DAMPING = 1e-6


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), evaluated without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def goss_sample(gradients, a, b, seed):
    """Gradient-based one-side sampling.

    Keeps the ``ceil(a*n)`` largest-|gradient| instances with weight 1 and a
    uniform draw of ``ceil(b*n)`` of the rest, up-weighted by ``(1 - a) / b``.

    Returns
    -------
    indices : ndarray of int
        Selected instances, ascending.
    weights : ndarray of float
        Weight of each selected instance, aligned with ``indices``.
    """
    g = np.asarray(gradients, dtype=np.float64)
    if not (0.0 <= a <= 1.0):
        raise ValueError(f"top fraction a={a} outside [0, 1]")
    if a < 1.0 and not (0.0 < b <= 1.0 - a + 1e-12):
        raise ValueError(f"sample fraction b={b} must lie in (0, 1 - a]")
    if a == 1.0 and not (0.0 <= b <= 1.0):
        raise ValueError(f"sample fraction b={b} outside [0, 1]")
    n = len(g)
    n_top = min(n, math.ceil(a * n))
    by_size = np.argsort(-np.abs(g), kind="stable")
    top = by_size[:n_top]
    rest = by_size[n_top:]
    n_rand = min(len(rest), math.ceil(b * n)) if b > 0 else 0
    rng = np.random.default_rng(seed)
    sampled = rng.choice(rest, size=n_rand, replace=False) if n_rand else rest[:0]
    amplify = (1.0 - a) / b if b > 0 else 1.0
    idx = np.concatenate([top, sampled])
    w = np.concatenate([np.ones(len(top)), np.full(len(sampled), amplify)])
    sort = np.argsort(idx, kind="stable")
    return idx[sort], w[sort]


class GradientBoostingClassifier(ClassifierMixin, BaseEstimator):
    """Stagewise Newton-step regression trees on the binary log-loss.

    Starts from the prior log-odds. Each stage fits a tree to the loss
    gradient/hessian, leaf value ``-G / (H + 1e-6)``, scaled by
    ``learning_rate``. With ``goss=True`` every stage trains on a
    :func:`goss_sample` of the instances.
    """

    def __init__(self, n_trees=300, learning_rate=0.1, max_depth=6, min_samples_leaf=20,
                 goss=False, top_rate=0.2, other_rate=0.1, random_state=0):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.goss = goss
        self.top_rate = top_rate
        self.other_rate = other_rate
        self.random_state = random_state

    def fit(self, X, y):
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must be in (0, 1]")
        X = check_features(X)
        y = check_binary_labels(y, len(X))
        require_both_classes(y, "gradient boosting fit")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        prior = y.mean()
        self.init_score_ = float(np.log(prior / (1.0 - prior)))
        seed = 0 if self.random_state is None else self.random_state

        order = _tree.presort(X)
        XT = np.ascontiguousarray(X.T)
        raw = np.full(len(X), self.init_score_)
        self.trees_ = []
        for stage in range(self.n_trees):
            p = sigmoid(raw)
            grad = p - y
            hess = p * (1.0 - p)
            if self.goss:
                idx, w = goss_sample(grad, self.top_rate, self.other_rate,
                                     derive_seed(seed, stage))
                weight = np.zeros(len(X))
                weight[idx] = w
                cnt = (weight > 0).astype(np.float64)
            else:
                weight = np.ones(len(X))
                cnt = weight
            tree = grow(XT, order, grad * weight, hess * weight, cnt,
                        criterion=_tree.NEWTON, max_depth=self.max_depth,
                        min_samples_leaf=self.min_samples_leaf, lam=NEWTON_DAMPING,
                        seed=derive_seed(seed, stage, 1))
            tree.value *= self.learning_rate
            raw += tree.predict(X)
            self.trees_.append(tree)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "trees_")
        X = check_features(X, n_features=self.n_features_in_)
        raw = np.full(len(X), self.init_score_)
        for tree in self.trees_:
            raw += tree.predict(X)
        return raw

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

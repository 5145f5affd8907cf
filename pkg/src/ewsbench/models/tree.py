"""Entropy decision trees and the shared fitted-tree container."""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..utils import DataError, check_binary_labels, check_features, require_both_classes
from . import _tree


def entropy(class_counts):
    """Base-2 entropy of a class-count vector; ``0 log 0`` is taken as 0."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty set is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def information_gain(parent_counts, child_counts):
    """Parent entropy minus the size-weighted entropy of the children.

    ``child_counts`` is a list of class-count vectors that must partition
    ``parent_counts`` class by class.
    """
    parent = np.asarray(parent_counts, dtype=np.float64)
    children = [np.asarray(c, dtype=np.float64) for c in child_counts]
    if not children:
        raise ValueError("need at least one child")
    if not np.allclose(np.sum(children, axis=0), parent):
        raise ValueError("children do not partition the parent counts")
    total = parent.sum()
    weighted = sum(c.sum() / total * entropy(c) for c in children if c.sum() > 0)
    return entropy(parent) - weighted


@dataclass
class Tree:
    """Array-backed binary tree. ``feature == -1`` marks a leaf.

    ``impurity`` holds node entropy for classification trees and ``gain`` the
    split's information gain (or Newton gain for gradient trees).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    count: np.ndarray
    impurity: np.ndarray
    gain: np.ndarray

    @property
    def node_count(self):
        return len(self.feature)

    @property
    def depth(self):
        depth = np.zeros(self.node_count, dtype=int)
        for node in range(self.node_count):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def used_features(self):
        return set(int(f) for f in self.feature if f >= 0)

    def predict(self, X):
        return _tree.predict_tree(X, self.feature, self.threshold, self.left,
                                  self.right, self.value)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "weight": self.weight.tolist(),
            "count": self.count.tolist(),
            "impurity": self.impurity.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        ints = ("feature", "left", "right")
        return cls(**{
            k: np.asarray(d[k], dtype=np.int32 if k in ints else np.float64)
            for k in cls.__dataclass_fields__
        })


def grow(XT, order, a, b, cnt, *, criterion, max_depth=None, min_samples_leaf=1,
         max_features=None, lam=0.0, min_gain=1e-12, seed=0):
    """Grow one tree; ``XT`` is the feature-major copy of X, ``order`` its presort."""
    d = XT.shape[0]
    mf = d if max_features is None else int(max_features)
    out = _tree.build_tree(
        XT, order,
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(cnt, dtype=np.float64),
        criterion,
        -1 if max_depth is None else int(max_depth),
        float(min_samples_leaf), max(1, min(mf, d)), float(lam), float(min_gain),
        int(seed) & 0x7FFFFFFF,
    )
    return Tree(*out)


def resolve_max_features(max_features, n_features):
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if isinstance(max_features, float):
        return max(1, int(max_features * n_features))
    return max(1, min(int(max_features), n_features))


class DecisionTreeClassifier(ClassifierMixin, BaseEstimator):
    """Binary classification tree grown by information gain.

    Candidate thresholds are midpoints between consecutive distinct values;
    equal gains resolve to the lower feature index, then the lower threshold.
    ``predict_proba`` returns leaf class-1 proportions.
    """

    def __init__(self, max_depth=6, min_samples_leaf=20, max_features=None,
                 random_state=0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X = check_features(X)
        y = check_binary_labels(y, len(X))
        require_both_classes(y, "decision tree fit")
        w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, float)
        if np.any(w < 0):
            raise DataError("sample weights must be non-negative")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.tree_ = grow(
            np.ascontiguousarray(X.T), _tree.presort(X), y * w, w, w, criterion=_tree.ENTROPY,
            max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
            max_features=resolve_max_features(self.max_features, X.shape[1]),
            seed=0 if self.random_state is None else self.random_state,
        )
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "tree_")
        X = check_features(X, n_features=self.n_features_in_)
        p = self.tree_.predict(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

"""Bootstrap random forests over the shared tree kernel."""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..utils import check_binary_labels, check_features, derive_seed, require_both_classes
from . import _tree
from .tree import grow, resolve_max_features


def _bootstrap_counts(n, seed):
    rng = np.random.default_rng(seed)
    return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)


class _BaseForest(BaseEstimator):
    _criterion = None

    def __init__(self, n_trees=300, max_features="sqrt", max_depth=None,
                 min_samples_leaf=1, bootstrap=True, random_state=0):
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _stats(self, y, counts):
        raise NotImplementedError

    def _grow_all(self, X, y):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        n, d = X.shape
        order = _tree.presort(X)
        XT = np.ascontiguousarray(X.T)
        mf = resolve_max_features(self.max_features, d)
        seed = 0 if self.random_state is None else self.random_state
        trees = []
        for t in range(self.n_trees):
            tree_seed = derive_seed(seed, t)
            counts = _bootstrap_counts(n, tree_seed) if self.bootstrap else np.ones(n)
            a, b = self._stats(y, counts)
            trees.append(grow(
                XT, order, a, b, counts, criterion=self._criterion,
                max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
                max_features=mf, seed=tree_seed,
            ))
        return trees

    def _mean_prediction(self, X):
        check_is_fitted(self, "trees_")
        X = check_features(X, n_features=self.n_features_in_)
        out = np.zeros(len(X))
        for tree in self.trees_:
            out += tree.predict(X)
        return out / len(self.trees_)


class RandomForestClassifier(ClassifierMixin, _BaseForest):
    """Entropy trees on bootstrap samples with ``sqrt(d)`` features per split.

    ``predict_proba`` averages leaf class-1 proportions; ``predict_votes``
    gives the per-tree majority vote fraction.
    """

    _criterion = _tree.ENTROPY

    def _stats(self, y, counts):
        return y * counts, counts

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y, len(X))
        require_both_classes(y, "random forest fit")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.trees_ = self._grow_all(X, y)
        return self

    def predict_proba(self, X):
        p = self._mean_prediction(X)
        return np.column_stack([1.0 - p, p])

    def predict_votes(self, X):
        check_is_fitted(self, "trees_")
        X = check_features(X, n_features=self.n_features_in_)
        votes = np.zeros(len(X))
        for tree in self.trees_:
            votes += tree.predict(X) > 0.5
        return votes / len(self.trees_)

    def predict(self, X):
        return (self.predict_votes(X) > 0.5).astype(int)


class RandomForestRegressor(RegressorMixin, _BaseForest):
    """Least-squares forest; used by the missForest imputer."""

    _criterion = _tree.NEWTON

    def __init__(self, n_trees=50, max_features="sqrt", max_depth=None,
                 min_samples_leaf=5, bootstrap=True, random_state=0):
        super().__init__(n_trees=n_trees, max_features=max_features,
                         max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                         bootstrap=bootstrap, random_state=random_state)

    def _stats(self, y, counts):
        return -y * counts, counts

    def fit(self, X, y):
        X = check_features(X)
        y = np.asarray(y, dtype=np.float64)
        if len(y) != len(X) or not np.all(np.isfinite(y)):
            raise ValueError("y must be finite and match X rows")
        self.n_features_in_ = X.shape[1]
        self.trees_ = self._grow_all(X, y)
        return self

    def predict(self, X):
        return self._mean_prediction(X)

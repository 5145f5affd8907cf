"""Iterative random-forest imputation (missForest)."""
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .models.forest import RandomForestRegressor
from .utils import derive_seed


class MissForest(TransformerMixin, BaseEstimator):
    """missForest imputation with the package's own random-forest regressor.

    Missing cells start at the column median. Each iteration visits the
    incomplete columns in increasing-missingness order, fits a forest on the
    rows where the column is observed (all other columns as predictors) and
    re-predicts its missing cells. Iteration stops as soon as the total
    squared change of the imputed cells grows, returning the previous
    iterate, or after ``max_iter`` rounds.

    Columns with no observed value fall back to ``fallback`` (per-column
    values, e.g. the pooled median of that vital) or 0 when unavailable, and
    are listed in ``fully_missing_``. Observed cells are never modified.

    Parameters
    ----------
    n_trees : int, default=50
    max_iter : int, default=10
    min_samples_leaf : int, default=5
    random_state : int, default=0
    fallback : array-like of shape (n_features,), optional
    """

    def __init__(self, n_trees=50, max_iter=10, min_samples_leaf=5, random_state=0,
                 fallback=None):
        self.n_trees = n_trees
        self.max_iter = max_iter
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state
        self.fallback = fallback

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
        if X.size == 0:
            raise ValueError("cannot impute an empty matrix")
        mask = np.isnan(X)
        self.n_features_in_ = X.shape[1]
        with np.errstate(all="ignore"):
            med = np.array([np.median(X[~mask[:, j], j]) if (~mask[:, j]).any() else np.nan
                            for j in range(X.shape[1])])
        self.fully_missing_ = [int(j) for j in np.flatnonzero(np.isnan(med))]
        if self.fallback is not None:
            fb = np.asarray(self.fallback, dtype=float)
            med = np.where(np.isnan(med), fb, med)
        self.statistics_ = np.where(np.isnan(med), 0.0, med)
        return self

    def transform(self, X):
        check_is_fitted(self, "statistics_")
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan", copy=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("column count differs from fit")
        mask = np.isnan(X)
        self.n_iter_ = 0
        self.changes_ = []
        if not mask.any():
            return X
        X[mask] = np.take(self.statistics_, np.nonzero(mask)[1])

        n_miss = mask.sum(axis=0)
        observed = (~mask).sum(axis=0)
        targets = [j for j in np.argsort(n_miss, kind="stable")
                   if n_miss[j] > 0 and observed[j] > 0]
        if X.shape[1] < 2 or not targets:
            return X

        previous = X
        prev_change = np.inf
        seed = 0 if self.random_state is None else self.random_state
        for it in range(self.max_iter):
            current = previous.copy()
            for j in targets:
                rows = mask[:, j]
                others = np.delete(np.arange(X.shape[1]), j)
                forest = RandomForestRegressor(
                    n_trees=self.n_trees, min_samples_leaf=self.min_samples_leaf,
                    random_state=derive_seed(seed, it, j),
                )
                forest.fit(current[~rows][:, others], current[~rows, j])
                current[rows, j] = forest.predict(current[rows][:, others])
            change = float(np.sum((current[mask] - previous[mask]) ** 2))
            self.changes_.append(change)
            if change > prev_change:
                break
            previous = current
            prev_change = change
            self.n_iter_ = it + 1
        return previous


@dataclass
class ImputeReport:
    cells_missing: int = 0
    per_column: dict = field(default_factory=dict)
    fully_missing: list = field(default_factory=list)
    iterations: int = 0


def missforest_impute(matrix, trees=50, max_iter=10, seed=0):
    """Impute a :class:`FeatureMatrix`; returns ``(imputed matrix, report)``.

    A vital column that is missing everywhere falls back to the median of all
    observed values of the same vital across timestamps.
    """
    X = matrix.X
    if X.size == 0:
        raise ValueError("cannot impute an empty matrix")
    mask = np.isnan(X)
    fallback = np.full(X.shape[1], np.nan)
    for j, c in enumerate(matrix.columns):
        if c.slot is None:
            continue
        same = [i for i, d in enumerate(matrix.columns) if d.source == c.source]
        vals = X[:, same][~mask[:, same]]
        if vals.size:
            fallback[j] = np.median(vals)
    imp = MissForest(n_trees=trees, max_iter=max_iter, random_state=seed, fallback=fallback)
    Xi = imp.fit_transform(X)
    report = ImputeReport(
        cells_missing=int(mask.sum()),
        per_column={matrix.columns[j].name: int(mask[:, j].sum())
                    for j in range(X.shape[1]) if mask[:, j].any()},
        fully_missing=[matrix.columns[j].name for j in imp.fully_missing_],
        iterations=imp.n_iter_,
    )
    out = matrix.subset(np.arange(len(X)))
    out.X = Xi
    return out, report

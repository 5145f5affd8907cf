import warnings

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..utils import check_binary_labels, check_features


class GaussianNaiveBayes(ClassifierMixin, BaseEstimator):
    """Bayes' rule with per-class, per-feature independent Gaussians.

    Posterior P(h|d) is computed in log space and normalised over the two
    classes. Per-class variances are floored at
    ``var_floor * max(column variance)``.
    """

    def __init__(self, var_floor=1e-9):
        self.var_floor = var_floor

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y, len(X))
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        present = [c for c in (0, 1) if np.any(y == c)]
        if len(present) < 2:
            warnings.warn("naive Bayes fitted on a single class; the other prior is 0",
                          RuntimeWarning, stacklevel=2)
        max_var = float(X.var(axis=0).max()) if len(X) > 1 else 0.0
        self.epsilon_ = self.var_floor * max_var if max_var > 0 else self.var_floor

        d = X.shape[1]
        self.class_prior_ = np.zeros(2)
        self.theta_ = np.zeros((2, d))
        self.var_ = np.ones((2, d))
        for c in present:
            Xc = X[y == c]
            self.class_prior_[c] = len(Xc) / len(X)
            self.theta_[c] = Xc.mean(axis=0)
            self.var_[c] = np.maximum(Xc.var(axis=0), self.epsilon_)
        return self

    def _joint_log_likelihood(self, X):
        jll = np.full((len(X), 2), -np.inf)
        for c in (0, 1):
            if self.class_prior_[c] == 0:
                continue
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            ll = ll - 0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            jll[:, c] = np.log(self.class_prior_[c]) + ll
        return jll

    def predict_proba(self, X):
        check_is_fitted(self, "theta_")
        X = check_features(X, n_features=self.n_features_in_)
        jll = self._joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..utils import check_binary_labels, check_features, require_both_classes
from .boosting import sigmoid


def _log_loss(z, y):
    # log(1 + exp(z)) - y*z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


class LogisticRegressionGD(ClassifierMixin, BaseEstimator):
    """L2-regularised logistic regression by full-batch gradient descent.

    Features are standardised (constant columns get sd 1). The step size is
    ``1 / L`` with ``L`` the Lipschitz constant of the loss gradient, which
    makes the objective non-increasing. Stops when the gradient norm drops
    below ``tol`` or after ``max_iter`` steps. The intercept is unpenalised.

    Attributes
    ----------
    coef_, intercept_ : weights on the standardised scale
    mean_, scale_ : standardisation vectors
    loss_history_ : objective value before each step, plus the final value
    """

    def __init__(self, l2=1e-3, tol=1e-6, max_iter=5000):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter

    def _objective(self, Z, y, w):
        return _log_loss(Z @ w, y) + 0.5 * self.l2 * float(w[1:] @ w[1:])

    def fit(self, X, y):
        X = check_features(X)
        y = check_binary_labels(y, len(X))
        require_both_classes(y, "logistic regression fit")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.mean_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale_ = np.where(sd > 0, sd, 1.0)
        Z = np.column_stack([np.ones(len(X)), (X - self.mean_) / self.scale_])
        n = len(Z)

        lipschitz = 0.25 * np.linalg.norm(Z, 2) ** 2 / n + self.l2
        step = 1.0 / lipschitz
        penalty = np.full(Z.shape[1], self.l2)
        penalty[0] = 0.0

        w = np.zeros(Z.shape[1])
        history = []
        self.n_iter_ = 0
        for it in range(self.max_iter):
            z = Z @ w
            history.append(_log_loss(z, y) + 0.5 * self.l2 * float(w[1:] @ w[1:]))
            grad = Z.T @ (sigmoid(z) - y) / n + penalty * w
            if np.linalg.norm(grad) < self.tol:
                break
            w -= step * grad
            self.n_iter_ = it + 1
        history.append(self._objective(Z, y, w))
        self.loss_history_ = np.array(history)
        self.intercept_ = float(w[0])
        self.coef_ = w[1:].copy()
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_features(X, n_features=self.n_features_in_)
        return (X - self.mean_) / self.scale_ @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

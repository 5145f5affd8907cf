"""Input validation and seeding helpers shared by the estimators."""
import numpy as np
from sklearn.utils.validation import check_array


class EwsError(Exception):
    """Base class for package errors."""


class ConfigError(EwsError):
    """Invalid run configuration."""


class DataError(EwsError):
    """Unusable input data."""


def check_features(X, *, n_features=None):
    """Return ``X`` as a finite float64 C-contiguous 2-D array.

    NaN or infinite cells raise ``ValueError``.
    """
    X = check_array(X, dtype=np.float64, order="C", ensure_all_finite=True)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(
            f"X has {X.shape[1]} features, but the model was fitted with {n_features}"
        )
    return X


def check_binary_labels(y, n_samples=None):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be 1-D")
    if n_samples is not None and len(y) != n_samples:
        raise ValueError(f"got {len(y)} labels for {n_samples} rows")
    if y.dtype == bool:
        return y.astype(np.float64)
    y = y.astype(np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary (0/1 or bool)")
    return y


def require_both_classes(y, what="fit"):
    if y.min() == y.max():
        raise DataError(f"{what} needs both classes present; got only class {int(y[0])}")


def derive_seed(seed, *index):
    """Child seed for ``index`` under master ``seed``.

    Independent of call order, so parallel workers reproduce serial results.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(i) for i in index]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])

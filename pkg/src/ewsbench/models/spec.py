"""Algorithm registry, fit/score contract on FeatureMatrix, JSON model files."""
import inspect
import json
from dataclasses import dataclass, field

import numpy as np

from ..utils import DataError
from .boosting import GradientBoostingClassifier
from .forest import RandomForestClassifier
from .logistic import LogisticRegressionGD
from .naive_bayes import GaussianNaiveBayes
from .tree import DecisionTreeClassifier, Tree

FORMAT_TAG = "ewsbench-model/1"

ALGORITHMS = {
    "naive_bayes": (GaussianNaiveBayes, {}),
    "logistic_regression": (LogisticRegressionGD, {}),
    "decision_tree": (DecisionTreeClassifier, {}),
    "random_forest": (RandomForestClassifier, {}),
    "gbdt": (GradientBoostingClassifier, {"goss": False}),
    "gbdt_goss": (GradientBoostingClassifier, {"goss": True}),
}
STOCHASTIC = {"decision_tree", "random_forest", "gbdt", "gbdt_goss"}


def _allowed_params(algorithm):
    cls, fixed = ALGORITHMS[algorithm]
    names = set(inspect.signature(cls.__init__).parameters) - {"self", "random_state"}
    return names - set(fixed)


@dataclass(frozen=True)
class ClassifierSpec:
    """Algorithm tag + hyperparameters + seed; unknown keys are rejected."""

    algorithm: str
    params: dict = field(default_factory=dict)
    seed: int | None = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; "
                             f"choose from {', '.join(ALGORITHMS)}")
        unknown = set(self.params) - _allowed_params(self.algorithm)
        if unknown:
            raise ValueError(f"{self.algorithm}: unknown parameters {sorted(unknown)}")
        if self.algorithm in STOCHASTIC and self.seed is None:
            raise ValueError(f"{self.algorithm} is stochastic and needs a seed")

    def build(self, seed=None):
        cls, fixed = ALGORITHMS[self.algorithm]
        kwargs = {**fixed, **self.params}
        if "random_state" in inspect.signature(cls.__init__).parameters:
            kwargs["random_state"] = self.seed if seed is None else seed
        return cls(**kwargs)

    def with_seed(self, seed):
        return ClassifierSpec(self.algorithm, dict(self.params), seed)

    def to_dict(self):
        return {"algorithm": self.algorithm, "params": dict(self.params), "seed": self.seed}


@dataclass
class TrainedModel:
    """A fitted estimator bound to the column layout it was trained on.

    ``threshold`` is the cost-optimal cut-off found on the training data;
    ``medians`` are training column medians (live-mode fill and occlusion
    reference); ``encoders`` are the categorical code books.
    """

    spec: ClassifierSpec
    estimator: object
    columns: list
    threshold: float = 0.5
    medians: np.ndarray | None = None
    encoders: dict | None = None

    def check_columns(self, matrix):
        if [c.name for c in matrix.columns] != [c.name for c in self.columns]:
            raise ValueError("feature columns differ from those the model was trained on")

    def predict_proba(self, matrix):
        self.check_columns(matrix)
        return self.estimator.predict_proba(matrix.X)[:, 1]

    def score_array(self, X):
        return self.estimator.predict_proba(X)[:, 1]


def fit(spec, matrix, seed=None):
    """Fit ``spec`` on a :class:`FeatureMatrix` -> :class:`TrainedModel`."""
    if len(matrix.X) < 2:
        raise DataError("need at least 2 rows to fit")
    if np.isnan(matrix.X).any():
        raise DataError("feature matrix contains NaN; impute first")
    est = spec.build(seed).fit(matrix.X, matrix.y)
    return TrainedModel(spec if seed is None else spec.with_seed(seed), est,
                        list(matrix.columns), medians=np.median(matrix.X, axis=0))


def predict_proba(model, matrix):
    return model.predict_proba(matrix)


# serialisation ---------------------------------------------------------------

def _estimator_state(est):
    if isinstance(est, GaussianNaiveBayes):
        return {"class_prior": est.class_prior_.tolist(), "theta": est.theta_.tolist(),
                "var": est.var_.tolist(), "epsilon": est.epsilon_}
    if isinstance(est, LogisticRegressionGD):
        return {"coef": est.coef_.tolist(), "intercept": est.intercept_,
                "mean": est.mean_.tolist(), "scale": est.scale_.tolist()}
    if isinstance(est, DecisionTreeClassifier):
        return {"tree": est.tree_.to_dict()}
    if isinstance(est, RandomForestClassifier):
        return {"trees": [t.to_dict() for t in est.trees_]}
    if isinstance(est, GradientBoostingClassifier):
        return {"init_score": est.init_score_, "trees": [t.to_dict() for t in est.trees_]}
    raise TypeError(f"cannot serialise {type(est).__name__}")


def _restore_estimator(spec, state, n_features):
    est = spec.build()
    est.n_features_in_ = n_features
    est.classes_ = np.array([0, 1])
    if isinstance(est, GaussianNaiveBayes):
        est.class_prior_ = np.array(state["class_prior"])
        est.theta_ = np.array(state["theta"])
        est.var_ = np.array(state["var"])
        est.epsilon_ = state["epsilon"]
    elif isinstance(est, LogisticRegressionGD):
        est.coef_ = np.array(state["coef"])
        est.intercept_ = state["intercept"]
        est.mean_ = np.array(state["mean"])
        est.scale_ = np.array(state["scale"])
    elif isinstance(est, DecisionTreeClassifier):
        est.tree_ = Tree.from_dict(state["tree"])
    elif isinstance(est, RandomForestClassifier):
        est.trees_ = [Tree.from_dict(t) for t in state["trees"]]
    elif isinstance(est, GradientBoostingClassifier):
        est.init_score_ = state["init_score"]
        est.trees_ = [Tree.from_dict(t) for t in state["trees"]]
    return est


def model_to_dict(model):
    return {
        "format": FORMAT_TAG,
        "spec": model.spec.to_dict(),
        "columns": [{"name": c.name, "source": c.source, "slot": c.slot}
                    for c in model.columns],
        "threshold": model.threshold,
        "medians": None if model.medians is None else np.asarray(model.medians).tolist(),
        "encoders": model.encoders,
        "params": _estimator_state(model.estimator),
    }


def model_from_dict(d):
    from ..windowing import Column

    if d.get("format") != FORMAT_TAG:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    spec = ClassifierSpec(d["spec"]["algorithm"], d["spec"]["params"], d["spec"]["seed"])
    columns = [Column(c["name"], c["source"], c["slot"]) for c in d["columns"]]
    est = _restore_estimator(spec, d["params"], len(columns))
    medians = None if d["medians"] is None else np.array(d["medians"], dtype=float)
    return TrainedModel(spec, est, columns, d["threshold"], medians, d.get("encoders"))


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))

from .boosting import GradientBoostingClassifier, goss_sample, sigmoid
from .forest import RandomForestClassifier, RandomForestRegressor
from .logistic import LogisticRegressionGD
from .naive_bayes import GaussianNaiveBayes
from .spec import (
    ALGORITHMS,
    ClassifierSpec,
    TrainedModel,
    fit,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_proba,
    save_model,
)
from .tree import DecisionTreeClassifier, Tree, entropy, information_gain

__all__ = [
    "ALGORITHMS",
    "ClassifierSpec",
    "DecisionTreeClassifier",
    "GaussianNaiveBayes",
    "GradientBoostingClassifier",
    "LogisticRegressionGD",
    "RandomForestClassifier",
    "RandomForestRegressor",
    "TrainedModel",
    "Tree",
    "entropy",
    "fit",
    "goss_sample",
    "information_gain",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict_proba",
    "save_model",
    "sigmoid",
]

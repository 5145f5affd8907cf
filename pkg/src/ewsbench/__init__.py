"""Clinical deterioration early-warning benchmark: protocols, from-scratch models,
validation schemes, explanations and a streaming alert daemon."""
from .ews import mews_score, news2_score
from .ingest import Encounter, Observation, VitalKind
from .metrics import auc, kruskal_wallis, optimal_threshold
from .models import ClassifierSpec, TrainedModel, fit, load_model, save_model
from .utils import ConfigError, DataError, EwsError

__version__ = "0.1.0"

__all__ = [
    "ClassifierSpec",
    "ConfigError",
    "DataError",
    "Encounter",
    "EwsError",
    "Observation",
    "TrainedModel",
    "VitalKind",
    "auc",
    "fit",
    "kruskal_wallis",
    "load_model",
    "mews_score",
    "news2_score",
    "optimal_threshold",
    "save_model",
]

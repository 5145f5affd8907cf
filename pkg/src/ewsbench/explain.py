"""Permutation importance and per-alert occlusion explanations."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .ingest import VitalKind
from .metrics import auc
from .utils import derive_seed

# Normal ranges: the 0-point bands of the protocol tables; glucose and
# diastolic pressure have no protocol band and use conventional adult limits.
NORMAL_RANGES = {
    VitalKind.HEART_RATE: (51.0, 90.0),
    VitalKind.SYSTOLIC_BP: (111.0, 219.0),
    VitalKind.RESPIRATORY_RATE: (12.0, 20.0),
    VitalKind.OXYGEN_SATURATION: (96.0, 100.0),
    VitalKind.TEMPERATURE: (36.1, 38.0),
    VitalKind.BLOOD_GLUCOSE: (70.0, 180.0),
    VitalKind.DIASTOLIC_BP: (50.0, 100.0),
}


@dataclass
class ImportanceReport:
    names: list
    mean_drop: np.ndarray
    std_drop: np.ndarray
    rank: np.ndarray  # 1 = most important
    baseline_auc: float

    def top(self, n=10):
        order = np.argsort(self.rank)
        return [(self.names[i], float(self.mean_drop[i]), float(self.std_drop[i]))
                for i in order[:n]]


def _scores(model, X):
    if hasattr(model, "score_array"):
        return model.score_array(X)
    return model.predict_proba(X)[:, 1]


def permutation_importance(model, X, labels, repeats=5, seed=0, names=None):
    """Mean AUC drop when each column is shuffled, over ``repeats`` shuffles.

    Shuffles are seeded per (column, repeat), so the result does not depend
    on evaluation order.
    """
    X = np.asarray(X, dtype=float)
    if hasattr(model, "columns") and X.shape[1] != len(model.columns):
        raise ValueError("column count differs from the model's training columns")
    base = auc(_scores(model, X), labels)
    d = X.shape[1]
    drops = np.zeros((d, repeats))
    for j in range(d):
        Xp = X.copy()
        for r in range(repeats):
            rng = np.random.default_rng(derive_seed(seed, j, r))
            Xp[:, j] = X[rng.permutation(len(X)), j]
            drops[j, r] = base - auc(_scores(model, Xp), labels)
    mean = drops.mean(axis=1)
    order = sorted(range(d), key=lambda j: (-mean[j], j))
    rank = np.empty(d, dtype=int)
    rank[order] = np.arange(1, d + 1)
    names = list(names) if names is not None else [f"x{j}" for j in range(d)]
    return ImportanceReport(names, mean, drops.std(axis=1), rank, base)


@dataclass
class Contributor:
    feature: str
    value: float
    delta: float
    out_of_range: bool


@dataclass
class AlertExplanation:
    encounter_id: str
    score: float
    contributors: list = field(default_factory=list)

    def to_dict(self):
        return {"encounter_id": self.encounter_id, "score": self.score,
                "contributors": [asdict(c) for c in self.contributors]}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def out_of_range(column, value, ranges=None):
    ranges = NORMAL_RANGES if ranges is None else ranges
    if column.slot is None:
        return False
    lo, hi = ranges[VitalKind(column.source)]
    return not (lo <= value <= hi)


def explain_alert(model, row, encounter_id, medians=None, ranges=None, top_k=3):
    """Occlusion attribution for one imputed feature row.

    Each feature is replaced by its training median and the score change
    ``original - occluded`` recorded. The ``top_k`` positive deltas are
    returned, largest first, with out-of-range flags from the normal-range
    table.
    """
    row = np.asarray(row, dtype=float).reshape(-1)
    if len(row) != len(model.columns):
        raise ValueError("window does not match the model's feature columns")
    medians = model.medians if medians is None else np.asarray(medians, dtype=float)
    score = float(model.score_array(row[None, :])[0])
    occluded = np.repeat(row[None, :], len(row), axis=0)
    idx = np.arange(len(row))
    occluded[idx, idx] = medians
    deltas = score - model.score_array(occluded)
    changed = row != medians
    cands = [j for j in range(len(row)) if changed[j] and deltas[j] > 0]
    cands.sort(key=lambda j: (-deltas[j], j))
    contributors = [Contributor(model.columns[j].name, float(row[j]), float(deltas[j]),
                                out_of_range(model.columns[j], row[j], ranges))
                    for j in cands[:top_k]]
    return AlertExplanation(str(encounter_id), score, contributors)

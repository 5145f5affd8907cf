"""Longitudinal observations -> fixed 5-timestamp feature windows and matrices."""
import csv
import hashlib
import json
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

import numpy as np

from .ingest import VITALS, VitalKind

N_SLOTS = 5
STATIC_COLUMNS = ("age", "sex", "los_days", "ward", "department")
SEX_CODES = {"female": 0, "male": 1}


def slot_label(k, n_slots=N_SLOTS):
    """Slot index 0..n-1 -> 't-4' .. 't'."""
    lag = n_slots - 1 - k
    return "t" if lag == 0 else f"t-{lag}"


@dataclass(frozen=True)
class TimeGrid:
    """Five slot times ending ``gap`` before ``anchor``, ``step`` apart."""

    anchor: object
    step: timedelta = timedelta(hours=6)
    gap: timedelta = timedelta(hours=12)

    @property
    def cutoff(self):
        return self.anchor - self.gap

    @property
    def slots(self):
        return tuple(self.cutoff - k * self.step for k in range(N_SLOTS - 1, -1, -1))


def resample_to_grid(enc, grid):
    """Place the latest observation per (slot interval, vital) on the grid.

    Slot k covers ``(slot_{k-1}, slot_k]``, the first slot one step before
    it. Nothing after ``grid.cutoff`` is read. Returns a (5, n_vitals) float
    array with NaN for empty cells.
    """
    out = np.full((N_SLOTS, len(VITALS)), np.nan)
    obs = enc.observations
    times = [o.timestamp for o in obs]
    slots = grid.slots
    lo = bisect_right(times, slots[0] - grid.step)
    hi = bisect_right(times, grid.cutoff)
    col = {kind: j for j, kind in enumerate(VITALS)}
    k = 0
    for idx in range(lo, hi):
        ob = obs[idx]
        while ob.timestamp > slots[k]:
            k += 1
        # sorted input: later observations overwrite earlier ones
        out[k, col[ob.kind]] = ob.value
    return out


def forward_fill(matrix, max_steps=2):
    """Carry each column's last value forward at most ``max_steps`` rows."""
    m = np.array(matrix, dtype=float, copy=True)
    src = np.asarray(matrix, dtype=float)
    for j in range(m.shape[1]):
        last, last_row = np.nan, None
        for k in range(m.shape[0]):
            if not np.isnan(src[k, j]):
                last, last_row = src[k, j], k
            elif last_row is not None and k - last_row <= max_steps:
                m[k, j] = last
    return m


@dataclass
class FeatureWindow:
    encounter_id: str
    hospital_id: str
    grid: TimeGrid
    vitals: np.ndarray  # (5, n_vitals), NaN where still missing
    age: float
    sex: str
    los_days: float
    ward: str
    department: str
    label: bool

    def vitals_at(self, k):
        return {kind: self.vitals[k, j] for j, kind in enumerate(VITALS)}


@dataclass
class WindowSet:
    windows: list
    dropped: dict = field(default_factory=dict)  # encounter id -> reason
    forward_filled: int = 0


def _check_geometry(window, gap, step):
    if step <= timedelta(0) or gap < timedelta(0):
        raise ValueError("step must be positive and gap non-negative")
    if window - gap != (N_SLOTS - 1) * step:
        raise ValueError(
            f"window - gap must equal {N_SLOTS - 1} steps to give {N_SLOTS} timestamps"
        )


def make_window(enc, grid, max_fill=2):
    raw = resample_to_grid(enc, grid)
    filled = forward_fill(raw, max_fill)
    los = max(0.0, (grid.cutoff - enc.admission_time) / timedelta(days=1))
    window = FeatureWindow(enc.encounter_id, enc.hospital_id, grid, filled, float(enc.age),
                           enc.sex, los, enc.ward, enc.department, bool(enc.died))
    n_filled = int(np.sum(np.isnan(raw) & ~np.isnan(filled)))
    return window, n_filled


def build_windows(encounters, window=timedelta(hours=36), gap=timedelta(hours=12),
                  step=timedelta(hours=6), max_fill=2):
    """One window per encounter, anchored at its outcome time.

    Encounters shorter than ``gap`` or with nothing on the grid after forward
    filling are dropped with a reason.
    """
    _check_geometry(window, gap, step)
    result = WindowSet([])
    for enc in encounters:
        if enc.los < gap:
            result.dropped[enc.encounter_id] = "stay shorter than gap"
            continue
        w, n_filled = make_window(enc, TimeGrid(enc.outcome_time, step, gap), max_fill)
        if np.all(np.isnan(w.vitals)):
            result.dropped[enc.encounter_id] = "no vitals in window"
            continue
        result.windows.append(w)
        result.forward_filled += n_filled
    return result


class CategoryEncoder:
    """Frequency-ranked ordinal codes; 0 is reserved for unseen categories."""

    def __init__(self, mapping=None):
        self.mapping = dict(mapping or {})

    def fit(self, values):
        counts = Counter(values)
        ranked = sorted(counts, key=lambda v: (-counts[v], str(v)))
        self.mapping = {v: i + 1 for i, v in enumerate(ranked)}
        return self

    def transform(self, values):
        return np.array([self.mapping.get(v, 0) for v in values], dtype=float)


@dataclass(frozen=True)
class Column:
    name: str
    source: str  # vital kind value or "static"
    slot: int | None  # 0..4 for vitals


def vital_columns(n_slots=N_SLOTS):
    return [Column(f"{kind.value}@{slot_label(k)}", kind.value, k)
            for kind in VITALS for k in range(N_SLOTS - n_slots, N_SLOTS)]


def static_columns():
    return [Column(name, "static", None) for name in STATIC_COLUMNS]


@dataclass
class FeatureMatrix:
    X: np.ndarray
    columns: list
    y: np.ndarray
    groups: np.ndarray
    encounter_ids: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n, p = self.X.shape
        if p != len(self.columns):
            raise ValueError("column descriptors do not match X")
        if not (len(self.y) == len(self.groups) == len(self.encounter_ids) == n):
            raise ValueError("labels/groups/ids must align with rows")

    @property
    def names(self):
        return [c.name for c in self.columns]

    @property
    def n_slots(self):
        return len({c.slot for c in self.columns if c.slot is not None})

    def column_index(self, name):
        return self.names.index(name)

    def subset(self, rows):
        rows = np.asarray(rows)
        return FeatureMatrix(self.X[rows], list(self.columns), self.y[rows],
                             self.groups[rows], self.encounter_ids[rows], dict(self.meta))

    def select_columns(self, idx):
        idx = list(idx)
        return FeatureMatrix(self.X[:, idx], [self.columns[i] for i in idx], self.y,
                             self.groups, self.encounter_ids, dict(self.meta))

    def vitals_at_slot(self, slot):
        """(n, n_vitals) array of the vitals at grid slot ``slot``; NaN if absent."""
        out = np.full((len(self.X), len(VITALS)), np.nan)
        for j, kind in enumerate(VITALS):
            name = f"{kind.value}@{slot_label(slot)}"
            if name in self.names:
                out[:, j] = self.X[:, self.column_index(name)]
        return out

    def to_csv(self, path):
        """Write the matrix plus a ``.json`` sidecar describing columns and run parameters."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["encounter_id", "hospital_id", "label"] + self.names)
            for i in range(len(self.X)):
                w.writerow([self.encounter_ids[i], self.groups[i], int(self.y[i])]
                           + [repr(float(v)) for v in self.X[i]])
        sidecar = {
            "columns": [{"name": c.name, "source": c.source, "slot": c.slot}
                        for c in self.columns],
            "rows": int(len(self.X)),
            "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
            "meta": self.meta,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        columns = [Column(c["name"], c["source"], c["slot"]) for c in sidecar["columns"]]
        ids, groups, y, rows = [], [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header[3:] != [c.name for c in columns]:
                raise ValueError(f"{path}: header does not match sidecar descriptors")
            for row in r:
                ids.append(row[0])
                groups.append(row[1])
                y.append(int(row[2]))
                rows.append([float(v) for v in row[3:]])
        X = np.array(rows, dtype=float).reshape(len(rows), len(columns))
        return cls(X, columns, np.array(y), np.array(groups, dtype=object),
                   np.array(ids, dtype=object), sidecar.get("meta", {}))


@dataclass
class Encoders:
    ward: CategoryEncoder
    department: CategoryEncoder

    def to_dict(self):
        return {"ward": self.ward.mapping, "department": self.department.mapping}

    @classmethod
    def from_dict(cls, d):
        return cls(CategoryEncoder(d["ward"]), CategoryEncoder(d["department"]))


def fit_encoders(windows):
    return Encoders(CategoryEncoder().fit([w.ward for w in windows]),
                    CategoryEncoder().fit([w.department for w in windows]))


def window_row(w, encoders):
    """Flatten one window: vitals kind-major/timestamp-minor, then statics."""
    static = [w.age, float(SEX_CODES[w.sex]), w.los_days,
              encoders.ward.transform([w.ward])[0],
              encoders.department.transform([w.department])[0]]
    return np.concatenate([w.vitals.T.reshape(-1), static])


def assemble_matrix(windows, encoders=None):
    """Stack windows into a :class:`FeatureMatrix` (NaN cells kept for imputation).

    Returns ``(matrix, encoders)``; pass fitted ``encoders`` to reuse codes.
    """
    if encoders is None:
        encoders = fit_encoders(windows)
    columns = vital_columns() + static_columns()
    if windows:
        X = np.vstack([window_row(w, encoders) for w in windows])
    else:
        X = np.empty((0, len(columns)))
    return FeatureMatrix(
        X, columns,
        np.array([int(w.label) for w in windows]),
        np.array([w.hospital_id for w in windows], dtype=object),
        np.array([w.encounter_id for w in windows], dtype=object),
    ), encoders


def truncate_timestamps(matrix, k):
    """Keep the last ``k`` timestamp blocks of every vital plus the statics."""
    if not 1 <= k <= N_SLOTS:
        raise ValueError(f"k must be in 1..{N_SLOTS}, got {k}")
    keep = [i for i, c in enumerate(matrix.columns)
            if c.slot is None or c.slot >= N_SLOTS - k]
    return matrix.select_columns(keep)


def vital_kind_of(column):
    return None if column.slot is None else VitalKind(column.source)

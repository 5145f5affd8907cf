"""Domain types, CSV ingestion, plausibility filtering and encounter assembly."""
import csv
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .utils import DataError


class VitalKind(str, Enum):
    TEMPERATURE = "temperature"  # degC
    OXYGEN_SATURATION = "oxygen_saturation"  # %
    RESPIRATORY_RATE = "respiratory_rate"  # breaths/min
    BLOOD_GLUCOSE = "blood_glucose"  # mg/dL
    SYSTOLIC_BP = "systolic_bp"  # mmHg
    DIASTOLIC_BP = "diastolic_bp"  # mmHg
    HEART_RATE = "heart_rate"  # beats/min

    @classmethod
    def parse(cls, name, aliases=None):
        key = name.strip().lower()
        if aliases and key in aliases:
            key = aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown measure {name!r}") from None


VITALS = tuple(VitalKind)

DEFAULT_BOUNDS = {
    VitalKind.TEMPERATURE: (30.0, 45.0),
    VitalKind.OXYGEN_SATURATION: (50.0, 100.0),
    VitalKind.RESPIRATORY_RATE: (4.0, 80.0),
    VitalKind.BLOOD_GLUCOSE: (10.0, 1000.0),
    VitalKind.SYSTOLIC_BP: (30.0, 300.0),
    VitalKind.DIASTOLIC_BP: (10.0, 200.0),
    VitalKind.HEART_RATE: (20.0, 300.0),
}


@dataclass(frozen=True)
class Observation:
    encounter_id: str
    timestamp: datetime
    kind: VitalKind
    value: float


@dataclass(frozen=True)
class EncounterMeta:
    encounter_id: str
    hospital_id: str
    age: float
    sex: str
    ward: str
    department: str
    admission_time: datetime
    outcome_time: datetime
    died: bool


@dataclass(frozen=True)
class Encounter:
    encounter_id: str
    hospital_id: str
    age: float
    sex: str
    ward: str
    department: str
    admission_time: datetime
    outcome_time: datetime
    died: bool
    observations: tuple = ()

    @property
    def los(self):
        return self.outcome_time - self.admission_time

    @property
    def los_days(self):
        return self.los / timedelta(days=1)

    @property
    def meta(self):
        return EncounterMeta(self.encounter_id, self.hospital_id, self.age, self.sex,
                             self.ward, self.department, self.admission_time,
                             self.outcome_time, self.died)


@dataclass(frozen=True)
class RejectedRow:
    source: str
    line: int
    reason: str
    raw: tuple = ()


@dataclass
class ColumnMapping:
    """Header names in the two input tables, keyed by field role."""

    encounter_id: str = "encounter_id"
    timestamp: str = "timestamp"
    measure: str = "measure"
    value: str = "value"
    hospital_id: str = "hospital_id"
    age: str = "age"
    sex: str = "sex"
    ward: str = "ward"
    department: str = "department"
    admission_time: str = "admission_time"
    outcome_time: str = "outcome_time"
    died: str = "died"
    # measure name in file -> VitalKind value
    measure_aliases: dict = field(default_factory=dict)
    sex_aliases: dict = field(default_factory=lambda: {
        "f": "female", "female": "female", "m": "male", "male": "male",
    })
    timezone: str = "UTC"


MEASUREMENT_FIELDS = ("encounter_id", "timestamp", "measure", "value")
ENCOUNTER_FIELDS = ("encounter_id", "hospital_id", "age", "sex", "ward", "department",
                    "admission_time", "outcome_time", "died")
_TRUE = {"1", "true", "yes", "y", "t", "sim", "s"}
_FALSE = {"0", "false", "no", "n", "f", "nao", "não"}


def parse_timestamp(text, tz="UTC"):
    """ISO-8601 -> naive datetime in ``tz``, truncated to the minute."""
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is not None:
        zone = timezone.utc if tz == "UTC" else ZoneInfo(tz)
        ts = ts.astimezone(zone).replace(tzinfo=None)
    return ts.replace(second=0, microsecond=0)


def format_timestamp(ts):
    return ts.strftime("%Y-%m-%dT%H:%M")


def _parse_bool(text):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _reader(path, mapping, roles):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    fh = open(path, newline="", encoding="utf-8-sig")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        return None, {}, iter(())
    header = [h.strip() for h in header]
    idx = {}
    for role in roles:
        col = getattr(mapping, role)
        if col not in header:
            fh.close()
            raise DataError(f"{path}: mapped column {col!r} (for {role}) missing from header")
        idx[role] = header.index(col)
    return fh, idx, reader


def _check_failure_rate(path, n_rows, n_bad):
    if n_rows and n_bad / n_rows > 0.5:
        raise DataError(f"{path}: {n_bad} of {n_rows} rows malformed (>50%)")


def read_measurements(path, mapping=None):
    """Parse the longitudinal measurement table.

    Returns ``(observations, rejected)``. Malformed rows become
    :class:`RejectedRow` records; more than 50% malformed raises
    :class:`DataError`.
    """
    mapping = mapping or ColumnMapping()
    fh, idx, reader = _reader(path, mapping, MEASUREMENT_FIELDS)
    observations, rejected = [], []
    n_rows = 0
    if fh is None:
        return observations, rejected
    with fh:
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            n_rows += 1
            line = reader.line_num
            try:
                fields = {k: row[i] for k, i in idx.items()}
            except IndexError:
                rejected.append(RejectedRow(str(path), line, "missing fields", tuple(row)))
                continue
            try:
                kind = VitalKind.parse(fields["measure"], mapping.measure_aliases)
            except ValueError:
                rejected.append(RejectedRow(str(path), line, "unknown measure", tuple(row)))
                continue
            try:
                ts = parse_timestamp(fields["timestamp"], mapping.timezone)
            except ValueError:
                rejected.append(RejectedRow(str(path), line, "unparseable timestamp", tuple(row)))
                continue
            try:
                value = float(fields["value"].strip().replace(",", "."))
            except ValueError:
                rejected.append(RejectedRow(str(path), line, "non-numeric value", tuple(row)))
                continue
            if not math.isfinite(value):
                rejected.append(RejectedRow(str(path), line, "non-finite value", tuple(row)))
                continue
            eid = fields["encounter_id"].strip()
            if not eid:
                rejected.append(RejectedRow(str(path), line, "empty encounter id", tuple(row)))
                continue
            observations.append(Observation(eid, ts, kind, value))
    _check_failure_rate(path, n_rows, len(rejected))
    return observations, rejected


def read_encounters(path, mapping=None):
    """Parse the encounter metadata table -> ``(metadata, rejected)``."""
    mapping = mapping or ColumnMapping()
    fh, idx, reader = _reader(path, mapping, ENCOUNTER_FIELDS)
    metas, rejected = [], []
    seen = set()
    n_rows = 0
    if fh is None:
        return metas, rejected
    with fh:
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            n_rows += 1
            line = reader.line_num
            try:
                f = {k: row[i].strip() for k, i in idx.items()}
                sex = mapping.sex_aliases.get(f["sex"].lower())
                if sex is None:
                    raise ValueError(f"unknown sex {f['sex']!r}")
                age = float(f["age"])
                if not math.isfinite(age) or age < 0:
                    raise ValueError("age must be a non-negative number")
                adm = parse_timestamp(f["admission_time"], mapping.timezone)
                out = parse_timestamp(f["outcome_time"], mapping.timezone)
                if out < adm:
                    raise ValueError("outcome before admission")
                meta = EncounterMeta(f["encounter_id"], f["hospital_id"], age, sex,
                                     f["ward"], f["department"], adm, out,
                                     _parse_bool(f["died"]))
            except (ValueError, IndexError) as exc:
                rejected.append(RejectedRow(str(path), line, str(exc), tuple(row)))
                continue
            if meta.encounter_id in seen:
                rejected.append(RejectedRow(str(path), line, "duplicate encounter id", tuple(row)))
                continue
            seen.add(meta.encounter_id)
            metas.append(meta)
    _check_failure_rate(path, n_rows, len(rejected))
    return metas, rejected


@dataclass
class IngestResult:
    observations: list
    encounters: list
    rejected: list


def parse_longitudinal_csv(measurements_path, encounters_path, mapping=None):
    """Read both input tables; see :func:`read_measurements`."""
    obs, rej_obs = read_measurements(measurements_path, mapping)
    metas, rej_enc = read_encounters(encounters_path, mapping)
    return IngestResult(obs, metas, rej_obs + rej_enc)


def filter_outliers(observations, bounds=None):
    """Keep observations inside the inclusive ``[lo, hi]`` bounds of their kind.

    Returns ``(kept, dropped)`` where ``dropped`` counts removals per kind.
    """
    bounds = DEFAULT_BOUNDS if bounds is None else bounds
    missing = [k.value for k in VITALS if k not in bounds]
    if missing:
        raise ValueError(f"no plausibility bounds for: {', '.join(missing)}")
    kept = []
    dropped = Counter()
    for ob in observations:
        lo, hi = bounds[ob.kind]
        if lo <= ob.value <= hi:
            kept.append(ob)
        else:
            dropped[ob.kind] += 1
    return kept, dropped


@dataclass
class Assembly:
    encounters: list
    excluded: list  # encounter ids with < 2 collection events
    orphans: list  # observations whose encounter id has no metadata
    out_of_span: int = 0


def assemble_encounters(observations, metadata):
    """Join observations to metadata and drop single-collection encounters.

    A collection event is a distinct timestamp carrying at least one vital.
    Observations outside the admission-outcome span are discarded.
    """
    by_id = defaultdict(list)
    for ob in observations:
        by_id[ob.encounter_id].append(ob)
    known = {m.encounter_id for m in metadata}
    orphans = [ob for eid, obs in by_id.items() if eid not in known for ob in obs]

    encounters, excluded = [], []
    out_of_span = 0
    for meta in metadata:
        obs = by_id.get(meta.encounter_id, [])
        inside = [o for o in obs if meta.admission_time <= o.timestamp <= meta.outcome_time]
        out_of_span += len(obs) - len(inside)
        inside.sort(key=lambda o: (o.timestamp, VITALS.index(o.kind)))
        if len({o.timestamp for o in inside}) < 2:
            excluded.append(meta.encounter_id)
            continue
        encounters.append(Encounter(*_meta_fields(meta), observations=tuple(inside)))
    return Assembly(encounters, excluded, orphans, out_of_span)


def _meta_fields(meta):
    return (meta.encounter_id, meta.hospital_id, meta.age, meta.sex, meta.ward,
            meta.department, meta.admission_time, meta.outcome_time, meta.died)


def write_longitudinal_csv(encounters, measurements_path, encounters_path):
    """Serialise encounters back to the two-table input format."""
    with open(measurements_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEASUREMENT_FIELDS)
        for enc in encounters:
            for ob in enc.observations:
                w.writerow([ob.encounter_id, format_timestamp(ob.timestamp),
                            ob.kind.value, repr(float(ob.value))])
    with open(encounters_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENCOUNTER_FIELDS)
        for enc in encounters:
            w.writerow([enc.encounter_id, enc.hospital_id, repr(float(enc.age)), enc.sex,
                        enc.ward, enc.department, format_timestamp(enc.admission_time),
                        format_timestamp(enc.outcome_time), int(enc.died)])


AGE_BANDS = (("0-15", 0, 15), ("15-17", 15, 18), ("18-29", 18, 30), ("30-39", 30, 40),
             ("40-49", 40, 50), ("50-59", 50, 60), ("60-69", 60, 70), ("70+", 70, math.inf))
LOS_BANDS = (("0-2", 0, 3), ("3-5", 3, 6), ("6-8", 6, 9), ("9-11", 9, 12),
             ("12+", 12, math.inf))


def _band(value, bands):
    for label, lo, hi in bands:
        if lo <= value < hi:
            return label
    raise ValueError(f"value {value} outside every band")


@dataclass
class CohortSummary:
    n: int
    sections: dict  # section -> list of (category, count, percent)
    age_mean: float
    age_sd: float
    los_mean: float
    los_sd: float

    def rows(self):
        for section, cats in self.sections.items():
            for cat, count, pct in cats:
                yield section, cat, count, pct

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["section", "category", "count", "percent"])
            for section, cat, count, pct in self.rows():
                w.writerow([section, cat, count, f"{pct:.1f}"])
            w.writerow(["age", "mean", f"{self.age_mean:.2f}", f"{self.age_sd:.2f}"])
            w.writerow(["los_days", "mean", f"{self.los_mean:.2f}", f"{self.los_sd:.2f}"])

    def render(self):
        lines = [f"GLOBAL POPULATION N={self.n:,}"]
        extras = {"age": (self.age_mean, self.age_sd, "{:.0f}"),
                  "los_days": (self.los_mean, self.los_sd, "{:.2f}")}
        for section, cats in self.sections.items():
            lines.append("")
            lines.append(f"{section.upper():<14}{'#':>10}{'%':>8}")
            for cat, count, pct in cats:
                lines.append(f"{cat + ':':<14}{count:>10,}{pct:>8.1f}")
            if section in extras:
                mean, sd, fmt = extras[section]
                lines.append(f"{'Mean:':<14}{fmt.format(mean):>10} (+/- {sd:.2f})")
        return "\n".join(lines)


def summarize_cohort(encounters):
    """Table-style demographic breakdown of a cohort."""
    if not encounters:
        raise ValueError("cannot summarise an empty cohort")
    n = len(encounters)

    def section(labels, order):
        counts = Counter(labels)
        return [(c, counts.get(c, 0), 100.0 * counts.get(c, 0) / n) for c in order]

    ages = np.array([e.age for e in encounters], dtype=float)
    los = np.array([e.los_days for e in encounters], dtype=float)
    hospitals = sorted({e.hospital_id for e in encounters})
    sections = {
        "age": section([_band(a, AGE_BANDS) for a in ages], [b[0] for b in AGE_BANDS]),
        "sex": section([e.sex for e in encounters], ["female", "male"]),
        "los_days": section([_band(v, LOS_BANDS) for v in los], [b[0] for b in LOS_BANDS]),
        "death": section(["yes" if e.died else "no" for e in encounters], ["yes", "no"]),
        "hospital": section([e.hospital_id for e in encounters], hospitals),
    }
    sd = (lambda x: float(x.std(ddof=1)) if len(x) > 1 else 0.0)
    return CohortSummary(n, sections, float(ages.mean()), sd(ages), float(los.mean()), sd(los))

"""MEWS and NEWS2 scoring from a single timestamp of vitals.

Band edges are frozen as follows. A band printed as "a-b" on an integer
(or 0.1) grid covers ``(previous upper, b]``; a "<=x" band covers
``(-inf, x]``; a ">=y" band covers ``[y, inf)`` and the band below it stops
short of ``y``. MEWS temperature is printed with lower bounds ("<35",
"35-38.4", ">=38.5") and is lower-closed. Every real number therefore falls
in exactly one band per parameter.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import VitalKind

MEWS = "MEWS"
NEWS2 = "NEWS2"
PROTOCOLS = (MEWS, NEWS2)
ALERT_THRESHOLD = {MEWS: 1, NEWS2: 2}
INF = math.inf


@dataclass(frozen=True)
class Band:
    lower: float
    upper: float
    points: int
    label: str
    lower_closed: bool = False
    upper_closed: bool = True

    def contains(self, x):
        above = x > self.lower or (self.lower_closed and x == self.lower)
        below = x < self.upper or (self.upper_closed and x == self.upper)
        return above and below


def _table(*bands):
    return tuple(Band(*b) for b in bands)


MEWS_TABLE = {
    VitalKind.SYSTOLIC_BP: _table(
        (-INF, 70, 3, "≤70"), (70, 80, 2, "71–80"), (80, 100, 1, "81–100"),
        (100, 200, 0, "101–199", False, False), (200, INF, 2, "≥200", True, False)),
    VitalKind.HEART_RATE: _table(
        (-INF, 40, 2, "≤40"), (40, 50, 1, "41–50"), (50, 100, 0, "51–100"),
        (100, 110, 1, "101–110"), (110, 130, 2, "111–129", False, False),
        (130, INF, 3, "≥130", True, False)),
    VitalKind.RESPIRATORY_RATE: _table(
        (-INF, 8, 2, "≤8"), (8, 14, 0, "9–14"), (14, 20, 1, "15–20"),
        (20, 30, 2, "21–29", False, False), (30, INF, 3, "≥30", True, False)),
    VitalKind.TEMPERATURE: _table(
        (-INF, 35.0, 2, "<35", False, False), (35.0, 38.5, 0, "35–38.4", True, False),
        (38.5, INF, 2, "≥38.5", True, False)),
}

NEWS2_TABLE = {
    VitalKind.RESPIRATORY_RATE: _table(
        (-INF, 8, 3, "≤8"), (8, 11, 1, "9–11"), (11, 20, 0, "12–20"),
        (20, 25, 2, "21–24", False, False), (25, INF, 3, "≥25", True, False)),
    VitalKind.OXYGEN_SATURATION: _table(
        (-INF, 91, 3, "≤91"), (91, 93, 2, "92–93"), (93, 96, 1, "94–95", False, False),
        (96, INF, 0, "≥96", True, False)),
    VitalKind.TEMPERATURE: _table(
        (-INF, 35.0, 3, "≤35.0"), (35.0, 36.0, 1, "35.1–36.0"), (36.0, 38.0, 0, "36.1–38.0"),
        (38.0, 39.1, 1, "38.1–39.0", False, False), (39.1, INF, 2, "≥39.1", True, False)),
    VitalKind.SYSTOLIC_BP: _table(
        (-INF, 90, 3, "≤90"), (90, 100, 2, "91–100"), (100, 110, 1, "101–110"),
        (110, 220, 0, "111–219", False, False), (220, INF, 3, "≥220", True, False)),
    VitalKind.HEART_RATE: _table(
        (-INF, 40, 3, "≤40"), (40, 50, 1, "41–50"), (50, 90, 0, "51–90"),
        (90, 110, 1, "91–110"), (110, 131, 2, "111–130", False, False),
        (131, INF, 3, "≥131", True, False)),
}

# Non-vital NEWS2 items; consciousness (AVPU) is unassessed and always 0.
NEWS2_SUPPLEMENTAL_O2 = (("no", 0), ("yes", 2))
AVPU_POINTS = (("alert", 0),)

TABLES = {MEWS: MEWS_TABLE, NEWS2: NEWS2_TABLE}
MAX_TOTAL = {
    MEWS: sum(max(b.points for b in bands) for bands in MEWS_TABLE.values()),
    NEWS2: sum(max(b.points for b in bands) for bands in NEWS2_TABLE.values())
    + max(p for _, p in NEWS2_SUPPLEMENTAL_O2),
}


@dataclass
class EwsResult:
    protocol: str
    total: int
    per_parameter: dict = field(default_factory=dict)
    threshold_used: int = 0

    @property
    def alert(self):
        return self.total > self.threshold_used


class ScoringError(ValueError):
    pass


def band_points(table, kind, value):
    for band in table[kind]:
        if band.contains(value):
            return band.points
    raise AssertionError(f"band table for {kind} is not exhaustive at {value}")


def _present(vitals, kind):
    v = vitals.get(kind)
    if v is None:
        return None
    v = float(v)
    return None if math.isnan(v) else v


def _score(protocol, vitals, threshold, extra=None):
    table = TABLES[protocol]
    per = {}
    for kind in table:
        v = _present(vitals, kind)
        if v is not None:
            per[kind.value] = band_points(table, kind, v)
    if not per:
        raise ScoringError(f"{protocol}: no scorable vitals present")
    if extra:
        per.update(extra)
    return EwsResult(protocol, int(sum(per.values())), per,
                     ALERT_THRESHOLD[protocol] if threshold is None else threshold)


def mews_score(vitals, threshold=None):
    """MEWS over a ``{VitalKind: value}`` mapping; absent vitals score 0."""
    return _score(MEWS, vitals, threshold, {"avpu": 0})


def news2_score(vitals, on_oxygen=False, threshold=None):
    """NEWS2 (SpO2 scale 1) over a ``{VitalKind: value}`` mapping."""
    o2 = dict(NEWS2_SUPPLEMENTAL_O2)["yes" if on_oxygen else "no"]
    return _score(NEWS2, vitals, threshold, {"supplemental_o2": o2, "consciousness": 0})


def score(protocol, vitals, **kwargs):
    if protocol == MEWS:
        return mews_score(vitals, **kwargs)
    if protocol == NEWS2:
        return news2_score(vitals, **kwargs)
    raise ValueError(f"unknown protocol {protocol!r}")


def normalized(result):
    return result.total / MAX_TOTAL[result.protocol]


def score_rows(protocol, rows, kinds):
    """Normalised totals for a 2-D array of vitals (columns follow ``kinds``).

    Rows with nothing to score get NaN.
    """
    out = np.full(len(rows), np.nan)
    for r, row in enumerate(np.asarray(rows, dtype=float)):
        try:
            out[r] = normalized(score(protocol, dict(zip(kinds, row))))
        except ScoringError:
            pass
    return out


def band_rows():
    """Every band of both protocols as flat records, in a fixed order."""
    for protocol, table in TABLES.items():
        for kind, bands in table.items():
            for b in bands:
                yield {"protocol": protocol, "parameter": kind.value, "label": b.label,
                       "lower": b.lower, "upper": b.upper,
                       "lower_closed": b.lower_closed, "upper_closed": b.upper_closed,
                       "points": b.points, "rule": f"{b.label} → {b.points}"}
    for label, pts in NEWS2_SUPPLEMENTAL_O2:
        yield {"protocol": NEWS2, "parameter": "supplemental_o2", "label": label,
               "lower": "", "upper": "", "lower_closed": "", "upper_closed": "",
               "points": pts, "rule": f"{label} → {pts}"}
    for protocol in PROTOCOLS:
        for label, pts in AVPU_POINTS:
            yield {"protocol": protocol, "parameter": "consciousness", "label": label,
                   "lower": "", "upper": "", "lower_closed": "", "upper_closed": "",
                   "points": pts, "rule": f"{label} → {pts}"}


def dump_tables():
    """CSV text of all band tables."""
    buf = io.StringIO()
    fields = ["protocol", "parameter", "label", "lower", "upper", "lower_closed",
              "upper_closed", "points", "rule"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in band_rows():
        w.writerow(row)
    return buf.getvalue()

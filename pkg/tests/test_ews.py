import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewsbench import ews
from ewsbench.ews import MEWS, NEWS2, mews_score, news2_score
from ewsbench.ingest import VitalKind as V
from ewsbench.metrics import auc

from ews_golden import GOLDEN


@pytest.mark.parametrize("protocol,kind,value,points", GOLDEN)
def test_boundary_golden(protocol, kind, value, points):
    res = ews.score(protocol, {kind: value})
    assert res.per_parameter[kind.value] == points
    assert res.total == points


def test_mews_all_normal():
    res = mews_score({V.TEMPERATURE: 37.0, V.HEART_RATE: 80, V.RESPIRATORY_RATE: 12,
                      V.SYSTOLIC_BP: 120})
    assert res.total == 0 and not res.alert


def test_mews_crisis_vignette():
    res = mews_score({V.TEMPERATURE: 37.0, V.HEART_RATE: 204, V.RESPIRATORY_RATE: 12,
                      V.SYSTOLIC_BP: 47})
    assert res.per_parameter["heart_rate"] == 3
    assert res.per_parameter["systolic_bp"] == 3
    assert res.total == 6 and res.alert


def test_mews_threshold_is_strict():
    res = mews_score({V.TEMPERATURE: 37.0, V.HEART_RATE: 80, V.RESPIRATORY_RATE: 12,
                      V.SYSTOLIC_BP: 85})
    assert res.total == 1 and not res.alert


def test_news2_examples():
    normal = news2_score({V.RESPIRATORY_RATE: 16, V.OXYGEN_SATURATION: 97, V.TEMPERATURE: 37.0,
                          V.SYSTOLIC_BP: 120, V.HEART_RATE: 70})
    assert normal.total == 0 and not normal.alert
    two = news2_score({V.RESPIRATORY_RATE: 22, V.OXYGEN_SATURATION: 93, V.TEMPERATURE: 37.0,
                       V.SYSTOLIC_BP: 120, V.HEART_RATE: 70})
    assert two.total == 4 and two.alert
    sbp = news2_score({V.SYSTOLIC_BP: 47})
    assert sbp.total == 3 and sbp.alert


def test_news2_supplemental_oxygen_adds_two():
    assert news2_score({V.HEART_RATE: 70}, on_oxygen=True).total == 2


def test_missing_everything_is_an_error():
    with pytest.raises(ews.ScoringError):
        mews_score({V.OXYGEN_SATURATION: 97})
    with pytest.raises(ews.ScoringError):
        news2_score({V.HEART_RATE: float("nan")})


def test_max_totals():
    worst_mews = mews_score({V.SYSTOLIC_BP: 60, V.HEART_RATE: 140, V.RESPIRATORY_RATE: 35,
                             V.TEMPERATURE: 34})
    assert worst_mews.total == ews.MAX_TOTAL[MEWS]
    assert ews.normalized(worst_mews) == 1.0
    worst_news = news2_score({V.SYSTOLIC_BP: 60, V.HEART_RATE: 140, V.RESPIRATORY_RATE: 35,
                              V.TEMPERATURE: 34, V.OXYGEN_SATURATION: 85}, on_oxygen=True)
    assert worst_news.total == ews.MAX_TOTAL[NEWS2]
    assert ews.normalized(mews_score({V.HEART_RATE: 80})) == 0.0


def test_normalized_batch_ranks_like_totals():
    rows = np.array([[37.0, 80, 12, 120], [37.0, 115, 22, 120], [37.0, 204, 12, 47]])
    kinds = [V.TEMPERATURE, V.HEART_RATE, V.RESPIRATORY_RATE, V.SYSTOLIC_BP]
    s = ews.score_rows(MEWS, rows, kinds)
    totals = [ews.mews_score(dict(zip(kinds, r))).total for r in rows]
    assert totals == [0, 4, 6]
    assert np.all(np.diff(s) > 0)
    assert auc(s, [0, 1, 1]) == 1.0


finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=300, deadline=None)
@given(finite)
def test_bands_exhaustive_and_disjoint(x):
    for table in ews.TABLES.values():
        for bands in table.values():
            assert sum(b.contains(x) for b in bands) == 1


@settings(max_examples=200, deadline=None)
@given(st.fixed_dictionaries({V.SYSTOLIC_BP: finite, V.HEART_RATE: finite,
                              V.RESPIRATORY_RATE: finite, V.TEMPERATURE: finite}),
       st.integers(min_value=0, max_value=12))
def test_threshold_changes_flag_only(vitals, threshold):
    base = mews_score(vitals)
    moved = mews_score(vitals, threshold=threshold)
    assert base.total == moved.total == sum(moved.per_parameter.values())
    assert moved.alert == (moved.total > threshold)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(40, 250), st.floats(20, 220), st.floats(4, 45),
                          st.floats(32, 42), st.floats(70, 100)), min_size=2, max_size=20))
def test_normalization_preserves_order(rows):
    kinds = [V.SYSTOLIC_BP, V.HEART_RATE, V.RESPIRATORY_RATE, V.TEMPERATURE,
             V.OXYGEN_SATURATION]
    for protocol in ews.PROTOCOLS:
        totals = np.array([ews.score(protocol, dict(zip(kinds, r))).total for r in rows])
        normed = ews.score_rows(protocol, np.array(rows), kinds)
        assert np.array_equal(np.argsort(totals, kind="stable"),
                              np.argsort(normed, kind="stable"))


def test_dump_tables():
    text = ews.dump_tables()
    assert text == ews.dump_tables()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert any(r["protocol"] == "MEWS" and r["parameter"] == "systolic_bp"
               and r["rule"] == "≤70 → 3" for r in rows)
    n_bands = sum(len(b) for t in ews.TABLES.values() for b in t.values())
    n_extra = len(ews.NEWS2_SUPPLEMENTAL_O2) + len(ews.PROTOCOLS) * len(ews.AVPU_POINTS)
    assert len(rows) == n_bands + n_extra


def test_band_points_are_small_integers():
    for table in ews.TABLES.values():
        for bands in table.values():
            assert all(b.points in (0, 1, 2, 3) for b in bands)
            assert bands[0].lower == -math.inf and bands[-1].upper == math.inf

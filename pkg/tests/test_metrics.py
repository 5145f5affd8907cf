import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ewsbench.metrics import (
    auc,
    chi2_sf,
    confusion_at,
    f1_at,
    gamma_q,
    kruskal_wallis,
    optimal_threshold,
)
from ewsbench.utils import DataError


def brute_auc(s, y):
    pos = [a for a, l in zip(s, y) if l]
    neg = [a for a, l in zip(s, y) if not l]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def scan_threshold(s, y, cost_fn, cost_fp):
    # every distinct cut: predict positive for the top-j distinct values
    best = None
    for cut in [-np.inf, *sorted(set(s))]:
        pred = np.asarray(s) > cut
        fn = np.sum(~pred & y)
        fp = np.sum(pred & ~y)
        c = cost_fn * fn + cost_fp * fp
        best = c if best is None else min(best, c)
    return best


def random_instance(rng, n_max, ties):
    n = int(rng.integers(2, n_max + 1))
    y = rng.random(n) < rng.uniform(0.1, 0.9)
    y[0], y[1] = True, False
    s = rng.integers(0, 6, n).astype(float) if ties else rng.normal(size=n)
    return s, y


def test_auc_examples():
    assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc([0.3] * 6, [0, 1, 0, 1, 0, 1]) == 0.5


def test_auc_matches_pair_counting():
    rng = np.random.default_rng(0)
    for i in range(300):
        s, y = random_instance(rng, 120, ties=i % 2 == 0)
        assert abs(auc(s, y) - brute_auc(s, y)) < 1e-12


def test_auc_needs_both_classes():
    with pytest.raises(DataError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=4, max_size=40), st.integers(0, 2 ** 31))
def test_auc_monotone_invariance(values, seed):
    rng = np.random.default_rng(seed)
    y = rng.random(len(values)) < 0.5
    y[0], y[1] = True, False
    s = np.asarray(values, dtype=float)
    assert auc(s, y) == pytest.approx(auc(np.exp(0.3 * s) - 5.0, y), abs=1e-15)
    assert auc(s, y) == pytest.approx(1.0 - auc(-s, y), abs=1e-12)


def test_threshold_examples():
    r = optimal_threshold([0.1, 0.2, 0.6, 0.9], [0, 0, 1, 1])
    assert 0.2 < r.threshold < 0.6
    assert r.cost == 0 and r.fnr == 0 and r.fpr == 0


def test_threshold_interleaved_equal_costs():
    s = np.arange(10) / 10.0
    y = np.array([0, 1] * 5, dtype=bool)
    r = optimal_threshold(s, y, 1.0, 1.0)
    assert r.cost == scan_threshold(s, y, 1.0, 1.0)


def test_threshold_matches_exhaustive_scan():
    rng = np.random.default_rng(1)
    for i in range(200):
        s, y = random_instance(rng, 200, ties=i % 3 == 0)
        cost_fn = float(rng.choice([1.0, 3.0, 10.0]))
        r = optimal_threshold(s, y, cost_fn, 1.0)
        assert r.cost == pytest.approx(scan_threshold(s, y, cost_fn, 1.0))
        again = confusion_at(s, y, r.threshold, cost_fn, 1.0)
        assert (again.tp, again.fp, again.fn) == (r.tp, r.fp, r.fn)


def test_f1_examples():
    y = [1, 1, 0, 0]
    assert f1_at([0.9, 0.8, 0.1, 0.2], y, 0.5) == 1.0
    assert f1_at([0.9, 0.1, 0.8, 0.2], [1, 1, 0, 0], 0.5) == 0.5
    # tp=2, fp=1, fn=1
    s = [0.9, 0.8, 0.7, 0.1, 0.2]
    assert f1_at(s, [1, 1, 0, 1, 0], 0.5) == pytest.approx(2 / 3)
    assert f1_at(s, [1, 1, 0, 1, 0], 5.0) == 0.0


def test_kruskal_wallis_hand_example():
    r = kruskal_wallis([1, 2, 3, 4, 5, 6], [0, 0, 0, 1, 1, 1])
    assert r.h == pytest.approx(27 / 7, abs=1e-9)
    assert r.p == pytest.approx(0.0495, abs=1e-3)
    assert r.df == 1 and r.significant


def test_kruskal_wallis_identical_groups():
    r = kruskal_wallis([1, 2, 3, 1, 2, 3], [0, 0, 0, 1, 1, 1])
    assert r.h == pytest.approx(0.0, abs=1e-12) and r.p == pytest.approx(1.0)
    const = kruskal_wallis([4.0] * 8, [0, 1] * 4)
    assert const.h == 0.0 and const.p == 1.0 and not const.significant


def test_kruskal_wallis_matches_scipy_with_ties():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(6, 80))
        v = rng.integers(0, 7, n).astype(float)
        g = rng.integers(0, int(rng.integers(2, 4)), n)
        g[:3] = [0, 1, 1]
        g[3] = 0
        if np.all(v == v[0]):
            continue
        ours = kruskal_wallis(v, g)
        ref = stats.kruskal(*[v[g == k] for k in np.unique(g)])
        assert ours.h == pytest.approx(ref.statistic, rel=1e-10, abs=1e-12)
        assert ours.p == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-100, 100), min_size=6, max_size=40))
def test_kruskal_wallis_rank_invariance(values):
    v = np.asarray(values, dtype=float)
    g = np.arange(len(v)) % 2
    if np.all(v == v[0]):
        return
    a = kruskal_wallis(v, g)
    b = kruskal_wallis(np.arctan(v / 50.0) * 7 + 3, g)
    assert a.h == pytest.approx(b.h, rel=1e-9, abs=1e-12)


def test_kruskal_wallis_null_calibration():
    rng = np.random.default_rng(3)
    hits = 0
    reps = 1000
    for _ in range(reps):
        v = rng.normal(size=400)
        y = rng.random(400) < 0.3
        hits += kruskal_wallis(v, y).significant
    assert 0.03 <= hits / reps <= 0.07


CHI2_TABLE = [
    # (x, df, upper tail) from standard printed chi-square tables
    (3.841, 1, 0.05), (6.635, 1, 0.01), (5.991, 2, 0.05), (9.210, 2, 0.01),
    (7.815, 3, 0.05), (11.070, 5, 0.05), (18.307, 10, 0.05), (2.706, 1, 0.10),
]


@pytest.mark.parametrize("x,df,p", CHI2_TABLE)
def test_chi2_sf_printed_table(x, df, p):
    assert chi2_sf(x, df) == pytest.approx(p, abs=5e-4)


def test_chi2_sf_matches_scipy():
    for df in (1, 2, 3, 4, 7, 15, 40):
        for x in np.concatenate([np.linspace(0.001, 5, 50), np.linspace(5, 150, 100)]):
            assert chi2_sf(x, df) == pytest.approx(stats.chi2.sf(x, df), rel=1e-9, abs=1e-14)
    assert chi2_sf(0.0, 3) == 1.0


def test_gamma_q_closed_forms():
    # Q(1, x) = exp(-x); Q(1/2, x) = erfc(sqrt(x))
    from math import erfc, exp, sqrt
    for x in (0.1, 1.0, 3.0, 20.0):
        assert gamma_q(1.0, x) == pytest.approx(exp(-x), rel=1e-12)
        assert gamma_q(0.5, x) == pytest.approx(erfc(sqrt(x)), rel=1e-12)

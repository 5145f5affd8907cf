import numpy as np
import pytest

from ewsbench.ingest import VITALS, VitalKind
from ewsbench.models import ClassifierSpec
from ewsbench.utils import DataError
from ewsbench.validation import (
    CV10,
    LOGO,
    WINDOW,
    EwsProtocolSpec,
    kfold_cv,
    leave_one_group_out,
    parse_scorer,
    run_benchmark,
    select_significant,
    stratified_folds,
    windowing_validation,
)
from ewsbench.windowing import Column, FeatureMatrix, static_columns, vital_columns

NB = ClassifierSpec("naive_bayes")
NORMAL = {VitalKind.TEMPERATURE: 37.0, VitalKind.OXYGEN_SATURATION: 97.0,
          VitalKind.RESPIRATORY_RATE: 16.0, VitalKind.BLOOD_GLUCOSE: 100.0,
          VitalKind.SYSTOLIC_BP: 120.0, VitalKind.DIASTOLIC_BP: 75.0,
          VitalKind.HEART_RATE: 75.0}


def toy(X, y, groups=None):
    n, p = X.shape
    if p == 40:
        cols = vital_columns() + static_columns()
    else:
        cols = [Column(f"f{j}", "static", None) for j in range(p)]
    groups = np.array(groups if groups is not None else ["H1"] * n, dtype=object)
    return FeatureMatrix(np.asarray(X, dtype=float), cols, np.asarray(y, dtype=int), groups,
                         np.array([f"E{i}" for i in range(n)], dtype=object))


def vital_matrix(n, rng):
    """Normal-range vitals at all slots plus plausible statics."""
    X = np.empty((n, 40))
    for j, kind in enumerate(VITALS):
        X[:, 5 * j:5 * j + 5] = NORMAL[kind] + rng.normal(0, 0.3, (n, 5))
    X[:, 35] = rng.uniform(20, 90, n)
    X[:, 36] = rng.integers(0, 2, n)
    X[:, 37] = rng.uniform(0, 10, n)
    X[:, 38:] = rng.integers(1, 4, (n, 2))
    return X


def test_fold_sizes_for_105():
    y = np.array([1] * 30 + [0] * 75)
    folds = stratified_folds(y, 10, seed=0)
    assert sorted(len(f) for f in folds) == [10] * 5 + [11] * 5
    assert np.array_equal(np.sort(np.concatenate(folds)), np.arange(105))
    pos = [int(y[f].sum()) for f in folds]
    assert max(pos) - min(pos) <= 1


def test_fold_argument_checks():
    with pytest.raises(ValueError):
        stratified_folds([0, 1, 0], 1, 0)
    with pytest.raises(ValueError):
        stratified_folds([0, 1, 0], 4, 0)


def test_kfold_deterministic_and_disjoint():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 3))
    y = (X[:, 0] + rng.normal(size=120) > 0).astype(int)
    m = toy(X, y)
    spec = ClassifierSpec("random_forest", {"n_trees": 5}, seed=2)
    a = kfold_cv(spec, m, k=10, seed=4)
    b = kfold_cv(spec, m, k=10, seed=4)
    assert [f.auc for f in a.folds] == [f.auc for f in b.folds]
    assert [f.threshold for f in a.folds] == [f.threshold for f in b.folds]
    assert len(a.folds) == 10
    tests = []
    for f in a.folds:
        assert not set(f.train_index) & set(f.test_index)
        assert len(f.train_index) + len(f.test_index) == 120
        tests.extend(f.test_index)
    assert sorted(tests) == list(range(120))
    assert a.auc == pytest.approx(np.mean([f.auc for f in a.folds]))


def test_separable_decision_tree_auc_one():
    rng = np.random.default_rng(1)
    x = rng.normal(size=200)
    m = toy(np.c_[x, rng.normal(size=200)], (x > 0).astype(int))
    res = kfold_cv(ClassifierSpec("decision_tree", seed=0), m, k=10, seed=0)
    assert res.auc == 1.0


def test_threshold_chosen_on_training_rows_only():
    # a test-fold-only perturbation must not change the fold threshold
    rng = np.random.default_rng(2)
    X = rng.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(int)
    m = toy(X, y)
    base = kfold_cv(NB, m, k=5, seed=0)
    test0 = base.folds[0].test_index
    X2 = X.copy()
    X2[test0] = rng.normal(size=(len(test0), 2)) * 5
    moved = kfold_cv(NB, toy(X2, y), k=5, seed=0)
    assert moved.folds[0].threshold == base.folds[0].threshold


def test_logo_two_groups():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 2))
    y = (X[:, 0] > 0).astype(int)
    groups = ["A"] * 40 + ["B"] * 40
    res = leave_one_group_out(NB, toy(X, y, groups))
    assert [f.group for f in res.folds] == ["A", "B"]
    g = np.array(groups)
    for f in res.folds:
        assert set(g[f.test_index]) == {f.group}
        assert f.group not in set(g[f.train_index])


def test_logo_single_class_group_flagged():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 1))
    y = np.r_[(X[:40, 0] > 0).astype(int), np.zeros(20, dtype=int)]
    res = leave_one_group_out(NB, toy(X, y, ["A"] * 20 + ["B"] * 20 + ["C"] * 20))
    c = res.folds[2]
    assert c.auc is None and "AUC undefined" in c.flag
    assert res.auc == pytest.approx(np.mean([res.folds[0].auc, res.folds[1].auc]))


def test_kw_filter_drops_constant_feature():
    rng = np.random.default_rng(5)
    x = rng.normal(size=200)
    y = (x > 0).astype(int)
    X = np.c_[x, np.full(200, 3.0), rng.normal(size=200)]
    assert 0 in select_significant(X, y) and 1 not in select_significant(X, y)
    res = leave_one_group_out(NB, toy(X, y, ["A", "B"] * 100))
    assert all(f.n_features < 3 for f in res.folds)


def test_shifted_hospital_has_lowest_auc():
    rng = np.random.default_rng(6)
    n_per = 150
    Xs, ys, gs = [], [], []
    for h in range(6):
        y = (rng.random(n_per) < 0.3).astype(int)
        if h == 5:
            # signal replaced by a label-independent offset
            x = rng.normal(size=n_per) + 2.0
        else:
            x = 2.0 * y + rng.normal(size=n_per)
        Xs.append(np.c_[x, rng.normal(size=n_per)])
        ys.append(y)
        gs += [f"H{h + 1}"] * n_per
    res = leave_one_group_out(ClassifierSpec("logistic_regression"),
                              toy(np.vstack(Xs), np.concatenate(ys), gs))
    aucs = {f.group: f.auc for f in res.folds}
    assert min(aucs, key=aucs.get) == "H6"


def test_protocol_scorer_threshold_matches_flag():
    s = EwsProtocolSpec("MEWS")
    assert s.algorithm == "mews" and s.threshold == pytest.approx(1 / 11)
    assert parse_scorer("NEWS2") == EwsProtocolSpec("NEWS2")
    with pytest.raises(ValueError):
        EwsProtocolSpec("qSOFA")


def t4_signal_matrix(n=300, seed=7):
    rng = np.random.default_rng(seed)
    X = vital_matrix(n, rng)
    y = (rng.random(n) < 0.3).astype(int)
    hr_t4 = 5 * VITALS.index(VitalKind.HEART_RATE)
    X[:, hr_t4] = np.where(y == 1, 150.0, 75.0) + rng.normal(0, 2, n)
    return toy(X, y)


def test_windowing_t4_signal_oracle():
    m = t4_signal_matrix()
    dt = ClassifierSpec("decision_tree", {"max_depth": 3}, seed=0)
    grid, detail = windowing_validation([dt, EwsProtocolSpec("MEWS")], m, k_folds=5)
    assert grid["decision_tree"][4] > 0.95
    assert grid["mews"][4] < 0.7
    # protocols read one slot per k: k=1 reads t-4 and sees the signal
    assert grid["mews"][0] > 0.9


def test_windowing_k5_reuses_cv():
    m = t4_signal_matrix(n=150)
    cv = kfold_cv(NB, m, k=5, seed=3)
    grid, _ = windowing_validation([NB], m, k_folds=5, seed=3)
    assert grid["naive_bayes"][4] == cv.auc
    grid2, _ = windowing_validation([NB], m, k_folds=5, seed=3,
                                    full_history={"naive_bayes": cv})
    assert grid2 == grid


def test_run_benchmark_result_count():
    m = t4_signal_matrix(n=120)
    m.groups = np.array(["A", "B", "C"] * 40, dtype=object)
    rep = run_benchmark([NB, EwsProtocolSpec("NEWS2")], m, schemes=(CV10, LOGO, WINDOW),
                        k_folds=3)
    assert len(rep.results) == 2 * 3
    assert set(rep.windowing) == {"naive_bayes", "news2"}
    assert rep.get("news2", WINDOW).auc == rep.get("news2", CV10).auc
    with pytest.raises(ValueError):
        run_benchmark([NB], m, schemes=("bootstrap",))


def test_single_class_fold_rejected():
    m = toy(np.arange(12.0).reshape(-1, 1), [1] + [0] * 11)
    with pytest.raises(DataError):
        kfold_cv(NB, m, k=3)

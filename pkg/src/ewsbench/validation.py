"""Validation schemes: stratified k-fold, leave-one-hospital-out, windowing."""
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import ews
from .metrics import auc, f1_at, kruskal_wallis, optimal_threshold
from .models.spec import ClassifierSpec, fit
from .utils import DataError, derive_seed
from .windowing import N_SLOTS, slot_label, truncate_timestamps

CV10 = "cv10"
LOGO = "logo"
WINDOW = "window"
SCHEMES = (CV10, LOGO, WINDOW)


@dataclass(frozen=True)
class EwsProtocolSpec:
    """A rule-based protocol used as a scorer; nothing is fitted."""

    protocol: str

    def __post_init__(self):
        if self.protocol not in ews.PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")

    @property
    def algorithm(self):
        return self.protocol.lower()

    @property
    def threshold(self):
        # alert <=> total > T  <=>  normalised score > T / max
        return ews.ALERT_THRESHOLD[self.protocol] / ews.MAX_TOTAL[self.protocol]


def ews_as_scorer(protocol, matrix, slot=N_SLOTS - 1):
    """Normalised protocol totals for every row, read at grid ``slot``.

    Returns ``(scores, n_unscorable)``; unscorable rows hold NaN.
    """
    scores = ews.score_rows(protocol, matrix.vitals_at_slot(slot), list(ews.VitalKind))
    return scores, int(np.isnan(scores).sum())


def parse_scorer(name, params=None, seed=0):
    key = name.strip().lower()
    if key in ("mews", "news2"):
        return EwsProtocolSpec(key.upper())
    return ClassifierSpec(key, dict(params or {}), seed)


@dataclass
class FoldResult:
    fold: int
    group: str | None
    n_train: int
    n_test: int
    auc: float | None
    f1: float | None
    threshold: float | None
    flag: str = ""
    n_features: int | None = None
    train_index: np.ndarray | None = field(default=None, repr=False)
    test_index: np.ndarray | None = field(default=None, repr=False)


@dataclass
class SchemeResult:
    algorithm: str
    scheme: str
    folds: list

    def _mean(self, attr):
        vals = [getattr(f, attr) for f in self.folds if getattr(f, attr) is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def auc(self):
        return self._mean("auc")

    @property
    def f1(self):
        return self._mean("f1")

    @property
    def threshold(self):
        vals = [f.threshold for f in self.folds
                if f.threshold is not None and np.isfinite(f.threshold)]
        return float(np.mean(vals)) if vals else None


@dataclass
class EvalReport:
    results: list = field(default_factory=list)  # SchemeResult
    windowing: dict = field(default_factory=dict)  # algorithm -> [auc for k=1..5]
    meta: dict = field(default_factory=dict)

    def get(self, algorithm, scheme):
        for r in self.results:
            if r.algorithm == algorithm and r.scheme == scheme:
                return r
        raise KeyError((algorithm, scheme))


def stratified_folds(labels, k, seed):
    """Test-index arrays for ``k`` label-stratified folds.

    Rows are shuffled within each class, classes are concatenated, and rows
    are dealt round-robin, so fold sizes differ by at most one overall and
    per class.
    """
    y = np.asarray(labels).astype(int)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(y):
        raise ValueError(f"k={k} exceeds row count {len(y)}")
    rng = np.random.default_rng(seed)
    ordered = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in (0, 1)])
    assign = np.empty(len(y), dtype=int)
    assign[ordered] = np.arange(len(y)) % k
    return [np.flatnonzero(assign == f) for f in range(k)]


def _score_fold(scorer, matrix, train, test, seed, cost_fn, cost_fp, slot, fold_id,
                group=None, kw_filter=False):
    yt = matrix.y[test].astype(bool)
    ytr = matrix.y[train].astype(bool)
    n_features = None
    flag = ""
    if isinstance(scorer, EwsProtocolSpec):
        s, _ = ews_as_scorer(scorer.protocol, matrix.subset(test), slot)
        keep = ~np.isnan(s)
        if not keep.all():
            flag = f"{int((~keep).sum())} unscorable rows excluded"
        s, yt = s[keep], yt[keep]
        thr = scorer.threshold
    else:
        if ytr.all() or not ytr.any():
            raise DataError(f"fold {fold_id}: training portion has a single class")
        train_m = matrix.subset(train)
        cols = np.arange(len(matrix.columns))
        if kw_filter:
            cols = select_significant(train_m.X, train_m.y)
            if len(cols) == 0:
                cols = np.arange(len(matrix.columns))
                flag = "no significant features; kept all"
            train_m = train_m.select_columns(cols)
        n_features = len(cols)
        model = fit(scorer, train_m, seed=derive_seed(scorer.seed or 0, fold_id))
        thr = optimal_threshold(model.score_array(train_m.X), train_m.y, cost_fn, cost_fp).threshold
        s = model.score_array(matrix.X[test][:, cols])
    if yt.all() or not yt.any():
        return FoldResult(fold_id, group, len(train), len(test), None, None, thr,
                          (flag + "; " if flag else "") + "single-class test fold: AUC undefined",
                          n_features, train, test)
    return FoldResult(fold_id, group, len(train), len(test), auc(s, yt), f1_at(s, yt, thr),
                      thr, flag, n_features, train, test)


def _run(jobs, n_jobs):
    if n_jobs == 1:
        return [fn(*args) for fn, args in jobs]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args) for fn, args in jobs)


def kfold_cv(scorer, matrix, k=10, seed=0, cost_fn=10.0, cost_fp=1.0, slot=N_SLOTS - 1,
             n_jobs=1):
    """Stratified k-fold evaluation.

    Each fold's threshold is chosen on its training rows and applied to the
    test rows. Protocols are scored directly at grid ``slot``.
    """
    folds = stratified_folds(matrix.y, k, seed)
    for test in folds:
        if len(np.unique(matrix.y[test])) < 2:
            raise DataError("a stratified fold has a single class; use fewer folds")
    all_rows = np.arange(len(matrix.y))
    jobs = [(_score_fold, (scorer, matrix, np.setdiff1d(all_rows, test), test, seed,
                           cost_fn, cost_fp, slot, f))
            for f, test in enumerate(folds)]
    return SchemeResult(scorer.algorithm, CV10, _run(jobs, n_jobs))


def select_significant(X, y, alpha=0.05):
    """Columns whose Kruskal-Wallis p-value against the label is below ``alpha``."""
    return np.array([j for j in range(X.shape[1])
                     if kruskal_wallis(X[:, j], y, alpha).significant], dtype=int)


def leave_one_group_out(scorer, matrix, cost_fn=10.0, cost_fp=1.0, kw_filter=True,
                        n_jobs=1):
    """One fold per hospital; features are Kruskal-Wallis-filtered on training rows."""
    groups = np.asarray(matrix.groups)
    labels = sorted(set(groups.tolist()))
    if len(labels) < 2:
        raise DataError("leave-one-group-out needs at least two groups")
    jobs = []
    for f, g in enumerate(labels):
        test = np.flatnonzero(groups == g)
        train = np.flatnonzero(groups != g)
        jobs.append((_score_fold, (scorer, matrix, train, test, 0, cost_fn, cost_fp,
                                   N_SLOTS - 1, f, g, kw_filter)))
    return SchemeResult(scorer.algorithm, LOGO, _run(jobs, n_jobs))


def windowing_validation(scorers, matrix, k_folds=10, seed=0, cost_fn=10.0, cost_fp=1.0,
                         n_jobs=1, full_history=None):
    """AUC grid over 1..5 timestamps of history.

    Models see the last ``k`` timestamps; protocols score only timestamp
    ``t-(5-k)``. ``full_history`` maps algorithm -> an existing k-fold result
    on the full matrix with the same settings, reused for ``k = 5``. Returns ``({algorithm: [auc_k1..auc_k5]}, {algorithm: [SchemeResult...]})``.
    """
    if matrix.n_slots != N_SLOTS:
        raise ValueError("windowing validation needs the full 5-timestamp matrix")
    grid, detail = {}, {}
    for scorer in scorers:
        rows = []
        for k in range(1, N_SLOTS + 1):
            if k == N_SLOTS and full_history and scorer.algorithm in full_history:
                rows.append(full_history[scorer.algorithm])
                continue
            if isinstance(scorer, EwsProtocolSpec):
                res = kfold_cv(scorer, matrix, k_folds, seed, cost_fn, cost_fp, slot=k - 1,
                               n_jobs=n_jobs)
            else:
                res = kfold_cv(scorer, truncate_timestamps(matrix, k), k_folds, seed,
                               cost_fn, cost_fp, n_jobs=n_jobs)
            rows.append(res)
        grid[scorer.algorithm] = [r.auc for r in rows]
        detail[scorer.algorithm] = rows
    return grid, detail


WINDOW_LABELS = [slot_label(k) for k in range(N_SLOTS)]


def run_benchmark(scorers, matrix, schemes=(CV10, LOGO), k_folds=10, seed=0, cost_fn=10.0,
                  cost_fp=1.0, n_jobs=1):
    report = EvalReport(meta={"k_folds": k_folds, "seed": seed, "cost_fn": cost_fn,
                              "cost_fp": cost_fp, "rows": int(len(matrix.y)),
                              "positives": int(np.sum(matrix.y))})
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
    cv_results = {}
    for scorer in scorers:
        if CV10 in schemes:
            res = kfold_cv(scorer, matrix, k_folds, seed, cost_fn, cost_fp, n_jobs=n_jobs)
            cv_results[scorer.algorithm] = res
            report.results.append(res)
        if LOGO in schemes:
            report.results.append(leave_one_group_out(scorer, matrix, cost_fn, cost_fp,
                                                      n_jobs=n_jobs))
    if WINDOW in schemes:
        grid, detail = windowing_validation(scorers, matrix, k_folds, seed, cost_fn, cost_fp,
                                            n_jobs=n_jobs, full_history=cv_results)
        report.windowing = grid
        for alg, rows in detail.items():
            full = rows[-1]
            report.results.append(SchemeResult(alg, WINDOW, full.folds))
    return report

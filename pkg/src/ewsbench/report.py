"""Report files for an :class:`EvalReport`: CSV tables, long JSON and a run manifest.

Every number is rendered with three decimals and rows are emitted in a fixed
order, so identical reports serialise to identical bytes.
"""
import csv
import hashlib
import json
from pathlib import Path

from .utils import EwsError
from .validation import CV10, LOGO, WINDOW, WINDOW_LABELS

# Published reference values, keyed by our algorithm tag. The boosting rows
# map gbdt_goss to the GOSS-based library and gbdt to the plain one.
REFERENCE = {
    "gbdt_goss": {"cv10": (0.961, 0.671), "logo": (0.949, 0.620),
                  "window": (0.935, 0.943, 0.949, 0.956, 0.961)},
    "gbdt": {"cv10": (0.956, 0.632), "logo": (0.947, 0.649),
             "window": (0.928, 0.937, 0.944, 0.950, 0.956)},
    "random_forest": {"cv10": (0.940, 0.609), "logo": (0.933, 0.584),
                      "window": (0.906, 0.914, 0.923, 0.933, 0.940)},
    "logistic_regression": {"cv10": (0.932, 0.556), "logo": (0.932, 0.573),
                            "window": (0.905, 0.914, 0.920, 0.928, 0.932)},
    "naive_bayes": {"cv10": (0.841, 0.379), "logo": (0.853, 0.363),
                    "window": (0.858, 0.833, 0.831, 0.836, 0.841)},
    "news2": {"cv10": (0.704, 0.196), "logo": (0.704, 0.196),
              "window": (0.645, 0.651, 0.659, 0.678, 0.705)},
    "mews": {"cv10": (0.697, 0.175), "logo": (0.697, 0.175),
             "window": (0.658, 0.674, 0.677, 0.689, 0.697)},
}
REFERENCE_PER_HOSPITAL = {
    "gbdt_goss": {"H1": 0.98, "H2": 0.930721, "H3": 0.879299, "H4": 0.957988, "H5": 0.98,
                  "H6": 0.952274},
    "mews": {"H1": 0.73, "H2": 0.64, "H3": 0.66, "H4": 0.70, "H5": 0.67, "H6": 0.68},
    "news2": {"H1": 0.76, "H2": 0.62, "H3": 0.71, "H4": 0.72, "H5": 0.67, "H6": 0.67},
}


def fmt(x):
    if x is None:
        return ""
    return f"{x:.3f}"


def _num(x):
    return None if x is None else round(float(x), 3)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def summary_rows(report):
    return [[r.algorithm, r.scheme, fmt(r.auc), fmt(r.f1), fmt(r.threshold)]
            for r in report.results]


def long_rows(report):
    rows = []
    for r in report.results:
        for metric in ("auc", "f1", "threshold"):
            rows.append({"algorithm": r.algorithm, "scheme": r.scheme, "metric": metric,
                         "value": _num(getattr(r, metric))})
    for alg, grid in report.windowing.items():
        for label, v in zip(WINDOW_LABELS, grid):
            rows.append({"algorithm": alg, "scheme": WINDOW, "metric": f"auc@{label}",
                         "value": _num(v)})
    return rows


def reference_rows(report):
    rows = []
    algs = sorted({r.algorithm for r in report.results} | set(report.windowing))
    for alg in algs:
        ref = REFERENCE.get(alg)
        if ref is None:
            continue
        for scheme in (CV10, LOGO):
            rows.append({"algorithm": alg, "scheme": scheme, "metric": "auc",
                         "value": ref[scheme][0]})
            rows.append({"algorithm": alg, "scheme": scheme, "metric": "f1",
                         "value": ref[scheme][1]})
        for label, v in zip(WINDOW_LABELS, ref[WINDOW]):
            rows.append({"algorithm": alg, "scheme": WINDOW, "metric": f"auc@{label}",
                         "value": v})
    return rows


def file_digest(*paths):
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    return h.hexdigest()


def emit_report(report, out_dir, manifest=None):
    """Write the report files into ``out_dir``; returns ``{name: path}``.

    summary.csv     algorithm,scheme,auc,f1,threshold (one row per result)
    report.json     long rows (algorithm, scheme, metric, value) plus reference values
    per_hospital.csv  leave-one-hospital-out AUC and F1 per held-out hospital
    windowing.csv   algorithm by t-4..t AUC grid
    folds.csv       every fold of every result
    manifest.json   ``manifest`` plus run metadata
    """
    if not report.results and not report.windowing:
        raise EwsError("empty report: nothing was evaluated")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise EwsError(f"cannot create output directory {out}: {exc.strerror}") from None
    paths = {}

    paths["summary"] = out / "summary.csv"
    _write_csv(paths["summary"], ["algorithm", "scheme", "auc", "f1", "threshold"],
               summary_rows(report))

    hosp = [[r.algorithm, f.group, f.n_test, fmt(f.auc), fmt(f.f1), f.flag]
            for r in report.results if r.scheme == LOGO for f in r.folds]
    paths["per_hospital"] = out / "per_hospital.csv"
    _write_csv(paths["per_hospital"], ["algorithm", "hospital", "n", "auc", "f1", "flag"], hosp)

    paths["windowing"] = out / "windowing.csv"
    _write_csv(paths["windowing"], ["algorithm", *WINDOW_LABELS],
               [[alg, *(fmt(v) for v in grid)] for alg, grid in report.windowing.items()])

    fold_rows = [[r.algorithm, r.scheme, f.fold, f.group or "", f.n_train, f.n_test,
                  fmt(f.auc), fmt(f.f1), fmt(f.threshold),
                  "" if f.n_features is None else f.n_features, f.flag]
                 for r in report.results for f in r.folds]
    paths["folds"] = out / "folds.csv"
    _write_csv(paths["folds"], ["algorithm", "scheme", "fold", "group", "n_train", "n_test",
                                "auc", "f1", "threshold", "n_features", "flag"], fold_rows)

    paths["report"] = out / "report.json"
    body = {"rows": long_rows(report), "reference": reference_rows(report),
            "reference_per_hospital": {k: v for k, v in REFERENCE_PER_HOSPITAL.items()
                                       if any(r.algorithm == k for r in report.results)},
            "meta": report.meta}
    paths["report"].write_text(json.dumps(body, sort_keys=True, indent=1) + "\n",
                               encoding="utf-8")

    paths["manifest"] = out / "manifest.json"
    man = dict(manifest or {})
    man["files"] = {k: file_digest(p) for k, p in sorted(paths.items()) if k != "manifest"}
    paths["manifest"].write_text(json.dumps(man, sort_keys=True, indent=1) + "\n",
                                 encoding="utf-8")
    return paths

import numpy as np
import pytest

from ewsbench.ingest import assemble_encounters, filter_outliers
from ewsbench.metrics import optimal_threshold
from ewsbench.models import ClassifierSpec, fit
from ewsbench.synthetic import generate_cohort
from ewsbench.windowing import assemble_matrix, build_windows

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        details = [v for k, v in item.user_properties if k == "detail"]
        _CRITERIA[number] = (title, rep.outcome, details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome, details = _CRITERIA[number]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
        for d in details:
            terminalreporter.write_line(f"    {d}")


def median_impute(matrix):
    X = matrix.X.copy()
    med = np.nanmedian(X, axis=0)
    rows, cols = np.nonzero(np.isnan(X))
    X[rows, cols] = med[cols]
    out = matrix.subset(np.arange(len(X)))
    out.X = X
    return out


@pytest.fixture(scope="session")
def cohort():
    return generate_cohort(1200, seed=11)


@pytest.fixture(scope="session")
def prepared(cohort):
    return prepare_cohort(cohort)


def prepare_cohort(encounters):
    obs = [o for e in encounters for o in e.observations]
    kept, _ = filter_outliers(obs)
    asm = assemble_encounters(kept, [e.meta for e in encounters])
    raw, encoders = assemble_matrix(build_windows(asm.encounters).windows)
    return median_impute(raw), encoders


@pytest.fixture(scope="session")
def trained():
    # Survivors with chronically abnormal baselines make an isolated extreme
    # reading ambiguous; the alert vignettes need a model that has only seen
    # extreme vitals on deteriorating patients.
    matrix, encoders = prepare_cohort(generate_cohort(1200, seed=11, chronic_rate=0.0,
                                                      episode_rate=0.1))
    spec = ClassifierSpec("gbdt", {"n_trees": 80, "min_samples_leaf": 10}, seed=1)
    model = fit(spec, matrix, seed=1)
    model.threshold = optimal_threshold(model.score_array(matrix.X), matrix.y, 10.0, 1.0).threshold
    model.encoders = encoders.to_dict()
    return model

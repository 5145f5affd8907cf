from pathlib import Path

import pytest

from ewsbench.config import RunConfig, apply_overrides, load_config
from ewsbench.utils import ConfigError

GOOD = """\
[data]
data_dir = data
out = results

[columns]
timestamp = datahora

[measures]
fc = heart_rate

[bounds]
heart_rate = 25, 250

[bench]
models = gbdt, MEWS
schemes = cv10
cost_ratio = 5
seed = 7

[model.gbdt]
n_trees = 120
learning_rate = 0.05
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_defaults():
    cfg = load_config()
    assert cfg.cost_ratio == 10.0 and cfg.timestamps == 5 and cfg.schemes == ("cv10", "logo")
    assert len(cfg.models) == 8


def test_full_file(tmp_path):
    cfg = load_config(write(tmp_path, GOOD))
    assert Path(cfg.data_dir) == tmp_path / "data"
    assert Path(cfg.out) == tmp_path / "results"
    assert cfg.models == ("gbdt", "mews")
    assert cfg.schemes == ("cv10",) and cfg.cost_ratio == 5.0 and cfg.seed == 7
    assert cfg.model_params == {"gbdt": {"n_trees": 120, "learning_rate": 0.05}}
    assert cfg.mapping().timestamp == "datahora"
    assert cfg.mapping().measure_aliases == {"fc": "heart_rate"}
    assert cfg.bounds["heart_rate"] == (25.0, 250.0)
    scorers = cfg.scorers()
    assert scorers[0].params["n_trees"] == 120 and scorers[0].seed == 7
    assert scorers[1].algorithm == "mews"


@pytest.mark.parametrize("text,line,fragment", [
    ("[bench]\nseed = 1\ncost_ratio = ten\n", 3, "not a number"),
    ("[bench]\nmodels = gbdt\n\n[window]\nwidth = 3\n", 5, "unknown key"),
    ("[data]\nout = x\n[stuff]\na = 1\n", 3, "unknown section"),
    ("[measures]\nfc = pulse\n", 2, "not a vital kind"),
    ("[bounds]\nheart_rate = 20\n", 2, "'low, high' pair"),
    ("[columns]\n\nstamp = x\n", 3, "unknown column role"),
    ("[model.svm]\nc = 1\n", 1, "unknown algorithm"),
])
def test_errors_name_the_line(tmp_path, text, line, fragment):
    p = write(tmp_path, text)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert f"{p}:{line}" in str(exc.value)
    assert fragment in str(exc.value)


@pytest.mark.parametrize("text", [
    "[bench]\nmodels = gbdt, svm\n",
    "[bench]\nschemes = bootstrap\n",
    "[bench]\ncost_ratio = 0\n",
    "[bench]\ntimestamps = 6\n",
    "[window]\ngap_hours = 6\n",
    "[bounds]\nheart_rate = 300, 20\n",
    "[model.gbdt]\nn_estimators = 10\n",
])
def test_semantic_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_overrides_win():
    cfg = apply_overrides(RunConfig(), models="gbdt_goss,news2", cost_ratio=3.0, seed=None)
    assert cfg.models == ("gbdt_goss", "news2") and cfg.cost_ratio == 3.0 and cfg.seed == 0
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), schemes="cv10,nope")


def test_digest_tracks_settings_not_output_dir():
    a = RunConfig()
    assert a.digest() == RunConfig(out="elsewhere").digest()
    assert a.digest() != RunConfig(seed=1).digest()
    assert a.prepare_digest() == RunConfig(cost_ratio=3.0).prepare_digest()
    assert a.prepare_digest() != RunConfig(impute_trees=10).prepare_digest()

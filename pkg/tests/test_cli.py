import csv
import json
from collections import defaultdict

import pytest

from ewsbench import cli
from ewsbench.ews import TABLES
from ewsbench.ingest import DEFAULT_BOUNDS, parse_timestamp, write_longitudinal_csv
from ewsbench.synthetic import generate_cohort

CONFIG = """\
[data]
data_dir = data
out = out

[impute]
trees = 5
max_iter = 2

[bench]
models = naive_bayes, mews, news2
schemes = cv10
folds = 3

[model.gbdt_goss]
n_trees = 10

[model.gbdt]
n_trees = 10
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    data.mkdir()
    encs = generate_cohort(300, seed=5)
    write_longitudinal_csv(encs, data / "measurements.csv", data / "encounters.csv")
    (root / "run.ini").write_text(CONFIG, encoding="utf-8")
    return root


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_prepare_counts_match_hand_pass(workspace, capsys):
    cfg = workspace / "run.ini"
    assert run("prepare", "--config", cfg, "--out", workspace / "p1", "--no-cache") == 0
    printed = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines()
                   if ": " in line)
    stats = json.loads((workspace / "p1" / "prepare.json").read_text())

    # independent pass over the raw files
    bounds = {k.value: v for k, v in DEFAULT_BOUNDS.items()}
    spans = {}
    with open(workspace / "data" / "encounters.csv") as fh:
        for r in csv.DictReader(fh):
            spans[r["encounter_id"]] = (parse_timestamp(r["admission_time"]),
                                        parse_timestamp(r["outcome_time"]))
    outliers = 0
    times = defaultdict(set)
    with open(workspace / "data" / "measurements.csv") as fh:
        for r in csv.DictReader(fh):
            lo, hi = bounds[r["measure"]]
            if not lo <= float(r["value"]) <= hi:
                outliers += 1
                continue
            ts = parse_timestamp(r["timestamp"])
            adm, out = spans[r["encounter_id"]]
            if adm <= ts <= out:
                times[r["encounter_id"]].add(ts)
    single = sum(1 for eid in spans if len(times[eid]) < 2)
    assert stats["outlier_dropped"] == outliers == int(printed["outlier_dropped"])
    assert stats["single_collection_excluded"] == single
    assert stats["rows"] + stats["gap_dropped"] + single == len(spans)
    for key in ("gap_dropped", "forward_filled", "missforest_imputed"):
        assert int(printed[key]) == stats[key]


def test_prepare_cache_is_byte_identical(workspace):
    cfg = workspace / "run.ini"
    assert run("prepare", "--config", cfg, "--out", workspace / "c1") == 0
    assert run("prepare", "--config", cfg, "--out", workspace / "c2", "--no-cache") == 0
    a = sorted((workspace / "c1" / "cache").rglob("matrix.csv"))
    b = sorted((workspace / "c2" / "cache").rglob("matrix.csv"))
    assert len(a) == len(b) == 1
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[0].relative_to(workspace / "c1") == b[0].relative_to(workspace / "c2")


def test_bench_three_row_summary_and_determinism(workspace, capsys):
    cfg = workspace / "run.ini"
    outs = []
    for name in ("b1", "b2"):
        out = workspace / name
        assert run("bench", "--config", cfg, "--out", out, "--models",
                   "gbdt_goss,mews,news2", "--schemes", "cv10") == 0
        outs.append(out)
    rows = list(csv.reader(open(outs[0] / "summary.csv")))
    assert [r[0] for r in rows[1:]] == ["gbdt_goss", "mews", "news2"]
    for name in ("summary.csv", "per_hospital.csv", "windowing.csv", "folds.csv",
                 "report.json", "manifest.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert "gbdt_goss,cv10" in capsys.readouterr().out


def test_seed_recorded_in_manifest(workspace):
    cfg = workspace / "run.ini"
    seeds = {}
    for seed in (1, 2):
        out = workspace / f"s{seed}"
        assert run("bench", "--config", cfg, "--out", out, "--seed", seed) == 0
        seeds[seed] = json.loads((out / "manifest.json").read_text())
    assert seeds[1]["seed"] == 1 and seeds[2]["seed"] == 2
    assert seeds[1]["config_sha256"] != seeds[2]["config_sha256"]
    assert seeds[1]["dataset_sha256"] == seeds[2]["dataset_sha256"]


def test_window_grid_layout(workspace):
    out = workspace / "w"
    assert run("bench", "--config", workspace / "run.ini", "--out", out, "--schemes",
               "window", "--models", "naive_bayes,mews") == 0
    rows = list(csv.reader(open(out / "windowing.csv")))
    assert rows[0] == ["algorithm", "t-4", "t-3", "t-2", "t-1", "t"]
    assert [r[0] for r in rows[1:]] == ["naive_bayes", "mews"]


def test_timestamps_flag_truncates(workspace):
    out = workspace / "k1"
    assert run("bench", "--config", workspace / "run.ini", "--out", out, "--timestamps", 1,
               "--models", "naive_bayes") == 0
    folds = list(csv.DictReader(open(out / "folds.csv")))
    assert folds and all(f["n_features"] == "12" for f in folds)


def test_dump_tables(tmp_path, capsys):
    assert run("dump-tables") == 0
    first = capsys.readouterr().out
    assert run("dump-tables") == 0
    assert capsys.readouterr().out == first
    assert "≤70 → 3" in first
    assert run("dump-tables", "--out", tmp_path / "t.csv") == 0
    assert (tmp_path / "t.csv").read_text() == first
    n_bands = sum(len(b) for t in TABLES.values() for b in t.values())
    assert len(first.splitlines()) - 1 >= n_bands


def test_train_and_explain(workspace, capsys):
    cfg = workspace / "run.ini"
    model = workspace / "m.json"
    assert run("train", "--config", cfg, "--out", workspace / "t", "--models", "gbdt",
               "--model", model) == 0
    capsys.readouterr()
    assert run("explain", "--config", cfg, "--out", workspace / "t", "--model", model) == 0
    body = json.loads(capsys.readouterr().out)
    assert set(body) == {"encounter_id", "score", "contributors"}
    assert len(body["contributors"]) <= 3
    assert run("explain", "--config", cfg, "--out", workspace / "t", "--model", model,
               "--encounter", "nope") == 2
    assert run("train", "--config", cfg, "--models", "mews") == 1


def test_exit_codes(workspace, tmp_path, capsys):
    # 1: configuration problems, including argument errors
    bad = tmp_path / "bad.ini"
    bad.write_text("[bench]\ncost_ratio = high\n")
    assert run("bench", "--config", bad) == 1
    assert f"{bad}:2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        run("bench", "--seed", "abc")
    assert exc.value.code == 1
    assert run("bench", "--config", workspace / "run.ini", "--models", "svm") == 1
    # 2: data problems
    empty = tmp_path / "empty"
    empty.mkdir()
    (empty / "measurements.csv").write_text("encounter_id,timestamp,measure,value\n")
    (empty / "encounters.csv").write_text((workspace / "data" / "encounters.csv").read_text())
    assert run("prepare", "--data-dir", empty, "--out", tmp_path / "o") == 2
    assert "no observations" in capsys.readouterr().err
    assert run("prepare", "--data-dir", tmp_path / "missing", "--out", tmp_path / "o") == 2
    # 3: internal errors
    blocker = tmp_path / "blocker"
    blocker.write_text("a file where a directory is expected")
    assert run("bench", "--config", workspace / "run.ini", "--out", blocker / "sub") == 3


def test_synth_command(tmp_path, capsys):
    assert run("synth", "--data-dir", tmp_path, "-n", 20, "--seed", 3) == 0
    assert (tmp_path / "measurements.csv").exists() and (tmp_path / "encounters.csv").exists()
    assert "20 encounters" in capsys.readouterr().out

"""``ews-bench``: prepare, benchmark, train, explain and dump protocol tables.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 internal error.
"""
import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import ews
from .config import PROTOCOL_NAMES, apply_overrides, load_config
from .explain import explain_alert
from .ingest import write_longitudinal_csv
from .metrics import optimal_threshold
from .models.spec import fit, load_model, save_model
from .pipeline import bench, prepare
from .synthetic import generate_cohort
from .utils import ConfigError, DataError, EwsError
from .windowing import truncate_timestamps

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


def _config(args):
    cfg = load_config(args.config)
    return apply_overrides(
        cfg, data_dir=args.data_dir, out=args.out, seed=args.seed, models=args.models,
        schemes=args.schemes, cost_ratio=args.cost_ratio, timestamps=args.timestamps,
    )


def cmd_prepare(args):
    cfg = _config(args)
    prep = prepare(cfg, use_cache=not args.no_cache)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = {k: v for k, v in prep.stats.items() if k != "encoders"}
    (out / "prepare.json").write_text(json.dumps(stats, sort_keys=True, indent=1) + "\n",
                                      encoding="utf-8")
    for key in ("outlier_dropped", "single_collection_excluded", "gap_dropped",
                "forward_filled", "missforest_imputed", "rows", "positives"):
        print(f"{key}: {stats[key]}")
    if prep.cached:
        print("(matrix read from cache)")
    return EXIT_OK


def cmd_bench(args):
    cfg = _config(args)
    report, paths = bench(cfg)
    with open(paths["summary"], encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    if report.windowing:
        with open(paths["windowing"], encoding="utf-8") as fh:
            sys.stdout.write(fh.read())
    return EXIT_OK


def cmd_dump_tables(args):
    text = ews.dump_tables()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args):
    cfg = _config(args)
    algs = [m for m in cfg.models if m not in PROTOCOL_NAMES]
    if len(algs) != 1:
        raise ConfigError("train needs exactly one ML algorithm in --models")
    alg = algs[0]
    prep = prepare(cfg)
    matrix = truncate_timestamps(prep.matrix, cfg.timestamps)
    spec = [s for s in cfg.scorers() if s.algorithm == alg][0]
    model = fit(spec, matrix, seed=spec.seed)
    model.threshold = optimal_threshold(model.score_array(matrix.X), matrix.y,
                                        cfg.cost_ratio, 1.0).threshold
    model.encoders = prep.encoders.to_dict()
    path = Path(args.model) if args.model else Path(cfg.out) / f"model-{alg}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, path)
    print(path)
    return EXIT_OK


def cmd_explain(args):
    if not args.model:
        raise ConfigError("explain needs --model PATH")
    cfg = _config(args)
    model = load_model(args.model)
    matrix = prepare(cfg).matrix
    k = sum(1 for c in model.columns if c.slot is not None) // len(ews.VitalKind)
    matrix = truncate_timestamps(matrix, k)
    model.check_columns(matrix)
    ids = list(matrix.encounter_ids)
    if args.encounter is not None:
        if args.encounter not in ids:
            raise DataError(f"encounter {args.encounter!r} has no prepared window")
        row = ids.index(args.encounter)
    else:
        scores = model.score_array(matrix.X)
        row = int(np.argmax(scores))
    expl = explain_alert(model, matrix.X[row], ids[row], top_k=args.top)
    print(expl.to_json())
    return EXIT_OK


def cmd_synth(args):
    out = Path(args.data_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    encs = generate_cohort(args.n, seed=args.seed or 0)
    write_longitudinal_csv(encs, out / "measurements.csv", out / "encounters.csv")
    print(f"{len(encs)} encounters, {sum(e.died for e in encs)} deaths -> {out}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors, not argparse's default exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="ews-bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--data-dir", help="directory holding the two input tables")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--models", help="comma-separated scorers, e.g. gbdt_goss,mews,news2")
        p.add_argument("--schemes", help="comma-separated subset of cv10,logo,window")
        p.add_argument("--cost-ratio", type=float,
                       help="false-negative to false-positive cost (default 10)")
        p.add_argument("--timestamps", type=int, help="timestamps of history the models see (1-5)")

    p = sub.add_parser("prepare", help="build and cache the imputed feature matrix")
    common(p)
    p.add_argument("--no-cache", action="store_true", help="recompute even if cached")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("bench", help="run the validation schemes and write reports")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-tables", help="print the MEWS and NEWS2 band tables as CSV")
    p.add_argument("--out", help="write to this file instead of standard output")
    p.set_defaults(func=cmd_dump_tables)

    p = sub.add_parser("train", help="fit one algorithm on the full cohort and save it")
    common(p)
    p.add_argument("--model", help="output model path (default <out>/model-<alg>.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="explain one prepared window as JSON")
    common(p)
    p.add_argument("--model", help="model file written by train")
    p.add_argument("--encounter", help="encounter id (default: highest-scoring window)")
    p.add_argument("--top", type=int, default=3, help="contributors to report")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("synth", help="write a synthetic cohort in the input format")
    p.add_argument("--data-dir", help="directory to write into")
    p.add_argument("--seed", type=int)
    p.add_argument("-n", type=int, default=4000, help="number of encounters")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ews.ScoringError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EwsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

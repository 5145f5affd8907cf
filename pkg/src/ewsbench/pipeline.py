"""Prepare and benchmark steps shared by the command line and the tests."""
import json
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

import numpy as np

from .impute import missforest_impute
from .ingest import (
    assemble_encounters,
    filter_outliers,
    parse_longitudinal_csv,
    summarize_cohort,
)
from .report import emit_report, file_digest
from .utils import DataError
from .validation import WINDOW, run_benchmark
from .windowing import N_SLOTS, Encoders, FeatureMatrix, assemble_matrix, build_windows, \
    truncate_timestamps


@dataclass
class Prepared:
    matrix: FeatureMatrix  # imputed, all five timestamps
    encoders: Encoders
    stats: dict = field(default_factory=dict)
    cached: bool = False


def dataset_digest(cfg):
    return file_digest(cfg.measurements_path, cfg.encounters_path)


def _cache_paths(cfg, data_hash):
    key = f"{cfg.prepare_digest()[:16]}-{data_hash[:16]}"
    base = Path(cfg.out) / "cache" / key
    return base / "matrix.csv", base / "prepare.json"


def prepare(cfg, use_cache=True):
    """Ingest, filter, assemble, window and impute; cached under ``<out>/cache``.

    The cache key covers the preprocessing settings, the seed and the input
    file contents, so a rerun with the same inputs reads the same bytes.
    """
    for p in (cfg.measurements_path, cfg.encounters_path):
        if not Path(p).is_file():
            raise DataError(f"input file not found: {p}")
    data_hash = dataset_digest(cfg)
    matrix_path, stats_path = _cache_paths(cfg, data_hash)
    if use_cache and matrix_path.exists() and stats_path.exists():
        stats = json.loads(stats_path.read_text(encoding="utf-8"))
        return Prepared(FeatureMatrix.from_csv(matrix_path),
                        Encoders.from_dict(stats["encoders"]), stats, cached=True)

    ingest = parse_longitudinal_csv(cfg.measurements_path, cfg.encounters_path, cfg.mapping())
    if not ingest.observations:
        raise DataError("no observations")
    if not ingest.encounters:
        raise DataError("no encounters")
    kept, outliers = filter_outliers(ingest.observations, cfg.vital_bounds())
    asm = assemble_encounters(kept, ingest.encounters)
    ws = build_windows(asm.encounters, timedelta(hours=cfg.window_hours),
                       timedelta(hours=cfg.gap_hours), timedelta(hours=cfg.step_hours),
                       cfg.max_fill)
    if not ws.windows:
        raise DataError("no encounter produced a feature window")
    raw, encoders = assemble_matrix(ws.windows)
    if len(np.unique(raw.y)) < 2:
        raise DataError("prepared cohort has a single outcome class")
    matrix, imp = missforest_impute(raw, trees=cfg.impute_trees, max_iter=cfg.impute_max_iter,
                                    seed=cfg.seed)
    reasons = {}
    for r in ws.dropped.values():
        reasons[r] = reasons.get(r, 0) + 1
    stats = {
        "rows_rejected": len(ingest.rejected),
        "rejected_reasons": _count(r.reason for r in ingest.rejected),
        "observations_read": len(ingest.observations),
        "outlier_dropped": sum(outliers.values()),
        "outlier_dropped_by_kind": {k.value: v for k, v in sorted(outliers.items())},
        "orphan_observations": len(asm.orphans),
        "out_of_span_observations": asm.out_of_span,
        "single_collection_excluded": len(asm.excluded),
        "gap_dropped": len(ws.dropped),
        "gap_dropped_reasons": dict(sorted(reasons.items())),
        "forward_filled": ws.forward_filled,
        "missforest_imputed": imp.cells_missing,
        "missforest_iterations": imp.iterations,
        "fully_missing_columns": imp.fully_missing,
        "rows": int(len(matrix.y)),
        "positives": int(matrix.y.sum()),
        "dataset_sha256": data_hash,
        "encoders": encoders.to_dict(),
    }
    matrix_path.parent.mkdir(parents=True, exist_ok=True)
    matrix.to_csv(matrix_path)
    stats_path.write_text(json.dumps(stats, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    summary = summarize_cohort(asm.encounters)
    summary.to_csv(matrix_path.parent / "cohort.csv")
    return Prepared(matrix, encoders, stats)


def _count(items):
    out = {}
    for it in items:
        out[it] = out.get(it, 0) + 1
    return dict(sorted(out.items()))


def bench(cfg, prepared=None):
    """Run every configured (scorer, scheme) pair and write the report files."""
    prepared = prepared or prepare(cfg)
    matrix = prepared.matrix
    if cfg.timestamps < N_SLOTS and set(cfg.schemes) - {WINDOW}:
        main = truncate_timestamps(matrix, cfg.timestamps)
    else:
        main = matrix
    scorers = cfg.scorers()
    if main is matrix:
        report = run_benchmark(scorers, matrix, cfg.schemes, cfg.folds, cfg.seed,
                               cfg.cost_ratio, 1.0, cfg.n_jobs)
    else:
        schemes = [s for s in cfg.schemes if s != WINDOW]
        report = run_benchmark(scorers, main, schemes, cfg.folds, cfg.seed, cfg.cost_ratio,
                               1.0, cfg.n_jobs)
        if WINDOW in cfg.schemes:
            # the grid always spans all five timestamps
            full = run_benchmark(scorers, matrix, (WINDOW,), cfg.folds, cfg.seed,
                                 cfg.cost_ratio, 1.0, cfg.n_jobs)
            report.results.extend(full.results)
            report.windowing = full.windowing
    report.meta["timestamps"] = cfg.timestamps
    manifest = {
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": json.loads(cfg.canonical()),
        "dataset_sha256": prepared.stats.get("dataset_sha256"),
    }
    paths = emit_report(report, cfg.out, manifest)
    return report, paths

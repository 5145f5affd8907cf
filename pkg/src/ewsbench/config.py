"""INI run configuration with line-precise validation and a canonical hash.

Example::

    [data]
    data_dir = data
    measurements = measurements.csv
    encounters = encounters.csv
    out = out

    [columns]
    timestamp = datahora
    timezone = America/Sao_Paulo

    [measures]
    fc = heart_rate

    [bounds]
    heart_rate = 20, 300

    [window]
    window_hours = 36
    gap_hours = 12
    step_hours = 6

    [impute]
    trees = 50
    max_iter = 10

    [bench]
    models = gbdt_goss, gbdt, mews, news2
    schemes = cv10, logo
    cost_ratio = 10
    seed = 0

    [model.gbdt]
    n_trees = 300
"""
import ast
import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .ingest import DEFAULT_BOUNDS, ColumnMapping, VitalKind
from .models.spec import ALGORITHMS, ClassifierSpec
from .utils import ConfigError
from .validation import SCHEMES, parse_scorer
from .windowing import N_SLOTS

DEFAULT_MODELS = ("naive_bayes", "logistic_regression", "decision_tree", "random_forest",
                  "gbdt", "gbdt_goss", "mews", "news2")
PROTOCOL_NAMES = ("mews", "news2")
_SECTIONS = {"data", "columns", "measures", "bounds", "window", "impute", "bench"}
_MAPPING_KEYS = {f.name for f in fields(ColumnMapping)} - {"measure_aliases", "sex_aliases"}


@dataclass
class RunConfig:
    data_dir: str = "."
    measurements: str = "measurements.csv"
    encounters: str = "encounters.csv"
    out: str = "out"
    columns: dict = field(default_factory=dict)
    measure_aliases: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=lambda: {k.value: v for k, v in DEFAULT_BOUNDS.items()})
    window_hours: float = 36.0
    gap_hours: float = 12.0
    step_hours: float = 6.0
    max_fill: int = 2
    impute_trees: int = 50
    impute_max_iter: int = 10
    models: tuple = DEFAULT_MODELS
    schemes: tuple = ("cv10", "logo")
    cost_ratio: float = 10.0
    seed: int = 0
    folds: int = 10
    timestamps: int = N_SLOTS
    n_jobs: int = 1
    model_params: dict = field(default_factory=dict)

    @property
    def measurements_path(self):
        return Path(self.data_dir) / self.measurements

    @property
    def encounters_path(self):
        return Path(self.data_dir) / self.encounters

    def mapping(self):
        return ColumnMapping(**self.columns, measure_aliases=dict(self.measure_aliases))

    def vital_bounds(self):
        return {VitalKind(k): tuple(v) for k, v in self.bounds.items()}

    def scorers(self):
        return [parse_scorer(m, self.model_params.get(m), self.seed) for m in self.models]

    def canonical(self, exclude=("out",)):
        d = asdict(self)
        for k in exclude:
            d.pop(k, None)
        return json.dumps(d, sort_keys=True, default=list, separators=(",", ":"))

    def digest(self, exclude=("out",)):
        return hashlib.sha256(self.canonical(exclude).encode()).hexdigest()

    def prepare_digest(self):
        """Hash of the settings that determine the prepared matrix."""
        keys = ("columns", "measure_aliases", "bounds", "window_hours", "gap_hours",
                "step_hours", "max_fill", "impute_trees", "impute_max_iter", "seed")
        d = asdict(self)
        sub = {k: d[k] for k in keys}
        return hashlib.sha256(json.dumps(sub, sort_keys=True).encode()).hexdigest()


def _line_index(text):
    """(section, key) -> 1-based line number, for error messages."""
    index = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index[(section, None)] = no
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    index[(section, line.split(sep, 1)[0].strip().lower())] = no
                    break
    return index


def _split_list(text):
    return tuple(x.strip().lower() for x in text.replace(";", ",").split(",") if x.strip())


def _literal(text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def validate(cfg):
    """Raise :class:`ConfigError` on any inconsistency; returns ``cfg``."""
    for m in cfg.models:
        if m not in ALGORITHMS and m not in PROTOCOL_NAMES:
            raise ConfigError(f"unknown model {m!r}")
    if not cfg.models:
        raise ConfigError("no models selected")
    for s in cfg.schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
    if not cfg.cost_ratio > 0:
        raise ConfigError("cost_ratio must be positive")
    if cfg.folds < 2:
        raise ConfigError("folds must be >= 2")
    if not 1 <= cfg.timestamps <= N_SLOTS:
        raise ConfigError(f"timestamps must be in 1..{N_SLOTS}")
    if cfg.window_hours != cfg.gap_hours + (N_SLOTS - 1) * cfg.step_hours:
        raise ConfigError(f"window_hours must equal gap_hours + {N_SLOTS - 1} * step_hours")
    if cfg.step_hours <= 0 or cfg.gap_hours < 0:
        raise ConfigError("step_hours must be positive and gap_hours non-negative")
    if cfg.impute_trees < 1 or cfg.impute_max_iter < 1:
        raise ConfigError("impute trees and max_iter must be >= 1")
    for k, (lo, hi) in cfg.bounds.items():
        if not lo < hi:
            raise ConfigError(f"bounds for {k}: lower must be below upper")
    unknown = set(cfg.columns) - _MAPPING_KEYS
    if unknown:
        raise ConfigError(f"unknown column role(s): {', '.join(sorted(unknown))}")
    for alg, params in cfg.model_params.items():
        if alg in PROTOCOL_NAMES:
            raise ConfigError(f"[model.{alg}]: protocols take no parameters")
        try:
            ClassifierSpec(alg, dict(params), cfg.seed)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"[model.{alg}]: {exc}") from None
    return cfg


def load_config(path=None):
    """Parse an INI file into a validated :class:`RunConfig` (defaults when ``path`` is None)."""
    cfg = RunConfig()
    if path is None:
        return validate(cfg)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    lines = _line_index(text)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    def where(section, key=None):
        no = lines.get((section, key)) or lines.get((section, None))
        return f"{path}:{no}" if no else str(path)

    def conv(section, key, fn, what):
        raw = parser.get(section, key)
        try:
            return fn(raw)
        except (ValueError, TypeError):
            raise ConfigError(f"{where(section, key)}: {key} = {raw!r} is not {what}") from None

    updates = {}
    model_params = {}
    for section in parser.sections():
        if section.startswith("model."):
            alg = section[len("model."):].strip().lower()
            if alg not in ALGORITHMS:
                raise ConfigError(f"{where(section)}: unknown algorithm {alg!r}")
            model_params[alg] = {k: _literal(v) for k, v in parser.items(section)}
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"{where(section)}: unknown section [{section}]")

    known = {
        "data": {"data_dir": str, "measurements": str, "encounters": str, "out": str},
        "window": {"window_hours": float, "gap_hours": float, "step_hours": float,
                   "max_fill": int},
        "impute": {"trees": int, "max_iter": int},
        "bench": {"models": _split_list, "schemes": _split_list, "cost_ratio": float,
                  "seed": int, "folds": int, "timestamps": int, "n_jobs": int},
    }
    rename = {("impute", "trees"): "impute_trees", ("impute", "max_iter"): "impute_max_iter"}
    for section, spec in known.items():
        if not parser.has_section(section):
            continue
        for key in parser.options(section):
            if key not in spec:
                raise ConfigError(f"{where(section, key)}: unknown key {key!r} in [{section}]")
            fn = spec[key]
            what = {str: "text", float: "a number", int: "an integer"}.get(fn, "a list")
            updates[rename.get((section, key), key)] = conv(section, key, fn, what)

    if parser.has_section("columns"):
        cols = {}
        for key in parser.options("columns"):
            if key not in _MAPPING_KEYS:
                raise ConfigError(f"{where('columns', key)}: unknown column role {key!r}")
            cols[key] = parser.get("columns", key).strip()
        updates["columns"] = cols
    if parser.has_section("measures"):
        aliases = {}
        for key in parser.options("measures"):
            target = parser.get("measures", key).strip().lower()
            try:
                VitalKind(target)
            except ValueError:
                raise ConfigError(f"{where('measures', key)}: {target!r} is not a vital kind") from None
            aliases[key] = target
        updates["measure_aliases"] = aliases
    if parser.has_section("bounds"):
        bounds = dict(cfg.bounds)
        for key in parser.options("bounds"):
            try:
                VitalKind(key)
            except ValueError:
                raise ConfigError(f"{where('bounds', key)}: {key!r} is not a vital kind") from None

            def pair(raw):
                lo, hi = (float(x) for x in raw.split(","))
                return (lo, hi)
            bounds[key] = conv("bounds", key, pair, "a 'low, high' pair")
        updates["bounds"] = bounds
    updates["model_params"] = model_params

    cfg = replace(cfg, **updates)
    base = path.parent
    if not Path(cfg.data_dir).is_absolute():
        cfg.data_dir = str(base / cfg.data_dir)
    if not Path(cfg.out).is_absolute() and parser.has_option("data", "out"):
        cfg.out = str(base / cfg.out)
    try:
        return validate(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def apply_overrides(cfg, **flags):
    """Command-line flags win over file values; ``None`` means not given."""
    updates = {k: v for k, v in flags.items() if v is not None}
    for k in ("models", "schemes"):
        if k in updates and isinstance(updates[k], str):
            updates[k] = _split_list(updates[k])
    return validate(replace(cfg, **updates))

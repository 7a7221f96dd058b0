"""Monte Carlo benchmark harness.

A run generates ``replications`` independent panels (or train/test splits
of one real panel), fits every configured method and records the relative
error of each.  Results are written as JSON and can be summarised into
"mean (std)" tables or flattened into long-format CSV for plotting.

Seeds
-----
Replication ``k`` of a run with master seed ``s`` uses
``replication_seed(s, k)``: the first 8 bytes (big-endian) of
``sha256(f"{s}:{k}")`` shifted right by one bit.  The derivation depends on
nothing but ``(s, k)``.

Config files
------------
One ``key = value`` per line; ``#`` starts a comment.  Keys are the field
names of :class:`ExperimentConfig`.  List values are comma separated.
Unknown keys are errors.
"""
from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import math
import os
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .errors import AggregationError, ConfigError
from .estimator import TrainConfig, fit, predict_truncated, residual_sigma, size_architecture
from .metrics import harmonic_mean, relative_error
from .ozone import load_ozone, train_test_split
from .panel import load_panel
from .synth import NoiseScales, generate_panel, noise_levels

log = logging.getLogger(__name__)

METHODS = ("dense-nn", "knn", "krr")
RESULT_FORMAT = "stdense.result/1"
OUTPUT_ENV = "STDENSE_OUTPUT_DIR"


@dataclass
class ExperimentConfig:
    # data
    scenario: int | None = 2
    data_path: str | None = None
    data_format: str = "panel"  # panel | ozone
    include_state: bool = True
    test_fraction: float = 0.25
    d: int = 2
    n: int = 500
    m_mult: int = 1
    noise_spatial: float = 1.0
    noise_measurement: float = 1.0
    phi: float = 0.1
    d_star: int | None = None
    sqrt_scope: str = "first"
    # methods
    methods: list = field(default_factory=lambda: ["dense-nn", "knn"])
    case: str = "wide"
    p: float = 2.0
    K: int | None = None  # defaults to d, or d_star for manifold designs
    c_L: float = 1.0
    c_r: float = 1.0
    c_A: float = 1.0
    epochs: int = 150
    batch_size: int = 128
    lr: float = 0.01
    lr_decay: float = 0.2
    decay_every: int = 50
    momentum: float = 0.9
    patience: int = 0
    knn_grid: list = field(default_factory=lambda: list(baselines.KNN_GRID))
    krr_max_points: int = 2000
    cv_folds: int = 5
    # run
    replications: int = 20
    seed: int = 0
    output_dir: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if self.data_path is None and self.scenario is None:
            raise ConfigError("either scenario or data_path must be set")
        if self.data_format not in ("panel", "ozone"):
            raise ConfigError("data_format must be 'panel' or 'ozone'")
        if not self.output_dir:
            self.output_dir = os.environ.get(OUTPUT_ENV, "results")

    @property
    def order_K(self):
        if self.K is not None:
            return self.K
        return self.d_star if self.d_star is not None else self.d

    def train_config(self, seed):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, lr=self.lr, lr_decay=self.lr_decay,
            decay_every=self.decay_every, momentum=self.momentum, patience=self.patience, seed=seed,
        )

    def to_dict(self):
        return dataclasses.asdict(self)

    def config_hash(self):
        """Hash of every field that can change the numbers."""
        data = {k: v for k, v in self.to_dict().items() if k not in ("output_dir", "workers")}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def _convert(name, raw, tp):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    if raw.lower() in ("none", "null", "") and type(None) in typing.get_args(tp):
        return None
    if args and origin is not list:
        tp = args[0]
    try:
        if tp is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        if tp is list or origin is list:
            items = [v.strip() for v in raw.split(",") if v.strip()]
            return [int(v) for v in items] if name == "knn_grid" else items
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_lines(lines, base=None):
    """Apply ``key = value`` lines on top of ``base`` (a dict of fields)."""
    hints = typing.get_type_hints(ExperimentConfig)
    values = dict(base or {})
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in hints:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw, hints[key])
    return values


def load_config(path, overrides=()):
    values = parse_config_lines(Path(path).read_text().splitlines())
    values = parse_config_lines(overrides, values)
    return ExperimentConfig(**values)


def replication_seed(master_seed, k):
    digest = hashlib.sha256(f"{int(master_seed)}:{int(k)}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _real_panel(cfg):
    path = Path(cfg.data_path)
    if not path.exists():
        raise ConfigError(f"data_path {path} does not exist")
    if cfg.data_format == "ozone":
        return load_ozone(path, cfg.include_state)[0]
    return load_panel(path)


def _fit_dense(cfg, train, seed, sigmas=None):
    hm = harmonic_mean(train.group_sizes)
    if sigmas is None:
        # pilot pass: the truncation level only enters after training, so the
        # residual scale of the fitted net serves as the noise estimate
        arch = size_architecture(train.n, hm, cfg.p, cfg.order_K, cfg.case, cfg.c_L, cfg.c_r, cfg.c_A, 1.0, 0.0)
        net, trace = fit(train, arch, cfg.train_config(seed))
        sigma = residual_sigma(net, train)
        arch = size_architecture(train.n, hm, cfg.p, cfg.order_K, cfg.case, cfg.c_L, cfg.c_r, cfg.c_A, sigma, 0.0)
    else:
        arch = size_architecture(train.n, hm, cfg.p, cfg.order_K, cfg.case, cfg.c_L, cfg.c_r, cfg.c_A, *sigmas)
        net, trace = fit(train, arch, cfg.train_config(seed))
    return net, arch, trace


def run_replication(cfg, k):
    """Run replication ``k``; returns a JSON-ready record."""
    seed = replication_seed(cfg.seed, k)
    rec = {"index": k, "seed": seed, "status": "ok", "errors": {}, "details": {}}
    try:
        if cfg.data_path is None:
            panel = generate_panel(
                cfg.scenario, cfg.d, cfg.n, cfg.m_mult,
                NoiseScales(cfg.noise_spatial, cfg.noise_measurement),
                seed=seed, phi=cfg.phi, d_star=cfg.d_star, sqrt_scope=cfg.sqrt_scope,
            )
            train, query, reference, ref_sizes = panel, panel.x, panel.f_true, panel.group_sizes
            sigmas = noise_levels(NoiseScales(cfg.noise_spatial, cfg.noise_measurement), cfg.d)
        else:
            train, test = train_test_split(_real_panel(cfg), 1.0 - cfg.test_fraction, seed)
            query, reference, ref_sizes = test.x, test.y, test.group_sizes
            sigmas = None
        for method in cfg.methods:
            if method == "dense-nn":
                net, arch, trace = _fit_dense(cfg, train, seed, sigmas)
                pred = predict_truncated(net, arch.A, query)
                rec["details"][method] = {
                    "arch": arch.to_dict(),
                    "final_objective": trace.rows[-1].objective,
                    "epochs_run": len(trace.rows) - 1,
                }
            elif method == "knn":
                k_best = baselines.cv_knn(train, cfg.knn_grid, cfg.cv_folds, seed)
                pred = baselines.knn_fit_predict(train, min(k_best, train.size), query)
                rec["details"][method] = {"k": k_best}
            else:
                h, alpha = baselines.cv_krr(train, folds=cfg.cv_folds, seed=seed, max_points=cfg.krr_max_points)
                model = baselines.krr_fit(train, h, alpha, max_points=cfg.krr_max_points, seed=seed)
                pred = model.predict(query)
                rec["details"][method] = {"bandwidth": h, "alpha": alpha}
            rec["errors"][method] = relative_error(pred, reference, ref_sizes)
    except Exception as exc:  # recorded and skipped; the run continues
        log.warning("replication %d (seed %d) failed: %s", k, seed, exc)
        rec["status"] = "failed"
        rec["message"] = f"{type(exc).__name__}: {exc}"
    return rec


def method_stats(values):
    """``(mean, sample std)``; the std of a single value is reported as 0."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        return math.nan, math.nan
    std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return float(v.mean()), std


@dataclass
class ExperimentResult:
    config: dict
    config_hash: str
    replications: list
    timestamps: dict = field(default_factory=dict)

    @property
    def methods(self):
        return list(self.config["methods"])

    def values(self, method):
        return [r["errors"][method] for r in self.replications if r["status"] == "ok" and method in r["errors"]]

    @property
    def summary(self):
        out = {}
        for m in self.methods:
            mean, std = method_stats(self.values(m))
            out[m] = {"mean": mean, "std": std, "count": len(self.values(m))}
        return out

    @property
    def completed(self):
        return sum(r["status"] == "ok" for r in self.replications)

    @property
    def failed(self):
        return len(self.replications) - self.completed

    @property
    def partial(self):
        return self.failed > 0

    def to_dict(self):
        return {
            "format": RESULT_FORMAT,
            "config": self.config,
            "config_hash": self.config_hash,
            "replications": self.replications,
            "summary": self.summary,
            "completed": self.completed,
            "failed": self.failed,
            "partial": self.partial,
            "timestamps": self.timestamps,
        }

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text())
        if data.get("format") != RESULT_FORMAT:
            raise AggregationError(f"{path}: not a {RESULT_FORMAT} file")
        res = cls(data["config"], data["config_hash"], data["replications"], data.get("timestamps", {}))
        for m, stored in data["summary"].items():
            fresh = res.summary.get(m)
            if fresh is None or fresh["count"] != stored["count"] or not _same(fresh["mean"], stored["mean"]) or not _same(fresh["std"], stored["std"]):
                raise AggregationError(f"{path}: stored summary for {m} does not match per-replication values")
        if data["completed"] + data["failed"] != len(res.replications):
            raise AggregationError(f"{path}: completed + failed != replications")
        return res


def _same(a, b):
    return (a is None and b is None) or a == b or (isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b))


def result_path(cfg):
    return Path(cfg.output_dir) / f"result_{cfg.config_hash()[:12]}.json"


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat()


def run_experiment(cfg, save=True):
    """Run all replications and persist the result (unless ``save=False``)."""
    started = _now()
    ks = range(cfg.replications)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            reps = list(pool.map(run_replication, [cfg] * cfg.replications, ks))
    else:
        reps = [run_replication(cfg, k) for k in ks]
    result = ExperimentResult(cfg.to_dict(), cfg.config_hash(), reps, {"started": started, "finished": _now()})
    if save:
        out = result_path(cfg)
        out.parent.mkdir(parents=True, exist_ok=True)
        result.save(out)
        log.info("wrote %s", out)
    return result


def format_cell(mean, std):
    return f"{mean:.4f} ({std:.3f})"


def _row_key(cfg):
    source = f"S{cfg['scenario']}" if cfg.get("data_path") is None else Path(cfg["data_path"]).name
    if cfg.get("d_star") is not None:
        source += f"/M{cfg['d_star']}"
    return (cfg["d"], source, cfg["n"], cfg["m_mult"])


def summary_rows(results):
    """``(row_key, {method: (mean, std)}, best_method)`` per result."""
    if not results:
        raise AggregationError("nothing to summarise")
    schema = results[0].methods
    rows = []
    for res in results:
        if res.methods != schema:
            raise AggregationError(f"method sets differ: {schema} vs {res.methods}")
        stats = {m: method_stats(res.values(m)) for m in schema}
        finite = {m: s[0] for m, s in stats.items() if not math.isnan(s[0])}
        best = min(finite, key=finite.get) if finite else None
        rows.append((_row_key(res.config), stats, best))
    return rows


def summarize(results):
    """Plain-text table: rows (d, source, n, m_mult), columns methods,
    cells "mean (std)"; the best method per row carries a ``*``."""
    rows = summary_rows(results)
    methods = results[0].methods
    head = ["d", "data", "n", "m_mult"] + methods
    body = []
    for key, stats, best in rows:
        cells = [format_cell(*stats[m]) + ("*" if m == best else "") for m in methods]
        body.append([str(v) for v in key] + cells)
    widths = [max(len(r[c]) for r in [head] + body) for c in range(len(head))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def emit_plot_data(result, path):
    """Long-format CSV ``method,replication,relative_error`` (17 significant digits)."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "replication", "relative_error"])
            for rec in result.replications:
                if rec["status"] != "ok":
                    continue
                for m in result.methods:
                    if m in rec["errors"]:
                        w.writerow([m, rec["index"], format(rec["errors"][m], ".17g")])
    except OSError as exc:
        raise OSError(f"cannot write plot data to {path}: {exc}") from exc
    return path


def read_plot_data(path):
    out = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["method"], []).append(float(row["relative_error"]))
    return out

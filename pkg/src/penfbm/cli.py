"""Command-line experiment runner.

Every subcommand writes its outputs and a ``manifest.json`` into ``--out``.
Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then explicit flags (flags win).

Exit codes: 0 success or pass, 1 acceptance failure, 2 invalid
configuration, 3 runtime budget or sampling failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np

from . import __version__, io, sde
from .ensemble import EstimateWithError
from .errors import BudgetExhausted, ConfigInvalid, PenFBMError
from .gaussgen import METHODS, TimeGrid, sample_fbm
from .limitlaw import asymmetry_test, normalizer_E_negMin, sample_limit_law
from .penalize import STEPS_PER_UNIT, default_steps, fit_rate, nested_estimates, sample_penalized
from .rng import as_seed
from .stats import WeightedSample, two_sample_test

SCHEMA_VERSION = 1

EXPERIMENTS = ("sample-fbm", "penalized", "limit", "sde", "drift-table", "compare", "persistence", "accept")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

#: Columns of every CSV the runner can write.
SCHEMA = {
    "schema_version": SCHEMA_VERSION,
    "files": {
        "paths.csv": {"command": "sample-fbm, sde --trajectories", "columns": {"path_id": "int", "t": "time", "value": "path value"}},
        "paths.bin": {
            "command": "sample-fbm --format binary, limit --dump",
            "layout": "header <ddqq (H, T, n_steps, count), then float64 little-endian row-major values",
        },
        "weights.bin": {"command": "limit --dump", "layout": "float64 little-endian, one weight per path"},
        "penalized.csv": {
            "command": "penalized",
            "columns": {"T": "horizon", "estimator": "I | mean_end | p_end_negative", "value": "estimate", "stderr": "standard error", "ess": "effective sample size"},
        },
        "limit.csv": {"command": "limit", "columns": {"statistic": "name", "value": "estimate", "stderr": "standard error"}},
        "endpoints.csv": {"command": "sde", "columns": {"path_id": "int", "x1": "X(1)", "min": "running minimum of X on [0, 1]"}},
        "drift_table.csv": {"command": "drift-table", "columns": {"t": "time", "x": "state", "value": "drift"}},
        "persistence.csv": {
            "command": "persistence",
            "columns": {"T": "horizon", "I": "I(T)", "I_stderr": "standard error", "survival": "P(min B_H >= -1 on [0, T])", "survival_stderr": "standard error"},
        },
        "summary.json": {"command": "penalized, limit, sde, persistence, compare", "layout": "JSON object"},
        "report.json": {"command": "accept", "layout": "JSON acceptance report, sorted keys"},
        "manifest.json": {"command": "all", "layout": "config snapshot, version, wall time, stream ranges, sha256 of outputs"},
    },
}


# ------------------------------------------------------------------ config

@dataclass
class ExperimentConfig:
    """Full, seedable description of one run."""

    experiment: str = "accept"
    hurst: float = 0.5
    horizon: float = 1.0
    horizons: list = field(default_factory=lambda: [64.0, 256.0, 1024.0])
    steps: int = 1024
    steps_per_unit: int = STEPS_PER_UNIT
    count: int = 10_000
    dt: float = 1e-4
    seed: int = 0
    out_dir: str = "out"
    method: str = "auto"
    format: str = "csv"
    kind: str = "penalized"
    start: float | None = None
    zero_noise: bool = False
    trajectories: bool = False
    store_steps: int = 0
    t_grid: str = "0:0.99:100"
    x_grid: str = "0:5:101"
    a: str = ""
    b: str = ""
    a_weights: str = ""
    b_weights: str = ""
    stat: str = "ks"
    boot: int = 1000
    time: float = 1.0
    threshold: float = 0.02
    dump: bool = False
    scale: float = 1.0
    only: list = field(default_factory=list)
    workers: int = 0

    def validate(self) -> ExperimentConfig:
        def bad(name, why):
            raise ConfigInvalid(why, field=name)

        if self.experiment not in EXPERIMENTS:
            bad("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        if not 0.0 < self.hurst < 1.0:
            bad("hurst", "must lie in (0, 1)")
        if not self.horizon > 0:
            bad("horizon", "must be positive")
        if not self.horizons or any(not T > 0 for T in self.horizons):
            bad("horizons", "must be a nonempty list of positive numbers")
        for name in ("steps", "steps_per_unit", "count", "boot"):
            if getattr(self, name) < 1:
                bad(name, "must be a positive integer")
        if not 0 < self.dt <= 1 or not math.isclose(1.0 / self.dt, round(1.0 / self.dt), rel_tol=1e-9):
            bad("dt", "must divide 1 into an integer number of steps")
        if not 0 <= self.seed < 2**64:
            bad("seed", "must be a 64-bit unsigned integer")
        if self.method not in METHODS:
            bad("method", f"must be one of {', '.join(METHODS)}")
        if self.format not in ("csv", "binary"):
            bad("format", "must be csv or binary")
        if self.kind not in ("penalized", "meander", "bessel"):
            bad("kind", "must be penalized, meander or bessel")
        if self.stat not in ("ks", "w1"):
            bad("stat", "must be ks or w1")
        if self.store_steps < 0:
            bad("store_steps", "must be nonnegative")
        if not self.scale > 0:
            bad("scale", "must be positive")
        if self.workers < 0:
            bad("workers", "must be nonnegative (0 means all logical processors)")
        if not 0 <= self.time <= 1:
            bad("time", "must lie in [0, 1]")
        for name in ("t_grid", "x_grid"):
            try:
                parse_grid(getattr(self, name))
            except ValueError as exc:
                bad(name, str(exc))
        if any(i not in range(1, 12) for i in self.only):
            bad("only", "criterion ids run from 1 to 11")
        return self

    @property
    def n_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    # ---- flat text format
    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        return cls.from_mapping(parse_config_text(text))

    @classmethod
    def from_mapping(cls, values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
        cfg = dataclasses.replace(base) if base is not None else cls()
        kinds = {f.name: f for f in dataclasses.fields(cls)}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in kinds:
                raise ConfigInvalid("unknown setting", field=key)
            try:
                setattr(cfg, name, _coerce(name, getattr(cls(), name), raw))
            except (TypeError, ValueError) as exc:
                raise ConfigInvalid(str(exc), field=key) from None
        return cfg

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)

_LIST_ITEM = {"horizons": float, "only": int}
_OPTIONAL_FLOAT = {"start"}


def _coerce(name, default, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if name in _LIST_ITEM:
        return [_LIST_ITEM[name](x) for x in raw.split(",") if x.strip()]
    if name in _OPTIONAL_FLOAT:
        return float(raw) if raw else None
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid("expected 'key = value'", field=f"line {lineno}")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {spec!r} must look like start:stop:num")
        return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    vals = [float(x) for x in spec.split(",") if x.strip()]
    if not vals:
        raise ValueError("empty grid")
    return np.array(vals)


# ---------------------------------------------------------------- manifest

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """``manifest.json``: written when a run starts and finalized when it ends."""

    def __init__(self, config: ExperimentConfig, out_dir: FilePath):
        self.config = config
        self.out_dir = out_dir
        self.path = out_dir / "manifest.json"
        self.streams: dict = {}
        self.outputs: list = []
        self.extra: dict = {}
        self._t0 = time.perf_counter()
        self.status = "running"
        self.wall_time = 0.0

    def add_streams(self, stage: str, seed, count: int) -> None:
        seed = as_seed(seed)
        self.streams[stage] = {"master_seed": seed.master_seed, "first": seed.stream_index, "stop": seed.stream_index + count}

    def add_output(self, name: str) -> FilePath:
        self.outputs.append(name)
        return self.out_dir / name

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "status": self.status,
            "config": self.config.as_dict(),
            "wall_time": self.wall_time,
            "streams": self.streams,
            "outputs": {n: sha256_file(self.out_dir / n) for n in self.outputs if (self.out_dir / n).exists()},
            **self.extra,
        }

    def write(self) -> None:
        self.path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")

    def finalize(self, status: str) -> None:
        self.status = status
        self.wall_time = time.perf_counter() - self._t0
        self.write()


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


# ------------------------------------------------------------- commands

def cmd_sample_fbm(cfg: ExperimentConfig, man: RunManifest) -> int:
    grid = TimeGrid(cfg.horizon, cfg.steps)
    seed = as_seed(cfg.seed)
    man.add_streams("paths", seed, cfg.count)
    man.write()
    ens = sample_fbm(cfg.hurst, grid, cfg.count, seed, method=cfg.method, workers=cfg.n_workers)
    if cfg.format == "csv":
        io.write_csv(ens, man.add_output("paths.csv"))
    else:
        io.write_binary(ens, cfg.hurst, man.add_output("paths.bin"))
    return EXIT_OK


def _weighted_mean_stderr(sample: WeightedSample, values) -> tuple:
    p = sample.weights
    mean = float(np.dot(p, values))
    return mean, float(math.sqrt(np.dot(p * p, (values - mean) ** 2)))


def cmd_penalized(cfg: ExperimentConfig, man: RunManifest) -> int:
    root = as_seed(cfg.seed)
    horizons = sorted(cfg.horizons)
    rows, estimates = [], []
    for i, T in enumerate(horizons):
        man.add_streams(f"T={T:g}", root.block(i), cfg.count)
    man.write()
    for i, T in enumerate(horizons):
        n_steps = default_steps(T, cfg.steps_per_unit)
        ens = sample_penalized(cfg.hurst, T, n_steps, cfg.count, root.block(i), store_steps=0, method=cfg.method, workers=cfg.n_workers)
        I = EstimateWithError.from_samples(ens.weights)
        estimates.append(I)
        end = ens.sample("end")
        mean, se = _weighted_mean_stderr(end, end.values)
        neg, neg_se = _weighted_mean_stderr(end, (end.values < 0).astype(float))
        rows += [(T, "I", I.value, I.stderr, ens.ess), (T, "mean_end", mean, se, ens.ess), (T, "p_end_negative", neg, neg_se, ens.ess)]
    _write_rows(man.add_output("penalized.csv"), ("T", "estimator", "value", "stderr", "ess"), rows)
    summary = {"hurst": cfg.hurst, "horizons": horizons, "steps_per_unit": cfg.steps_per_unit, "count": cfg.count}
    if len(horizons) >= 3:
        summary["rate_fit"] = fit_rate(horizons, estimates).as_dict()
        summary["target_slope"] = cfg.hurst - 1.0
    _write_json(man.add_output("summary.json"), summary)
    return EXIT_OK


def cmd_persistence(cfg: ExperimentConfig, man: RunManifest) -> int:
    seed = as_seed(cfg.seed)
    man.add_streams("paths", seed, cfg.count)
    man.write()
    horizons = sorted(cfg.horizons)
    I, alive = nested_estimates(cfg.hurst, horizons, cfg.steps_per_unit, cfg.count, seed, cfg.method, cfg.n_workers)
    rows = [(T, a.value, a.stderr, b.value, b.stderr) for T, a, b in zip(horizons, I, alive)]
    _write_rows(man.add_output("persistence.csv"), ("T", "I", "I_stderr", "survival", "survival_stderr"), rows)
    summary = {"hurst": cfg.hurst, "horizons": horizons, "steps_per_unit": cfg.steps_per_unit, "count": cfg.count, "target_slope": cfg.hurst - 1.0}
    if len(horizons) >= 3:
        summary["rate_fit"] = fit_rate(horizons, I).as_dict()
    _write_json(man.add_output("summary.json"), summary)
    return EXIT_OK


def cmd_limit(cfg: ExperimentConfig, man: RunManifest) -> int:
    root = as_seed(cfg.seed)
    man.add_streams("limit_law", root.block(0), cfg.count)
    man.add_streams("normalizer", root.block(1), cfg.count)
    man.add_streams("bootstrap", root.block(2), 1)
    man.write()
    ens = sample_limit_law(cfg.hurst, cfg.steps, cfg.count, root.block(0), store_steps=None if cfg.dump else 0, method=cfg.method, workers=cfg.n_workers)
    norm = normalizer_E_negMin(cfg.hurst, cfg.steps + cfg.steps % 2, cfg.count, root.block(1), method=cfg.method, workers=cfg.n_workers)
    asym = asymmetry_test(ens, n_boot=cfg.boot, level=0.99, seed=root.block(2))
    end = ens.sample("end")
    pos, pos_se = _weighted_mean_stderr(end, (end.values > 0).astype(float))
    neg, neg_se = _weighted_mean_stderr(end, (end.values < 0).astype(float))
    diff, diff_se = _weighted_mean_stderr(end, np.sign(end.values))
    rows = [
        ("E_neg_min", norm.neg_min.value, norm.neg_min.stderr),
        ("E_neg_min_extrapolated", norm.extrapolated.value, norm.extrapolated.stderr),
        ("E_max", norm.max.value, norm.max.stderr),
        ("P_end_positive", pos, pos_se),
        ("P_end_negative", neg, neg_se),
        ("asymmetry", diff, diff_se),
        ("ess", ens.ess, 0.0),
    ]
    _write_rows(man.add_output("limit.csv"), ("statistic", "value", "stderr"), rows)
    _write_json(man.add_output("summary.json"), {"hurst": cfg.hurst, "steps": cfg.steps, "count": cfg.count, "normalizer": norm.as_dict(), "asymmetry": asym.as_dict()})
    if cfg.dump:
        io.write_binary(ens.paths, cfg.hurst, man.add_output("paths.bin"))
        io.write_weights(ens.weights, man.add_output("weights.bin"))
    return EXIT_OK


def cmd_sde(cfg: ExperimentConfig, man: RunManifest) -> int:
    seed = as_seed(cfg.seed)
    n_steps = int(round(1.0 / cfg.dt))
    store = 0
    if cfg.trajectories:
        store = cfg.store_steps or n_steps
        if n_steps % store:
            raise ConfigInvalid(f"{store} must divide the {n_steps} Euler steps", field="store_steps")
    try:
        spec = sde.DriftSpec(cfg.kind, cfg.start)
    except ValueError as exc:
        raise ConfigInvalid(str(exc), field="start") from None
    man.add_streams("euler", seed, cfg.count)
    man.write()
    res = sde.euler_simulate(spec, n_steps, cfg.count, seed, zero_noise=cfg.zero_noise, store_steps=store)
    if cfg.trajectories:
        io.write_csv(res.paths, man.add_output("paths.csv"))
    else:
        rows = ((i, x, m) for i, (x, m) in enumerate(zip(res.x_end, res.run_min)))
        _write_rows(man.add_output("endpoints.csv"), ("path_id", "x1", "min"), rows)
    summary = {
        "kind": cfg.kind,
        "start": spec.initial(1.0 / n_steps),
        "dt": 1.0 / n_steps,
        "count": cfg.count,
        "zero_noise": cfg.zero_noise,
        "mean_x1": float(res.x_end.mean()),
        "mean_gap": float(res.gap.mean()),
        "steps_rejected": res.steps_rejected,
    }
    _write_json(man.add_output("summary.json"), summary)
    return EXIT_OK


def cmd_drift_table(cfg: ExperimentConfig, man: RunManifest) -> int:
    ts = parse_grid(cfg.t_grid)
    xs = parse_grid(cfg.x_grid)
    man.write()
    try:
        table = sde.drift_table(cfg.kind, ts, xs)
    except ValueError as exc:
        raise ConfigInvalid(f"grid outside the drift's domain: {exc}", field="x_grid") from None
    rows = ((t, x, table[i, j]) for i, t in enumerate(ts) for j, x in enumerate(xs))
    _write_rows(man.add_output("drift_table.csv"), ("t", "x", "value"), rows)
    return EXIT_OK


def _load_sample(name: str, path: str, weights: str, t: float) -> WeightedSample:
    if not path:
        raise ConfigInvalid("compare needs both --a and --b", field=name)
    try:
        _H, ens = io.read_binary(path)
        w = io.read_weights(weights) if weights else None
    except OSError as exc:
        raise ConfigInvalid(f"cannot read ensemble: {exc}", field=name) from None
    times = ens.grid.times / ens.grid.horizon
    j = int(np.argmin(np.abs(times - t)))
    if not math.isclose(times[j], t, abs_tol=1e-9):
        raise ConfigInvalid(f"time {t} is not on the stored grid", field="time")
    return WeightedSample(ens.values[:, j], w)


def cmd_compare(cfg: ExperimentConfig, man: RunManifest) -> int:
    seed = as_seed(cfg.seed)
    man.add_streams("bootstrap", seed, 1)
    man.write()
    a = _load_sample("a", cfg.a, cfg.a_weights, cfg.time)
    b = _load_sample("b", cfg.b, cfg.b_weights, cfg.time)
    rep = two_sample_test(a, b, cfg.threshold, stat=cfg.stat, n_boot=cfg.boot, seed=seed)
    _write_json(man.add_output("summary.json"), {"stat": cfg.stat, "time": cfg.time, "ess_a": a.ess, "ess_b": b.ess, **rep.as_dict()})
    print(f"{cfg.stat} = {rep.statistic:.6f} (threshold {cfg.threshold}) {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_accept(cfg: ExperimentConfig, man: RunManifest) -> int:
    from .acceptance import RUNTIME_CAPS, run_acceptance

    man.add_streams("acceptance", as_seed(cfg.seed), 0)
    man.write()
    report = run_acceptance(cfg.scale, cfg.seed, only=cfg.only or None, workers=cfg.n_workers, on_result=lambda r: print(r.line(), flush=True))
    man.add_output("report.json")
    (man.out_dir / "report.json").write_text(report.to_json())
    man.extra["runtimes"] = report.runtimes()
    man.extra["runtime_caps"] = {str(k): v for k, v in RUNTIME_CAPS.items()}
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL

COMMANDS = {
    "sample-fbm": cmd_sample_fbm,
    "penalized": cmd_penalized,
    "limit": cmd_limit,
    "sde": cmd_sde,
    "drift-table": cmd_drift_table,
    "compare": cmd_compare,
    "persistence": cmd_persistence,
    "accept": cmd_accept,
}


# ------------------------------------------------------------------ parser

class _Parser(argparse.ArgumentParser):
    """Argument errors become :class:`ConfigInvalid` instead of ``SystemExit``."""

    def error(self, message):
        raise ConfigInvalid(message, field="argv")


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--config", help="key = value settings file; explicit flags override it")
    common.add_argument("--seed", type=int, help="64-bit master seed")
    common.add_argument("--out", dest="out_dir", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads (0 = all logical processors)")

    parser = _Parser(prog="penfbm", description="Penalized fractional Brownian motion experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--schema", action="store_true", help="print the output file schema as JSON and exit")
    sub = parser.add_subparsers(dest="experiment", parser_class=_Parser)

    p = sub.add_parser("sample-fbm", parents=[common], argument_default=S, help="sample fBM paths")
    p.add_argument("--hurst", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--format", choices=("csv", "binary"))

    p = sub.add_parser("penalized", parents=[common], argument_default=S, help="penalized ensembles, I(T) and its rate")
    p.add_argument("--hurst", type=float)
    p.add_argument("--horizon-list", dest="horizons", type=_floats)
    p.add_argument("--steps-per-unit", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--method", choices=METHODS)

    p = sub.add_parser("limit", parents=[common], argument_default=S, help="limit-law ensemble and its statistics")
    p.add_argument("--hurst", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--boot", type=int)
    p.add_argument("--dump", action="store_const", const=True, help="also write paths.bin and weights.bin")

    p = sub.add_parser("sde", parents=[common], argument_default=S, help="Euler-Maruyama for the explicit drifts")
    p.add_argument("--kind", choices=("penalized", "meander", "bessel"))
    p.add_argument("--dt", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--start", type=float)
    p.add_argument("--zero-noise", action="store_const", const=True)
    p.add_argument("--trajectories", action="store_const", const=True, help="dump trajectories instead of endpoints")
    p.add_argument("--store-steps", type=int, help="subsample stored trajectories to this many steps")

    p = sub.add_parser("drift-table", parents=[common], argument_default=S, help="drift values on a (t, x) lattice")
    p.add_argument("--kind", choices=("penalized", "meander", "bessel"))
    p.add_argument("--t-grid", help="start:stop:num or comma list")
    p.add_argument("--x-grid", help="start:stop:num or comma list")

    p = sub.add_parser("compare", parents=[common], argument_default=S, help="two-sample distance between binary ensemble dumps")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--a-weights")
    p.add_argument("--b-weights")
    p.add_argument("--stat", choices=("ks", "w1"))
    p.add_argument("--boot", type=int)
    p.add_argument("--time", type=float, help="time in [0, 1] (fraction of the horizon) to compare at")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("persistence", parents=[common], argument_default=S, help="I(T), survival probabilities and the rate fit")
    p.add_argument("--hurst", type=float)
    p.add_argument("--horizons", type=_floats)
    p.add_argument("--steps-per-unit", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--method", choices=METHODS)

    p = sub.add_parser("accept", parents=[common], argument_default=S, help="run the acceptance suite")
    p.add_argument("--scale", type=float, help="multiply every path count by this factor")
    p.add_argument("--only", type=_ints, help="comma-separated criterion ids")
    return parser


def resolve_config(argv) -> ExperimentConfig:
    ns = vars(build_parser().parse_args(argv))
    experiment = ns.pop("experiment", None)
    ns.pop("schema", None)
    if experiment is None:
        raise ConfigInvalid("a subcommand is required", field="experiment")
    cfg = ExperimentConfig(experiment=experiment)
    path = ns.pop("config", None)
    if path is not None:
        try:
            text = FilePath(path).read_text()
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config file: {exc}", field="config") from None
        values = parse_config_text(text)
        values.pop("experiment", None)
        cfg = ExperimentConfig.from_mapping(values, base=cfg)
    cfg = ExperimentConfig.from_mapping(ns, base=cfg)
    return cfg.validate()


def run(cfg: ExperimentConfig) -> int:
    out = FilePath(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    man = RunManifest(cfg, out)
    man.outputs.append("config.txt")
    man.write()
    try:
        code = COMMANDS[cfg.experiment](cfg, man)
    except Exception:
        man.finalize("error")
        raise
    man.finalize("complete" if code == EXIT_OK else "failed")
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    if "--schema" in argv[:1] or argv == ["--schema"]:
        print(json.dumps(SCHEMA, indent=2, sort_keys=True))
        return EXIT_OK
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except ConfigInvalid as exc:
        print(f"penfbm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExhausted as exc:
        print(f"penfbm: budget exhausted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except PenFBMError as exc:
        print(f"penfbm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

if __name__ == "__main__":
    sys.exit(main())

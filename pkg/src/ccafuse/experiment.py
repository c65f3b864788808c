"""Seeded fusion experiments: config validation, run directories, sweeps.

A config is a JSON object::

    {
      "name": "robustness",
      "seed": 0,
      "dataset": {"kind": "synthetic", "n": 3000, "n_train": 2000, ...},
      "net": {"hidden": [], "classifier_hidden": 32},
      "schedule": {"epochs": 80, "cca_first_m": 60, ...},
      "modes": ["BASELINE", "ACCAR"],
      "corruption": {"view": "B", "sigma": 2.0, "seed_offset": 1000},
      "sweep_seeds": [0, 1, 2, 3, 4]
    }

``seed`` drives the dataset generator, the trainer and (plus
``seed_offset``) the test-time corruption. Every run writes into
``<out_dir>/<name>-<hash>`` where ``hash`` is taken over the fully resolved
config, so identical configs land in the same directory.
"""
import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CcaError, ConfigError
from .fusion import (
    Mode,
    NetConfig,
    TrainSchedule,
    TwoViewDataset,
    corrupt_view,
    evaluate,
    make_synthetic_twoview,
    make_synthetic_twoview_2d,
    train,
)
from .fusion.train import mode_fits
from .io import load_array, model_to_dict

_SCHEDULE_FIELDS = {f.name: f.default for f in fields(TrainSchedule)}
del _SCHEDULE_FIELDS["mode"], _SCHEDULE_FIELDS["seed"]

_DATASET_DEFAULTS = {
    "synthetic": {
        "n": 3000,
        "n_train": 2000,
        "latent_dim": 4,
        "n_classes": 4,
        "noise_a": 0.3,
        "noise_b": 0.3,
        "dim_a": 16,
        "dim_b": 16,
        "class_sep": 2.0,
        "within_std": 0.5,
    },
    "synthetic_2d": {
        "n": 1000,
        "n_train": 700,
        "latent_shape": [2, 2],
        "n_classes": 4,
        "noise_a": 0.3,
        "noise_b": 0.3,
        "shape_a": [8, 8],
        "shape_b": [8, 8],
        "class_sep": 3.0,
        "within_std": 0.5,
    },
    "files": {"view_a": None, "view_b": None, "labels": None, "n_train": None, "n_classes": None},
}

_TOP_FIELDS = ("name", "seed", "dataset", "net", "schedule", "modes", "corruption", "sweep_seeds")
_CORRUPTION_DEFAULTS = {"view": "B", "sigma": 2.0, "seed_offset": 1000}


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_type(path, value, default):
    if default is None:
        ok = True  # checked by the caller
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = _is_int(value)
    elif isinstance(default, float):
        ok = _is_num(value)
    elif isinstance(default, (list, tuple)):
        ok = isinstance(value, list) and all(_is_int(x) for x in value)
    else:
        ok = True
    if not ok:
        raise ConfigError(path, f"unexpected value {value!r}")


def _merge(path, given, defaults):
    if not isinstance(given, dict):
        raise ConfigError(path, "expected a JSON object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "unknown field")
    out = {}
    for key, default in defaults.items():
        value = given.get(key, default)
        _check_type(f"{path}.{key}", value, default)
        out[key] = float(value) if isinstance(default, float) else value
    return out


def _resolve_dataset(d, base_dir):
    if not isinstance(d, dict):
        raise ConfigError("dataset", "expected a JSON object")
    kind = d.get("kind", "synthetic")
    if kind not in _DATASET_DEFAULTS:
        raise ConfigError("dataset.kind", f"unknown kind {kind!r}; choose from {sorted(_DATASET_DEFAULTS)}")
    rest = {key: value for key, value in d.items() if key != "kind"}
    out = {"kind": kind, **_merge("dataset", rest, _DATASET_DEFAULTS[kind])}
    if kind == "files":
        for key in ("view_a", "view_b", "labels"):
            if out[key] is None:
                raise ConfigError(f"dataset.{key}", "missing required field")
            p = Path(out[key])
            p = p if p.is_absolute() else Path(base_dir) / p
            if not p.is_file():
                raise ConfigError(f"dataset.{key}", f"file not found: {p}")
            out[key] = str(p.resolve())
        for key in ("n_train", "n_classes"):
            if out[key] is not None and not _is_int(out[key]):
                raise ConfigError(f"dataset.{key}", f"expected an integer, got {out[key]!r}")
    else:
        if out["n_train"] < 1 or out["n_train"] >= out["n"]:
            raise ConfigError("dataset.n_train", f"must lie in [1, n={out['n']})")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully resolved experiment description."""

    name: str
    seed: int
    dataset: dict
    net: dict
    schedule: dict
    modes: tuple
    corruption: dict
    sweep_seeds: tuple

    @classmethod
    def from_dict(cls, d, base_dir="."):
        if not isinstance(d, dict):
            raise ConfigError("", "config must be a JSON object")
        unknown = sorted(set(d) - set(_TOP_FIELDS))
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        if "seed" not in d:
            raise ConfigError("seed", "missing required field (seeds must be explicit)")
        if not _is_int(d["seed"]) or d["seed"] < 0:
            raise ConfigError("seed", f"expected a non-negative integer, got {d['seed']!r}")
        if "dataset" not in d:
            raise ConfigError("dataset", "missing required field")
        name = d.get("name", "run")
        if not isinstance(name, str) or not name or any(c in name for c in "/\\"):
            raise ConfigError("name", f"expected a plain non-empty string, got {name!r}")
        dataset = _resolve_dataset(d["dataset"], base_dir)
        net_defaults = NetConfig().as_dict()
        net = _merge("net", d.get("net", {}), net_defaults)
        schedule = _merge("schedule", d.get("schedule", {}), _SCHEDULE_FIELDS)
        modes = d.get("modes", ["BASELINE", "ACCAR"])
        if not isinstance(modes, list) or not modes:
            raise ConfigError("modes", "expected a non-empty list of mode names")
        for i, m in enumerate(modes):
            if m not in Mode.__members__:
                raise ConfigError(f"modes[{i}]", f"unknown mode {m!r}; choose from {list(Mode.__members__)}")
        is_matrix = dataset["kind"] == "synthetic_2d"
        for i, m in enumerate(modes):
            if not mode_fits(m, is_matrix):
                raise ConfigError(f"modes[{i}]", f"mode {m} does not fit dataset kind {dataset['kind']!r}")
        corruption = d.get("corruption", _CORRUPTION_DEFAULTS)
        if corruption is not None:
            corruption = _merge("corruption", corruption, _CORRUPTION_DEFAULTS)
            if corruption["view"] not in ("A", "B"):
                raise ConfigError("corruption.view", "must be 'A' or 'B'")
            if corruption["sigma"] < 0:
                raise ConfigError("corruption.sigma", "must be >= 0")
        sweep = d.get("sweep_seeds", [])
        if not isinstance(sweep, list) or not all(_is_int(s) and s >= 0 for s in sweep):
            raise ConfigError("sweep_seeds", "expected a list of non-negative integers")
        try:
            TrainSchedule(mode=modes[0], seed=d["seed"], **schedule)
            NetConfig.from_dict(net)
        except (CcaError, TypeError) as exc:
            raise ConfigError("schedule", str(exc)) from None
        return cls(name, d["seed"], dataset, net, schedule, tuple(modes), corruption, tuple(sweep))

    def as_dict(self):
        return {
            "name": self.name,
            "seed": self.seed,
            "dataset": dict(self.dataset),
            "net": dict(self.net),
            "schedule": dict(self.schedule),
            "modes": list(self.modes),
            "corruption": None if self.corruption is None else dict(self.corruption),
            "sweep_seeds": list(self.sweep_seeds),
        }

    @property
    def config_hash(self):
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_seed(self, seed):
        d = self.as_dict()
        d["seed"] = seed
        d["sweep_seeds"] = []
        return ExperimentConfig.from_dict(d)

    def train_schedule(self, mode):
        return TrainSchedule(mode=mode, seed=self.seed, **self.schedule)


def load_config(path):
    """Parse a config file, or the config embedded in a run's ``summary.json``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("", f"config file not found: {path}")
    text = path.read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if isinstance(d, dict) and "config" in d and "version" in d:
        d = d["config"]
    return ExperimentConfig.from_dict(d, base_dir=path.parent)


def build_datasets(cfg):
    """``(train, test)`` split of the dataset described by ``cfg``."""
    ds = cfg.dataset
    kind = ds["kind"]
    if kind == "synthetic":
        full = make_synthetic_twoview(
            ds["n"], ds["latent_dim"], ds["n_classes"], ds["noise_a"], ds["noise_b"], cfg.seed,
            dim_a=ds["dim_a"], dim_b=ds["dim_b"], class_sep=ds["class_sep"], within_std=ds["within_std"],
        )
    elif kind == "synthetic_2d":
        full = make_synthetic_twoview_2d(
            ds["n"], tuple(ds["latent_shape"]), ds["n_classes"], ds["noise_a"], ds["noise_b"], cfg.seed,
            shape_a=tuple(ds["shape_a"]), shape_b=tuple(ds["shape_b"]),
            class_sep=ds["class_sep"], within_std=ds["within_std"],
        )
    else:
        a = load_array(ds["view_a"])
        b = load_array(ds["view_b"])
        raw = load_array(ds["labels"]).reshape(-1)
        labels = raw.astype(np.int64)
        if not np.array_equal(labels, raw):
            raise ConfigError("dataset.labels", "labels must be integers")
        n_classes = ds["n_classes"] or int(labels.max()) + 1
        full = TwoViewDataset(a, b, labels, n_classes)
    n_train = ds["n_train"] if ds["n_train"] is not None else (2 * full.n) // 3
    if not 1 <= n_train < full.n:
        raise ConfigError("dataset.n_train", f"must lie in [1, {full.n})")
    return full.subset(np.arange(n_train)), full.subset(np.arange(n_train, full.n))


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_dir(cfg, out_dir):
    return Path(out_dir) / f"{cfg.name}-{cfg.config_hash}"


def run_experiment(cfg, out_dir="runs", progress=None):
    """Train every mode in ``cfg`` on one seed and write the run directory.

    Files: ``log_<MODE>.csv`` (epoch, loss, corr, val_acc, replaced),
    ``net_<MODE>.json``, ``metrics.csv`` and ``summary.json`` (resolved
    config, hash and library version). Returns the directory path.
    """
    train_set, test_set = build_datasets(cfg)
    corrupt = None
    if cfg.corruption is not None:
        c = cfg.corruption
        corrupt = corrupt_view(test_set, c["view"], c["sigma"], cfg.seed + c["seed_offset"])
    net_config = NetConfig.from_dict(cfg.net)
    target = run_dir(cfg, out_dir)
    target.mkdir(parents=True, exist_ok=True)
    results = {}
    for mode in cfg.modes:
        schedule = cfg.train_schedule(mode)
        net, logs = train(train_set, net_config, schedule, val=test_set)
        _write_csv(
            target / f"log_{mode}.csv",
            ["epoch", "loss", "corr", "val_acc", "replaced"],
            [[g.epoch, _fmt(g.train_loss), _fmt(g.train_corr), _fmt(g.val_accuracy), int(g.cca_replaced)] for g in logs],
        )
        (target / f"net_{mode}.json").write_text(json.dumps(model_to_dict(net)))
        clean = evaluate(net, schedule, test_set)
        res = {"clean_accuracy": clean}
        if corrupt is not None:
            res["corrupt_accuracy"] = evaluate(net, schedule, corrupt)
            res["drop"] = clean - res["corrupt_accuracy"]
        results[mode] = res
        if progress:
            progress(cfg, mode, res)
    cols = ["clean_accuracy", "corrupt_accuracy", "drop"] if corrupt is not None else ["clean_accuracy"]
    _write_csv(
        target / "metrics.csv",
        ["seed", "mode", *cols],
        [[cfg.seed, mode, *(_fmt(results[mode][c]) for c in cols)] for mode in cfg.modes],
    )
    summary = {
        "version": __version__,
        "config_hash": cfg.config_hash,
        "config": cfg.as_dict(),
        "results": results,
    }
    (target / "summary.json").write_text(json.dumps(summary, indent=2))
    return target


def _run_one(args):
    cfg, out_dir = args
    return cfg.seed, str(run_experiment(cfg, out_dir))


def directional_summary(rows):
    """Median clean-minus-corrupt drop and corrupt accuracy per mode.

    ``rows`` holds ``(seed, mode, clean, corrupt)``. When both BASELINE
    and ACCAR are present, also reports whether ACCAR's median drop is
    strictly smaller and the corrupt-accuracy gap.
    """
    by_mode = {}
    for _, mode, clean, corr in rows:
        by_mode.setdefault(mode, []).append((clean, corr))
    out = {}
    for mode, vals in by_mode.items():
        v = np.array(vals)
        out[mode] = {
            "median_clean_accuracy": float(np.median(v[:, 0])),
            "median_corrupt_accuracy": float(np.median(v[:, 1])),
            "median_drop": float(np.median(v[:, 0] - v[:, 1])),
        }
    if "BASELINE" in out and "ACCAR" in out:
        out["accar_drop_smaller"] = out["ACCAR"]["median_drop"] < out["BASELINE"]["median_drop"]
        out["corrupt_gap"] = out["ACCAR"]["median_corrupt_accuracy"] - out["BASELINE"]["median_corrupt_accuracy"]
    return out


def run_sweep(cfg, out_dir="runs", workers=None):
    """Run each of ``cfg.sweep_seeds`` as an independent process.

    Per-seed runs keep their own directories; the aggregate goes to
    ``<out_dir>/<name>-sweep-<hash>`` with ``comparison.csv`` and
    ``summary.json``. Returns ``(aggregate_dir, summary)``.
    """
    if not cfg.sweep_seeds:
        raise ConfigError("sweep_seeds", "sweep mode needs a non-empty list")
    if cfg.corruption is None:
        raise ConfigError("corruption", "sweep comparison needs a corruption entry")
    jobs = [(cfg.with_seed(s), out_dir) for s in cfg.sweep_seeds]
    if workers == 1:
        done = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, jobs))
    rows = []
    for seed, path in done:
        res = json.loads((Path(path) / "summary.json").read_text())["results"]
        for mode in cfg.modes:
            rows.append((seed, mode, res[mode]["clean_accuracy"], res[mode]["corrupt_accuracy"]))
    target = Path(out_dir) / f"{cfg.name}-sweep-{cfg.config_hash}"
    target.mkdir(parents=True, exist_ok=True)
    _write_csv(
        target / "comparison.csv",
        ["seed", "mode", "clean_accuracy", "corrupt_accuracy", "drop"],
        [[s, m, _fmt(c), _fmt(k), _fmt(c - k)] for s, m, c, k in rows],
    )
    summary = {
        "version": __version__,
        "config_hash": cfg.config_hash,
        "config": cfg.as_dict(),
        "runs": {str(seed): path for seed, path in done},
        "directional": directional_summary(rows),
    }
    (target / "summary.json").write_text(json.dumps(summary, indent=2))
    return target, summary


def bundled_config_path(name):
    """Path of a config shipped with the package, e.g. ``'robustness'``."""
    return Path(__file__).parent / "configs" / f"{name}.json"

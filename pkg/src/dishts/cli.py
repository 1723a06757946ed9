"""Command-line entry point: ``dishts {train,eval,sweep,diagnose,bench}``.

Settings resolve in three layers: built-in defaults, then command-line
flags, then ``--config`` (a YAML mapping), which wins over both. Every
command validates the resolved settings before touching data and writes
``config.json`` plus ``run.json`` (seed, versions, output list) into
``--out``.

Exit codes: 0 success, 2 input/config error, 3 numeric failure, 4 internal
error. Failures print one line ``dishts-error category=<cat> message=<msg>``
to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .backbone import BACKBONE_KINDS
from .bench import BenchSuite, format_table, run_suite, shifted_suite
from .conet import INIT_STRATEGIES
from .data import SplitSpec, SyntheticSpec, chrono_split, gen_synthetic, load_csv, split_datasets
from .diagnostics import eval_metrics, per_series_metrics, shift_scan
from .errors import ConfigError, ContractError, DishError, InputError
from .pipeline import MODES, build_model, canonical_mode
from .training import (
    TrainConfig,
    load_checkpoint,
    load_into,
    save_checkpoint,
    train,
    write_history,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4
_EXIT_FOR = {"input": EXIT_INPUT, "numeric": EXIT_NUMERIC, "internal": EXIT_INTERNAL}
SWEEP_AXES = ("alpha", "lookback", "horizon", "init")

log = logging.getLogger("dishts")


@dataclass
class RunConfig:
    data: str | None = None
    synthetic_spec: str | None = None
    synthetic: dict | None = None        # inline synthetic spec (config file only)
    timestamp_column: bool = False
    lookback: int = 96
    horizon: int = 24
    split: str = "7:1:2"
    backbone: str = "linear"
    hidden: int = 32
    mode: str = "dish"
    init: str = "avg"
    alpha: float = 0.5
    lr: float = 1e-3
    batch: int = 64
    max_epochs: int = 50
    patience: int = 7
    seed: int = 0
    scale_mse: float = 1.0
    scale_mae: float = 1.0
    delta: float = 0.1
    anchors: int = 32
    symmetric: bool = False
    axis: str | None = None
    values: list = field(default_factory=list)
    out: str = "runs/latest"

    def validate(self):
        if sum(x is not None for x in (self.data, self.synthetic_spec, self.synthetic)) != 1:
            raise ConfigError("give exactly one data source: --data or --synthetic-spec")
        if self.lookback < 1 or self.horizon < 1:
            raise ConfigError("lookback and horizon must be positive")
        SplitSpec.parse(self.split)
        if self.backbone not in BACKBONE_KINDS:
            raise ConfigError(f"unknown backbone {self.backbone!r}; expected one of {BACKBONE_KINDS}")
        if self.backbone == "identity" and self.horizon > self.lookback:
            raise ConfigError("identity backbone needs horizon <= lookback")
        self.mode = canonical_mode(self.mode)
        if self.init not in INIT_STRATEGIES:
            raise ConfigError(f"unknown init {self.init!r}; expected one of {INIT_STRATEGIES}")
        self.train_config()
        if self.anchors < 2:
            raise ConfigError("anchors must be >= 2")
        if self.axis is not None and self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; expected one of {SWEEP_AXES}")
        return self

    def train_config(self):
        return TrainConfig(self.alpha, self.lr, self.batch, self.max_epochs, self.patience, self.seed)

    def to_dict(self):
        return dataclasses.asdict(self)


_FLAG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def resolve_config(flags: dict, config_path=None) -> RunConfig:
    """Defaults < flags < config file."""
    values = {k: v for k, v in flags.items() if k in _FLAG_FIELDS and v is not None}
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise InputError(f"no such config file: {path}")
        loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        unknown = set(k.replace("-", "_") for k in loaded) - _FLAG_FIELDS
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        values.update({k.replace("-", "_"): v for k, v in loaded.items()})
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# -- shared plumbing ---------------------------------------------------------------

def load_frame(cfg: RunConfig):
    if cfg.data is not None:
        return load_csv(cfg.data, timestamp_column=cfg.timestamp_column)
    spec = (SyntheticSpec.load(cfg.synthetic_spec) if cfg.synthetic_spec is not None
            else SyntheticSpec.from_dict(cfg.synthetic))
    return gen_synthetic(spec)


def _model_for(cfg: RunConfig, N, train_values=None):
    model = build_model(N, cfg.lookback, cfg.horizon, mode=cfg.mode, backbone=cfg.backbone,
                        init=cfg.init, seed=cfg.seed, hidden=cfg.hidden)
    if model.mode == "zscore_baseline" and train_values is not None:
        model.fit_zscore(train_values)
    return model


def _checkpoint_meta(cfg: RunConfig, N, names):
    return {"N": N, "L": cfg.lookback, "H": cfg.horizon, "mode": cfg.mode,
            "backbone": cfg.backbone, "hidden": cfg.hidden, "init": cfg.init,
            "series": ",".join(names), "version": __version__}


def _checkpoint_arrays(model):
    arrays = dict(model.parameters())
    if model.mode == "zscore_baseline":
        arrays["zscore.mean"] = model.zscore_mean
        arrays["zscore.std"] = model.zscore_std
    return arrays


def _write_manifest(out: Path, cfg: RunConfig, outputs, extra=None):
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    manifest = {
        "seed": cfg.seed,
        "versions": {"dishts": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "outputs": sorted(set(outputs) | {"config.json", "run.json"}),
    }
    manifest.update(extra or {})
    (out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit(cfg: RunConfig, frame):
    split = SplitSpec.parse(cfg.split)
    tr, va, te = split_datasets(frame, split, cfg.lookback, cfg.horizon, need=(True, True, False))
    model = _model_for(cfg, frame.N, chrono_split(frame, split)[0].values)
    result = train(model, tr, va, cfg.train_config())
    return model, result, te


# -- commands ------------------------------------------------------------------------

def cmd_train(cfg: RunConfig):
    frame = load_frame(cfg)
    out = _outdir(cfg)
    model, result, _ = _fit(cfg, frame)
    save_checkpoint(_checkpoint_arrays(model), out / "checkpoint.txt",
                    _checkpoint_meta(cfg, frame.N, frame.names))
    write_history(result.history, out / "history.csv")
    _write_manifest(out, cfg, ["checkpoint.txt", "history.csv"],
                    {"best_epoch": result.best_epoch, "best_val_mse": result.best_val,
                     "stopped_epoch": result.stopped_epoch})
    print(f"trained {cfg.mode}/{cfg.backbone}: best val MSE {result.best_val:.6g} "
          f"at epoch {result.best_epoch} (stopped at {result.stopped_epoch})")
    return result


def cmd_eval(checkpoint, cfg: RunConfig):
    meta, arrays = load_checkpoint(checkpoint)
    frame = load_frame(cfg)
    expected = {"N": str(frame.N), "L": str(cfg.lookback), "H": str(cfg.horizon),
                "mode": cfg.mode, "backbone": cfg.backbone}
    if cfg.backbone == "mlp":
        expected["hidden"] = str(cfg.hidden)
    clash = {k: (meta.get(k), v) for k, v in expected.items() if meta.get(k) != v}
    if clash:
        raise ContractError("checkpoint incompatible with config: " +
                            ", ".join(f"{k} checkpoint={a} config={b}" for k, (a, b) in clash.items()))
    split = SplitSpec.parse(cfg.split)
    test_part = chrono_split(frame, split)[2]
    if test_part.T < cfg.lookback + cfg.horizon:
        raise InputError(f"test partition has {test_part.T} rows, needs at least "
                         f"{cfg.lookback + cfg.horizon}")
    te = split_datasets(frame, split, cfg.lookback, cfg.horizon, need=(False, False, True))[2]
    model = _model_for(cfg, frame.N)
    if model.mode == "zscore_baseline":
        model.zscore_mean, model.zscore_std = arrays["zscore.mean"], arrays["zscore.std"]
    load_into(model, arrays)
    pred = model.predict(te.X)
    overall = eval_metrics(pred, te.Y, cfg.scale_mse, cfg.scale_mae)
    rows = [("all",) + tuple(overall)]
    rows += [(name,) + tuple(m) for name, m in
             zip(frame.names, per_series_metrics(pred, te.Y, cfg.scale_mse, cfg.scale_mae))]
    out = _outdir(cfg)
    with (out / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "mse", "mae", "scaled_mse", "scaled_mae"])
        for r in rows:
            w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    table = _metrics_table(rows)
    (out / "metrics.txt").write_text(table, encoding="utf-8")
    _write_manifest(out, cfg, ["metrics.csv", "metrics.txt"], {"checkpoint": str(checkpoint)})
    print(table, end="")
    return overall


def _metrics_table(rows):
    lines = [f"{'series':<12} {'MSE':>12} {'MAE':>12} {'MSE(scaled)':>12} {'MAE(scaled)':>12}"]
    lines.append("-" * len(lines[0]))
    for name, *vals in rows:
        lines.append(f"{name:<12} " + " ".join(f"{v:>12.6g}" for v in vals))
    return "\n".join(lines) + "\n"


def _axis_value(axis, raw):
    if axis == "alpha":
        return float(raw)
    if axis in ("lookback", "horizon"):
        return int(raw)
    return str(raw)


def cmd_sweep(cfg: RunConfig, axis=None, values=None):
    axis = axis or cfg.axis
    values = list(values if values is not None else cfg.values)
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep needs --axis in {SWEEP_AXES}")
    if not values:
        raise ConfigError("sweep needs at least one value (--values)")
    frame = load_frame(cfg)
    out = _outdir(cfg)
    rows = []
    for raw in values:
        value = _axis_value(axis, raw)
        row = {"axis": axis, "value": value, "seed": cfg.seed, "mse": "", "mae": "", "status": "ok"}
        try:
            cell = dataclasses.replace(cfg, **{axis: value}).validate()
            model, _, te = _fit(cell, frame)
            if te is None:
                raise InputError("test partition too short for one window")
            m = eval_metrics(model.predict(te.X), te.Y, cell.scale_mse, cell.scale_mae)
            row.update(mse=m.scaled_mse, mae=m.scaled_mae)
        except DishError as exc:
            row["status"] = f"{exc.category}: {exc}"
            log.warning("sweep cell %s=%s failed: %s", axis, value, exc)
        rows.append(row)
    with (out / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, ["axis", "value", "seed", "mse", "mae", "status"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    _write_manifest(out, cfg, ["sweep.csv"], {"axis": axis, "values": [str(v) for v in values]})
    for r in rows:
        print(f"{axis}={r['value']}: mse={r['mse']} mae={r['mae']} [{r['status']}]")
    return rows


def cmd_diagnose(cfg: RunConfig):
    frame = load_frame(cfg)
    report = shift_scan(frame, cfg.lookback, cfg.horizon, cfg.delta, cfg.anchors, cfg.symmetric)
    out = _outdir(cfg)
    report.write_csv(out / "shift_report.csv")
    (out / "shift_summary.txt").write_text(report.summary(), encoding="utf-8")
    _write_manifest(out, cfg, ["shift_report.csv", "shift_summary.txt"])
    print(report.summary(), end="")
    return report


def cmd_bench(suite_path, out_dir):
    suite = BenchSuite.load(suite_path) if suite_path else shifted_suite()
    result = run_suite(suite, out_dir)
    print(format_table(result.summary), end="")
    return result


# -- argument parsing ------------------------------------------------------------------

def _add_run_flags(p):
    g = p.add_argument_group("run settings (a --config file overrides these)")
    g.add_argument("--config", help="YAML file with run settings")
    g.add_argument("--data", help="CSV file, header row first")
    g.add_argument("--synthetic-spec", dest="synthetic_spec", help="YAML synthetic series spec")
    g.add_argument("--timestamp-column", dest="timestamp_column", action="store_const", const=True,
                   help="first CSV column is a timestamp to drop")
    g.add_argument("--lookback", type=int)
    g.add_argument("--horizon", type=int)
    g.add_argument("--split", help="train:val:test ratios, e.g. 7:1:2")
    g.add_argument("--backbone", choices=BACKBONE_KINDS)
    g.add_argument("--hidden", type=int, help="mlp hidden width")
    g.add_argument("--mode", choices=MODES + ("dish", "revin", "none", "zscore"))
    g.add_argument("--init", choices=INIT_STRATEGIES)
    g.add_argument("--alpha", type=float)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch", type=int)
    g.add_argument("--max-epochs", dest="max_epochs", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--scale-mse", dest="scale_mse", type=float)
    g.add_argument("--scale-mae", dest="scale_mae", type=float)
    g.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="dishts", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("train", help="train one model"))
    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("checkpoint")
    _add_run_flags(p)
    p = sub.add_parser("sweep", help="train one model per axis value")
    _add_run_flags(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", nargs="+")
    p = sub.add_parser("diagnose", help="intra/inter-space shift report")
    _add_run_flags(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--anchors", type=int)
    p.add_argument("--symmetric", action="store_const", const=True)
    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", help="YAML suite definition (default: built-in shifted suite)")
    p.add_argument("--out", default="runs/bench")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "bench":
            cmd_bench(args.suite, args.out)
            return EXIT_OK
        cfg = resolve_config(vars(args), args.config)
        if args.command == "train":
            cmd_train(cfg)
        elif args.command == "eval":
            cmd_eval(args.checkpoint, cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg)
        elif args.command == "diagnose":
            cmd_diagnose(cfg)
        return EXIT_OK
    except DishError as exc:
        return _fail(exc.category, exc)
    except (OSError, yaml.YAMLError) as exc:
        return _fail("input", exc)
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        return _fail("internal", exc)


def _fail(category, exc):
    msg = " ".join(str(exc).split())
    print(f"dishts-error category={category} message={msg}", file=sys.stderr)
    return _EXIT_FOR.get(category, EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())

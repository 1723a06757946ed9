"""Multi-seed comparison of normalization modes on synthetic shifted data.

A suite is a list of cells; each cell fixes a synthetic generator, window
lengths, backbone and training settings, and is run once per seed for every
mode. All modes of one (cell, seed) see the same frame, the same windows and
the same batch order. Improvement is ``1 - MSE(dish) / MSE(baseline)`` on
seed-averaged test MSE.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import ndcore as nd
from .data import SyntheticSpec, chrono_split, gen_synthetic, split_datasets
from .diagnostics import eval_metrics, mean_level_gap
from .errors import ConfigError, InputError, TrainingDiverged
from .pipeline import build_model, canonical_mode
from .training import TrainConfig, train

log = logging.getLogger(__name__)

RUN_FIELDS = ["cell", "mode", "seed", "mse", "mae", "level_gap", "epochs", "status"]
SUMMARY_FIELDS = ["cell", "mode", "runs", "mse_mean", "mse_std", "mae_mean", "mae_std",
                  "improvement_vs_none", "improvement_vs_revin"]


@dataclass
class BenchCell:
    name: str
    synthetic: dict
    L: int
    H: int
    seeds: tuple = (0, 1, 2)
    backbone: str = "linear"
    split: tuple = (7, 1, 2)
    alpha: float = 0.5
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 7
    init: str = "avg"
    hidden: int = 32

    def spec_for(self, seed):
        return SyntheticSpec.from_dict(dict(self.synthetic, seed=int(seed)))


@dataclass
class BenchSuite:
    name: str
    cells: list
    modes: tuple = ("none_baseline", "revin_baseline", "dish")

    def __post_init__(self):
        self.modes = tuple(canonical_mode(m) for m in self.modes)
        self.cells = [c if isinstance(c, BenchCell) else BenchCell(**c) for c in self.cells]
        if not self.cells:
            raise ConfigError(f"suite {self.name!r} has no cells")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise InputError(f"no such suite file: {path}")
        d = yaml.safe_load(path.read_text(encoding="utf-8"))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad suite definition: {exc}") from None

    def dump(self, path):
        d = {"name": self.name, "modes": list(self.modes),
             "cells": [_plain(dataclasses.asdict(c)) for c in self.cells]}
        Path(path).write_text(yaml.safe_dump(d, sort_keys=False), encoding="utf-8")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _segments(levels, lengths, ar, scales=None):
    scales = scales or [1.0] * len(levels)
    return [{"length": n, "level": float(lv), "scale": float(s), "ar": ar}
            for n, lv, s in zip(lengths, levels, scales)]


# Five training regimes, then one level each for validation and test so that
# evaluation windows sit in regimes never seen in training.
SHIFT_LENGTHS = [280] * 5 + [200, 400]
SHIFT_LEVELS = [10, 20, 15, 30, 25, 35, 50]


def shifted_synthetic(T=2000, N=4, ar=0.5):
    return {"T": T, "N": N, "seed": 0, "noise": 1.0, "level_jitter": 2.0,
            "segments": _segments(SHIFT_LEVELS, SHIFT_LENGTHS, ar)}


def stationary_synthetic(T=2000, N=4, ar=0.5):
    return {"T": T, "N": N, "seed": 0, "noise": 1.0, "level_jitter": 0.0,
            "segments": _segments([20.0], [T], ar)}


def shifted_suite(L=48, H=24, seeds=(0, 1, 2), backbone="linear", **train_kw):
    cell = BenchCell(f"shifted_L{L}_H{H}", shifted_synthetic(), L, H, tuple(seeds), backbone, **train_kw)
    return BenchSuite("shifted", [cell])


def stationary_suite(L=48, H=24, seeds=(0, 1, 2), backbone="linear", **train_kw):
    cell = BenchCell(f"stationary_L{L}_H{H}", stationary_synthetic(), L, H, tuple(seeds), backbone, **train_kw)
    return BenchSuite("stationary", [cell])


@dataclass
class SuiteResult:
    suite: BenchSuite
    runs: list = field(default_factory=list)

    @property
    def summary(self):
        return aggregate(self.runs)

    def mse(self, cell, mode):
        """Per-seed test MSE for successful runs, in seed order."""
        return [r["mse"] for r in self.runs
                if r["cell"] == cell and r["mode"] == mode and r["status"] == "ok"]

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / "runs.csv", RUN_FIELDS, self.runs)
        write_rows(out / "summary.csv", SUMMARY_FIELDS, self.summary)
        (out / "summary.txt").write_text(format_table(self.summary), encoding="utf-8")
        self.suite.dump(out / "suite.yaml")


def run_cell(cell: BenchCell, seed, mode):
    spec = cell.spec_for(seed)
    frame = gen_synthetic(spec)
    tr, va, te = split_datasets(frame, cell.split, cell.L, cell.H)
    model = build_model(spec.N, cell.L, cell.H, mode=mode, backbone=cell.backbone,
                        init=cell.init, seed=seed, hidden=cell.hidden)
    if model.mode == "zscore_baseline":
        model.fit_zscore(chrono_split(frame, cell.split)[0].values)
    cfg = TrainConfig(cell.alpha, cell.lr, cell.batch_size, cell.max_epochs, cell.patience, seed)
    row = {"cell": cell.name, "mode": model.mode, "seed": int(seed)}
    try:
        res = train(model, tr, va, cfg)
    except TrainingDiverged as exc:
        warnings.warn(f"{cell.name}/{model.mode}/seed {seed} diverged: {exc}")
        return dict(row, mse="", mae="", level_gap="", epochs=len(exc.history), status="diverged")
    m = eval_metrics(model.predict(te.X), te.Y)
    gap = ""
    if model.mode == "dish":
        _, level = model.forward(nd.Tensor(te.X.transpose(0, 2, 1)))
        gap = mean_level_gap(level.data, te.Y)
    return dict(row, mse=m.mse, mae=m.mae, level_gap=gap, epochs=res.stopped_epoch, status="ok")


def run_suite(suite: BenchSuite, out_dir=None) -> SuiteResult:
    result = SuiteResult(suite)
    for cell in suite.cells:
        for seed in cell.seeds:
            for mode in suite.modes:
                row = run_cell(cell, seed, mode)
                log.info("%s %s seed=%s mse=%s", cell.name, mode, seed, row["mse"])
                result.runs.append(row)
    if out_dir is not None:
        result.write(out_dir)
    return result


def aggregate(runs):
    """Summary rows computed only from per-run records."""
    rows = []
    cells = list(dict.fromkeys(r["cell"] for r in runs))
    for cell in cells:
        means = {}
        for mode in dict.fromkeys(r["mode"] for r in runs if r["cell"] == cell):
            ok = [r for r in runs if r["cell"] == cell and r["mode"] == mode and r["status"] == "ok"]
            mse = np.array([float(r["mse"]) for r in ok])
            mae = np.array([float(r["mae"]) for r in ok])
            row = {"cell": cell, "mode": mode, "runs": len(ok),
                   "mse_mean": mse.mean() if len(ok) else "",
                   "mse_std": mse.std() if len(ok) else "",
                   "mae_mean": mae.mean() if len(ok) else "",
                   "mae_std": mae.std() if len(ok) else "",
                   "improvement_vs_none": "", "improvement_vs_revin": ""}
            means[mode] = row["mse_mean"]
            rows.append(row)
        dish = means.get("dish", "")
        for row in rows:
            if row["cell"] != cell or row["mode"] != "dish" or dish == "":
                continue
            for base, key in (("none_baseline", "improvement_vs_none"),
                              ("revin_baseline", "improvement_vs_revin")):
                if means.get(base, "") not in ("", 0.0):
                    row[key] = 1.0 - dish / means[base]
    return rows


def write_rows(path, fields, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for k, v in r.items()})


def read_rows(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["seed"] = int(r["seed"])
        for k in ("mse", "mae"):
            r[k] = float(r[k]) if r[k] != "" else ""
    return rows


def format_table(summary):
    def fmt(v, pct=False):
        if v == "":
            return "-"
        return f"{100 * v:+.1f}%" if pct else f"{v:.4f}"

    header = f"{'cell':<22} {'mode':<16} {'runs':>4} {'MSE':>17} {'MAE':>17} {'vs none':>8} {'vs revin':>8}"
    lines = [header, "-" * len(header)]
    for r in summary:
        mse = f"{fmt(r['mse_mean'])}±{fmt(r['mse_std'])}"
        mae = f"{fmt(r['mae_mean'])}±{fmt(r['mae_std'])}"
        lines.append(f"{r['cell']:<22} {r['mode']:<16} {r['runs']:>4} {mse:>17} {mae:>17} "
                     f"{fmt(r['improvement_vs_none'], True):>8} {fmt(r['improvement_vs_revin'], True):>8}")
    return "\n".join(lines) + "\n"

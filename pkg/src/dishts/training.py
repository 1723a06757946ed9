"""Guided loss, Adam, early stopping, training loop and checkpoint I/O."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ndcore as nd
from .data import WindowDataset
from .errors import ConfigError, ContractError, InputError, NumericError, ShapeError, TrainingDiverged

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    alpha: float = 0.5
    lr: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 7
    seed: int = 0

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("patience, batch_size and max_epochs must be >= 1")


# -- loss ----------------------------------------------------------------------

def _t(x):
    return x if isinstance(x, nd.Tensor) else nd.Tensor(x)


def guidance_term(target, hori_level, time_axis=-2):
    """Sum over windows and series of ``(horizon mean - hori level)^2``."""
    target, hori_level = _t(target), _t(hori_level)
    hmean = nd.mean(target, axis=time_axis)
    if hmean.shape != hori_level.shape:
        raise ShapeError("guidance_term", hmean.shape, hori_level.shape)
    return nd.sum_(nd.square(nd.sub(hmean, hori_level)))


def dish_loss(forecast, target, hori_level=None, alpha=0.0, time_axis=-2):
    """Summed squared error plus ``alpha`` times the level-guidance term.

    ``forecast``/``target`` are ``(H, N)`` or ``(K, H, N)`` (``time_axis``
    marks the horizon axis); ``hori_level`` is ``(N,)`` or ``(K, N)``. Only
    the level coefficients are guided.
    """
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    forecast, target = _t(forecast), _t(target)
    if forecast.shape != target.shape:
        raise ShapeError("dish_loss", forecast.shape, target.shape)
    loss = nd.sum_(nd.square(nd.sub(forecast, target)))
    if alpha and hori_level is not None:
        loss = nd.add(loss, nd.mul(guidance_term(target, hori_level, time_axis), alpha))
    return loss


# -- Adam ----------------------------------------------------------------------

@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict, lr: float):
    """One bias-corrected Adam update applied in place to ``params[name].data``.

    Every gradient is checked before any parameter moves, so a nonfinite
    gradient leaves both parameters and state untouched.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"nonfinite gradient for parameter {name!r}; step aborted")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# -- early stopping --------------------------------------------------------------

class EarlyStopping:
    """Stops once the score fails to strictly improve ``patience`` times in a row."""

    def __init__(self, patience=7):
        if patience < 1:
            raise ConfigError("patience must be >= 1")
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.wait = 0

    def update(self, epoch, score):
        if score < self.best:
            self.best, self.best_epoch, self.wait = score, epoch, 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self):
        return self.wait >= self.patience


# -- training loop ---------------------------------------------------------------

def snapshot(params):
    return {k: p.data.copy() for k, p in params.items()}


def restore(params, snap):
    for k, p in params.items():
        p.data[...] = snap[k]


def val_mse(model, dataset: WindowDataset, batch=1024):
    """Raw-space MSE of the model's denormalized forecasts."""
    err = 0.0
    for i in range(0, len(dataset), batch):
        pred = model.predict(dataset.X[i:i + batch])
        err += float(((pred - dataset.Y[i:i + batch]) ** 2).sum())
    return err / dataset.Y.size


@dataclass
class TrainResult:
    model: object
    history: list          # (epoch, train_loss, val_mse)
    best_epoch: int
    best_val: float
    stopped_epoch: int
    checkpoint: dict


def train(model, train_set: WindowDataset, val_set: WindowDataset | None, cfg: TrainConfig,
          evaluate=None, on_epoch=None):
    """Fit ``model`` on randomly ordered mini-batches with early stopping.

    ``evaluate(model) -> float`` replaces the validation MSE when given.
    ``on_epoch(epoch, model)`` runs after each evaluation. The best-scoring
    parameters are restored before returning. ``train_loss`` in the history
    is the epoch's summed loss divided by the number of forecast elements.
    """
    if train_set is None or len(train_set) == 0:
        raise InputError("training set is empty")
    if evaluate is None:
        if val_set is None or len(val_set) == 0:
            raise InputError("validation set is empty")
        evaluate = lambda m: val_mse(m, val_set)  # noqa: E731
    if train_set.X.shape[1:] != (model.L, model.N) or train_set.Y.shape[1:] != (model.H, model.N):
        raise ShapeError("train", train_set.X.shape, (model.L, model.N))

    params = model.parameters(trainable_only=True)
    all_params = model.parameters()
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState()
    stopper = EarlyStopping(cfg.patience)
    best = snapshot(all_params)
    history = []
    Xs = train_set.X.transpose(0, 2, 1)
    Ys = train_set.Y.transpose(0, 2, 1)
    n = len(train_set)
    per_elem = n * model.N * model.H
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        try:
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                nd.zero_grad(params.values())
                with nd.GradTape() as tape:
                    y, level = model.forward(nd.Tensor(Xs[idx]))
                    loss = dish_loss(y, Ys[idx], level, cfg.alpha, time_axis=-1)
                total += loss.item()
                if params:
                    grads = backward_named(tape, loss, params)
                    adam_step(adam, params, grads, cfg.lr)
            score = float(evaluate(model))
            if not math.isfinite(score):
                raise NumericError(f"validation score is not finite at epoch {epoch}")
        except NumericError as exc:
            restore(all_params, best)
            raise TrainingDiverged(f"training diverged at epoch {epoch}: {exc}", best, history) from exc
        history.append((epoch, total / per_elem, score))
        if stopper.update(epoch, score):
            best = snapshot(all_params)
        if on_epoch is not None:
            on_epoch(epoch, model)
        log.debug("epoch %d train_loss %.6g val %.6g", epoch, total / per_elem, score)
        if stopper.should_stop or not params:
            break
    restore(all_params, best)
    return TrainResult(model, history, stopper.best_epoch, stopper.best, epoch, best)


def backward_named(tape, loss, params: dict):
    grads = nd.backward(tape, loss, list(params.values()))
    return dict(zip(params.keys(), grads))


# -- artifacts -------------------------------------------------------------------

def write_history(history, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_mse"])
        for epoch, tl, vm in history:
            w.writerow([epoch, repr(float(tl)), repr(float(vm))])


CHECKPOINT_HEADER = "# dishts-checkpoint v1"


def save_checkpoint(params: dict, path, meta: dict | None = None):
    """Plain-text checkpoint: ``# key: value`` metadata, then one
    ``name<TAB>d1,d2,..<TAB>v v v ...`` line per tensor.

    Values are written with ``float.hex`` so a reload is bit-exact.
    """
    lines = [CHECKPOINT_HEADER]
    for k, v in (meta or {}).items():
        lines.append(f"# {k}: {v}")
    for name, arr in params.items():
        a = arr.data if isinstance(arr, nd.Tensor) else np.asarray(arr, dtype=np.float64)
        shape = ",".join(str(d) for d in a.shape)
        vals = " ".join(float(x).hex() for x in a.reshape(-1))
        lines.append(f"{name}\t{shape}\t{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Return ``(meta, {name: ndarray})``."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such checkpoint: {path}")
    text = path.read_text(encoding="utf-8").splitlines()
    if not text or text[0] != CHECKPOINT_HEADER:
        raise InputError(f"{path}: not a dishts checkpoint")
    meta, arrays = {}, {}
    for ln, line in enumerate(text[1:], start=2):
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
            continue
        try:
            name, shape, vals = line.split("\t")
            dims = tuple(int(d) for d in shape.split(",")) if shape else ()
            data = np.array([float.fromhex(x) for x in vals.split()], dtype=np.float64)
            arrays[name] = data.reshape(dims)
        except ValueError as exc:
            raise InputError(f"{path}: malformed line {ln}: {exc}") from None
    return meta, arrays


def load_into(model, arrays):
    """Copy checkpoint arrays into ``model``'s parameters, checking shapes."""
    params = model.parameters()
    missing = set(params) - set(arrays)
    if missing:
        raise ContractError(f"checkpoint lacks parameters {sorted(missing)}")
    for name, p in params.items():
        if arrays[name].shape != p.shape:
            raise ShapeError(f"load {name}", arrays[name].shape, p.shape,
                             detail="checkpoint incompatible with model configuration")
        p.data[...] = arrays[name]
    return model

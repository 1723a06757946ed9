"""Normalize -> forecast -> denormalize wrapper and its baseline variants.

Modes:

``dish``
    BackConet coefficients normalize the lookback, HoriConet coefficients
    denormalize the backbone output.
``revin_baseline``
    Per-window mean and population std, used on both sides (non-affine).
``zscore_baseline``
    Fixed per-series train-set mean/std on both sides.
``none_baseline``
    The backbone alone on raw values.
"""

from __future__ import annotations

import numpy as np

from . import ndcore as nd
from .backbone import make_backbone
from .conet import EPS_FLOOR, DistCoeffs, DualConet, series_major
from .errors import ConfigError, ContractError

MODES = ("dish", "revin_baseline", "none_baseline", "zscore_baseline")
_ALIASES = {"revin": "revin_baseline", "none": "none_baseline", "zscore": "zscore_baseline"}


def canonical_mode(mode):
    mode = _ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ConfigError(f"unknown normalization mode {mode!r}; expected one of {MODES}")
    return mode


def _as_tensor(x):
    return x if isinstance(x, nd.Tensor) else nd.Tensor(x)


def _expand_time(coef):
    # (N,) -> (1, N), (B, N) -> (B, 1, N): broadcast across the time axis
    return nd.reshape(coef, coef.shape[:-1] + (1, coef.shape[-1]))


def normalize(lookback, back_coeffs: DistCoeffs):
    """``(x - level) / scale`` per series, on ``(L, N)`` or ``(B, L, N)``."""
    x = _as_tensor(lookback)
    return nd.div(nd.sub(x, _expand_time(back_coeffs.level)), _expand_time(back_coeffs.scale))


def denormalize(raw_forecast, hori_coeffs: DistCoeffs):
    """``scale * y + level`` per series, on ``(H, N)`` or ``(B, H, N)``."""
    y = _as_tensor(raw_forecast)
    return nd.add(nd.mul(y, _expand_time(hori_coeffs.scale)), _expand_time(hori_coeffs.level))


def window_stats(x):
    """Per-series mean and floored population std over the last axis."""
    mu = x.mean(axis=-1)
    sd = np.maximum(np.sqrt(((x - mu[..., None]) ** 2).mean(axis=-1)), EPS_FLOOR)
    return mu, sd


class DishModel:
    def __init__(self, dual: DualConet | None, backbone, mode="dish", train_conets=True):
        self.mode = canonical_mode(mode)
        if self.mode == "dish" and dual is None:
            raise ConfigError("dish mode needs a DualConet")
        self.dual = dual
        self.backbone = backbone
        self.train_conets = train_conets
        self.zscore_mean = None
        self.zscore_std = None

    @property
    def N(self):
        return self.backbone.N

    @property
    def L(self):
        return self.backbone.L

    @property
    def H(self):
        return self.backbone.H

    def fit_zscore(self, train_values):
        v = np.asarray(train_values, dtype=np.float64)
        self.zscore_mean = v.mean(axis=0)
        self.zscore_std = np.maximum(v.std(axis=0), EPS_FLOOR)
        return self

    def parameters(self, trainable_only=False):
        """Learnable tensors keyed by name, in a fixed order."""
        params = {}
        if self.mode == "dish" and not (trainable_only and not self.train_conets):
            params.update(self.dual.parameters())
        params.update(self.backbone.parameters())
        return params

    def _coefficients(self, x):
        """Back and hori coefficients for series-major ``x[B, N, L]``."""
        if self.mode == "dish":
            return self.dual.forward(x)
        if self.mode == "revin_baseline":
            mu, sd = window_stats(x.data)
            c = DistCoeffs(nd.Tensor(mu), nd.Tensor(sd))
            return c, c
        if self.mode == "zscore_baseline":
            if self.zscore_mean is None:
                raise ContractError("zscore_baseline needs fit_zscore() on the training data first")
            B = x.shape[0]
            c = DistCoeffs(nd.Tensor(np.broadcast_to(self.zscore_mean, (B, self.N))),
                           nd.Tensor(np.broadcast_to(self.zscore_std, (B, self.N))))
            return c, c
        return None, None

    def forward(self, x):
        """Series-major forward: ``x[B, N, L] -> (y[B, N, H], hori_level[B, N] | None)``."""
        back, hori = self._coefficients(x)
        if back is None:
            return self.backbone.forward(x), None
        B, N, _ = x.shape
        xn = nd.div(nd.sub(x, nd.reshape(back.level, (B, N, 1))), nd.reshape(back.scale, (B, N, 1)))
        yn = self.backbone.forward(xn)
        y = nd.add(nd.mul(yn, nd.reshape(hori.scale, (B, N, 1))), nd.reshape(hori.level, (B, N, 1)))
        return y, (hori.level if self.mode == "dish" else None)

    def predict(self, X):
        """Plain numpy forecasts ``(B, H, N)`` for lookbacks ``(B, L, N)``."""
        y, _ = self.forward(nd.Tensor(np.asarray(X).transpose(0, 2, 1)))
        return y.data.transpose(0, 2, 1)


def dish_forward(model: DishModel, lookback):
    """Forecast for an ``(L, N)`` or ``(B, L, N)`` lookback.

    Returns ``(forecast, hori_level)``; the forecast has the lookback's
    layout with ``H`` rows, and ``hori_level`` is ``None`` outside dish mode.
    """
    x, batched = series_major(lookback)
    y, level = model.forward(x)
    y = nd.transpose(y, (0, 2, 1))
    if batched:
        return y, level
    return nd.reshape(y, y.shape[1:]), (None if level is None else nd.reshape(level, level.shape[1:]))


def build_model(N, L, H, mode="dish", backbone="linear", init="avg", seed=0, hidden=32,
                slope=nd.DEFAULT_SLOPE):
    """Assemble a :class:`DishModel` with seed-derived, independent parameter streams."""
    s_conet, s_bb = np.random.SeedSequence(seed).generate_state(2)
    mode = canonical_mode(mode)
    dual = DualConet.create(N, L, init, int(s_conet), slope) if mode == "dish" else None
    return DishModel(dual, make_backbone(backbone, N, L, H, hidden=hidden, seed=int(s_bb)), mode)

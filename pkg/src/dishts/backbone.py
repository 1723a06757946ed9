"""Forecasting backbones mapping a (normalized) lookback to a horizon.

All backbones are channel independent: each series is forecast from its own
lookback. Inputs and outputs are series-major, ``(B, N, L) -> (B, N, H)``.
"""

from __future__ import annotations

import numpy as np

from . import ndcore as nd
from .conet import series_major
from .errors import ConfigError, ContractError, ShapeError

BACKBONE_KINDS = ("identity", "linear", "mlp")


class IdentityBackbone:
    """Persistence of the last ``H`` lookback steps. Parameter free."""

    kind = "identity"

    def __init__(self, N, L, H):
        if H > L:
            raise ContractError(f"identity backbone needs H <= L (H={H}, L={L})")
        self.N, self.L, self.H = N, L, H

    def parameters(self):
        return {}

    def forward(self, x):
        _check_input(self, x)
        return nd.take(x, (Ellipsis, slice(self.L - self.H, self.L)))


class LinearBackbone:
    """Per-series affine map ``y_i = W_i x_i + b_i`` with ``W_i`` of shape ``H x L``.

    Initialized at the "repeat last value" selector plus ``init_noise``
    Gaussian jitter, so an untrained model forecasts by persistence.
    """

    kind = "linear"

    def __init__(self, N, L, H, seed=0, init_noise=1e-2):
        self.N, self.L, self.H = N, L, H
        rng = np.random.default_rng(seed)
        w = np.zeros((N, H, L))
        w[:, :, -1] = 1.0
        w += init_noise * rng.standard_normal(w.shape)
        self.weight = nd.Tensor(w, requires_grad=True, name="backbone.weight")
        self.bias = nd.Tensor(np.zeros((N, H)), requires_grad=True, name="backbone.bias")

    def parameters(self):
        return {"backbone.weight": self.weight, "backbone.bias": self.bias}

    def forward(self, x):
        _check_input(self, x)
        return nd.add(nd.matvec(self.weight, x), self.bias)


class MLPBackbone:
    """Two-layer leaky-ReLU network shared by all series."""

    kind = "mlp"

    def __init__(self, N, L, H, hidden=32, seed=0, slope=nd.DEFAULT_SLOPE):
        self.N, self.L, self.H, self.hidden = N, L, H, hidden
        self.slope = slope
        rng = np.random.default_rng(seed)
        self.w1 = nd.Tensor(rng.standard_normal((hidden, L)) / np.sqrt(L), requires_grad=True,
                            name="backbone.w1")
        self.b1 = nd.Tensor(np.zeros(hidden), requires_grad=True, name="backbone.b1")
        self.w2 = nd.Tensor(rng.standard_normal((H, hidden)) / np.sqrt(hidden), requires_grad=True,
                            name="backbone.w2")
        self.b2 = nd.Tensor(np.zeros(H), requires_grad=True, name="backbone.b2")

    def parameters(self):
        return {p.name: p for p in (self.w1, self.b1, self.w2, self.b2)}

    def forward(self, x):
        _check_input(self, x)
        h = nd.leaky_relu(nd.add(nd.matvec(self.w1, x), self.b1), self.slope)
        return nd.add(nd.matvec(self.w2, h), self.b2)


def _check_input(bb, x):
    if x.shape[-2:] != (bb.N, bb.L):
        raise ShapeError(f"{bb.kind} backbone", x.shape, ("B", bb.N, bb.L))


def make_backbone(kind, N, L, H, hidden=32, seed=0):
    if kind == "identity":
        return IdentityBackbone(N, L, H)
    if kind == "linear":
        return LinearBackbone(N, L, H, seed=seed)
    if kind == "mlp":
        return MLPBackbone(N, L, H, hidden=hidden, seed=seed)
    raise ConfigError(f"unknown backbone {kind!r}; expected one of {BACKBONE_KINDS}")


def backbone_forward(bb, normalized_lookback):
    """Forecast from an ``(L, N)`` or ``(B, L, N)`` array; returns the same layout."""
    x, batched = series_major(normalized_lookback)
    y = nd.transpose(bb.forward(x), (0, 2, 1))
    return y if batched else nd.reshape(y, y.shape[1:])

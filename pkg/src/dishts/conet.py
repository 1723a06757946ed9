"""Coefficient networks: lookback window -> (level, scale) per series.

A Conet is anything with ``forward(x) -> DistCoeffs`` and ``parameters()``;
the pipeline depends on nothing else. :class:`LinearConet` is the simple
single-layer instance: a per-series linear projection through a leaky ReLU
gives the level, and the root mean squared deviation of the window around
that level gives the scale.

Batched tensors are laid out series-major, ``(B, N, L)``; the public
helpers accept the natural ``(L, N)`` or ``(B, L, N)`` layout and transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndcore as nd
from .errors import ConfigError, ShapeError

EPS_FLOOR = nd.EPS_FLOOR
INIT_STRATEGIES = ("avg", "norm", "uniform")


@dataclass
class DistCoeffs:
    """Level and scale coefficients, each shaped ``(B, N)`` (or ``(N,)``)."""

    level: nd.Tensor
    scale: nd.Tensor

    def numpy(self):
        return self.level.numpy(), self.scale.numpy()


def series_major(lookback):
    """Return ``(x[B, N, L], batched)`` from an ``(L, N)``/``(B, L, N)`` input."""
    if isinstance(lookback, nd.Tensor):
        if lookback.data.ndim == 2:
            return nd.transpose(nd.reshape(lookback, (1,) + lookback.shape), (0, 2, 1)), False
        return nd.transpose(lookback, (0, 2, 1)), True
    arr = np.asarray(lookback, dtype=np.float64)
    if arr.ndim == 2:
        return nd.Tensor(arr.T[None]), False
    if arr.ndim == 3:
        return nd.Tensor(arr.transpose(0, 2, 1)), True
    raise ShapeError("lookback", arr.shape, ("L", "N"))


def init_params(N, L, strategy="avg", seed=0):
    """Initial ``N x L`` projection weights.

    ``avg`` gives every weight ``1/L`` so the pre-activation is the window
    mean; ``norm`` draws standard normals; ``uniform`` draws from ``[0, 1)``.
    """
    if N < 1 or L < 1:
        raise ConfigError(f"N and L must be positive (N={N}, L={L})")
    rng = np.random.default_rng(seed)
    if strategy == "avg":
        return np.full((N, L), 1.0 / L)
    if strategy == "norm":
        return rng.standard_normal((N, L))
    if strategy == "uniform":
        return rng.random((N, L))
    raise ConfigError(f"unknown init strategy {strategy!r}; expected one of {INIT_STRATEGIES}")


class LinearConet:
    def __init__(self, N, L, init="avg", seed=0, slope=nd.DEFAULT_SLOPE, name="conet"):
        self.N, self.L = N, L
        self.init = init
        self.slope = slope
        self.name = name
        self.v = nd.Tensor(init_params(N, L, init, seed), requires_grad=True, name=f"{name}.v")

    def parameters(self):
        return {self.v.name: self.v}

    def forward(self, x):
        """``x`` is series-major ``(B, N, L)``."""
        B, N, L = x.shape
        if (N, L) != (self.N, self.L):
            raise ShapeError("conet_forward", x.shape, (self.N, self.L),
                             detail="lookback series/length must match the weights")
        w = nd.reshape(self.v, (N, 1, L))
        level = nd.leaky_relu(nd.reshape(nd.matvec(w, x), (B, N)), self.slope)
        dev = nd.sub(x, nd.reshape(level, (B, N, 1)))
        scale = nd.clamp_min(nd.sqrt(nd.mean(nd.square(dev), axis=-1)), EPS_FLOOR)
        return DistCoeffs(level, scale)


def conet_forward(conet, lookback) -> DistCoeffs:
    """Apply ``conet`` to an ``(L, N)`` or ``(B, L, N)`` lookback."""
    x, batched = series_major(lookback)
    c = conet.forward(x)
    if batched:
        return c
    n = c.level.shape[-1]
    return DistCoeffs(nd.reshape(c.level, (n,)), nd.reshape(c.scale, (n,)))


class DualConet:
    """Two Conets with disjoint parameters fed the same lookback."""

    def __init__(self, back, hori):
        if back is hori:
            raise ConfigError("back and hori Conets must be distinct objects")
        self.back = back
        self.hori = hori

    @classmethod
    def create(cls, N, L, init="avg", seed=0, slope=nd.DEFAULT_SLOPE):
        sb, sh = np.random.SeedSequence(seed).spawn(2)
        return cls(
            LinearConet(N, L, init, np.random.default_rng(sb), slope, name="back"),
            LinearConet(N, L, init, np.random.default_rng(sh), slope, name="hori"),
        )

    def parameters(self):
        return {**self.back.parameters(), **self.hori.parameters()}

    def forward(self, x):
        return self.back.forward(x), self.hori.forward(x)


def dual_forward(dual: DualConet, lookback):
    return conet_forward(dual.back, lookback), conet_forward(dual.hori, lookback)

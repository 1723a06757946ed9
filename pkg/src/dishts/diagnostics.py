"""Shift diagnostics between windows and forecast error metrics.

Window distributions are summarised as Gaussians on (mean, population std)
and compared with closed-form KL divergence. Intra-space distances compare
lookbacks at different anchors; inter-space distances compare a lookback with
its own horizon.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .conet import EPS_FLOOR
from .data import SeriesFrame, window_arrays
from .errors import ContractError, ShapeError


@dataclass(frozen=True)
class WindowStats:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def of(cls, window, axis=0):
        """Stats along ``axis`` (time) of an ``L x N`` window, std floored."""
        w = np.asarray(window, dtype=np.float64)
        mu = w.mean(axis=axis)
        sd = np.maximum(np.sqrt(((w - np.expand_dims(mu, axis)) ** 2).mean(axis=axis)), EPS_FLOOR)
        return cls(mu, sd)


def gaussian_kl(a: WindowStats, b: WindowStats):
    """KL(N(a.mean, a.std^2) || N(b.mean, b.std^2)), elementwise."""
    s1 = np.maximum(np.asarray(a.std, dtype=np.float64), EPS_FLOOR)
    s2 = np.maximum(np.asarray(b.std, dtype=np.float64), EPS_FLOOR)
    d = np.asarray(a.mean, dtype=np.float64) - np.asarray(b.mean, dtype=np.float64)
    kl = np.log(s2 / s1) + (s1 ** 2 + d ** 2) / (2.0 * s2 ** 2) - 0.5
    # rounding can leave tiny negatives for identical inputs
    kl = np.maximum(kl, 0.0)
    return float(kl) if kl.ndim == 0 else kl


def symmetric_kl(a, b):
    return 0.5 * (gaussian_kl(a, b) + gaussian_kl(b, a))


@dataclass
class ShiftReport:
    names: tuple
    anchors: np.ndarray           # (S,)
    intra: np.ndarray             # (N, S, S) lookback(u) vs lookback(v)
    inter: np.ndarray             # (S, N) lookback(u) vs horizon(u)
    delta: float
    L: int
    H: int
    symmetric: bool = False
    change_points: list = field(default_factory=list)

    @property
    def intra_flags(self):
        return self.intra > self.delta

    @property
    def inter_flags(self):
        return self.inter > self.delta

    def with_delta(self, delta):
        return ShiftReport(self.names, self.anchors, self.intra, self.inter, delta, self.L, self.H,
                           self.symmetric, list(self.change_points))

    def flagged_inter_anchors(self):
        return sorted({int(self.anchors[s]) for s, _ in np.argwhere(self.inter_flags)})

    def rows(self):
        """Long-format rows: kind, anchor, other_anchor, series, distance, flag."""
        out = []
        for s, a in enumerate(self.anchors):
            for i, name in enumerate(self.names):
                d = float(self.inter[s, i])
                out.append(("inter", int(a), int(a), name, d, int(d > self.delta)))
        for i, name in enumerate(self.names):
            for s, a in enumerate(self.anchors):
                for r, b in enumerate(self.anchors):
                    d = float(self.intra[i, s, r])
                    out.append(("intra", int(a), int(b), name, d, int(d > self.delta)))
        return out

    def write_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "anchor", "other_anchor", "series", "distance", "flag"])
            for kind, a, b, name, d, f in self.rows():
                w.writerow([kind, a, b, name, repr(d), f])

    def summary(self):
        S = len(self.anchors)
        n_inter = int(self.inter_flags.sum())
        off_diag = ~np.eye(S, dtype=bool)
        n_intra = int((self.intra_flags & off_diag).sum())
        lines = [
            f"shift report: N={len(self.names)} series, {S} anchors, L={self.L}, H={self.H}",
            f"distance: {'symmetric ' if self.symmetric else ''}Gaussian KL on (mean, std); delta={self.delta}",
            f"inter-space flags: {n_inter} of {self.inter.size}",
            f"intra-space flags: {n_intra} of {len(self.names) * S * (S - 1)} (off-diagonal pairs)",
            f"max inter distance: {float(self.inter.max()):.6g}",
            f"max intra distance: {float(self.intra.max()):.6g}",
        ]
        if self.change_points:
            lines.append(f"known change points: {self.change_points}")
        flagged = self.flagged_inter_anchors()
        if flagged:
            lines.append(f"flagged inter anchors: {flagged[0]}..{flagged[-1]} ({len(flagged)} anchors)")
        return "\n".join(lines) + "\n"


def _pick_anchors(T, L, H, sample_anchors):
    lo, hi = L, T - H
    if isinstance(sample_anchors, (int, np.integer)):
        if sample_anchors < 2:
            raise ContractError("shift_scan needs at least 2 sampled anchors")
        return np.unique(np.linspace(lo, hi, int(sample_anchors)).round().astype(int))
    anchors = np.asarray(list(sample_anchors), dtype=int)
    if anchors.size < 2:
        raise ContractError("shift_scan needs at least 2 sampled anchors")
    if anchors.min() < lo or anchors.max() > hi:
        raise ContractError(f"anchors must lie in [{lo}, {hi}] for T={T}, L={L}, H={H}")
    return anchors


def shift_scan(frame: SeriesFrame, L, H, delta=0.1, sample_anchors: int | Sequence[int] = 32,
               symmetric=False):
    """Intra- and inter-space distances at sampled anchors.

    An anchor ``t`` is the first horizon index: its lookback covers
    ``[t-L, t)`` and its horizon ``[t, t+H)``.
    """
    X, Y, all_anchors = window_arrays(frame, L, H)
    anchors = _pick_anchors(frame.T, L, H, sample_anchors)
    rows = anchors - L
    lb = WindowStats.of(X[rows], axis=1)   # (S, N)
    hz = WindowStats.of(Y[rows], axis=1)
    dist = symmetric_kl if symmetric else gaussian_kl
    inter = np.asarray(dist(lb, hz)).reshape(len(anchors), frame.N)
    a = WindowStats(lb.mean.T[:, :, None], lb.std.T[:, :, None])   # (N, S, 1)
    b = WindowStats(lb.mean.T[:, None, :], lb.std.T[:, None, :])   # (N, 1, S)
    intra = np.asarray(dist(a, b))
    return ShiftReport(frame.names, anchors, intra, inter, float(delta), L, H, symmetric,
                       list(frame.meta.get("change_points", [])))


# -- metrics ---------------------------------------------------------------------

class Metrics(NamedTuple):
    mse: float
    mae: float
    scaled_mse: float
    scaled_mae: float


def eval_metrics(forecasts, targets, scale_mse=1.0, scale_mae=1.0) -> Metrics:
    """MSE/MAE over all elements plus copies multiplied by reporting factors."""
    f = np.asarray(forecasts, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if f.shape != t.shape:
        raise ShapeError("eval_metrics", f.shape, t.shape)
    if f.size == 0:
        raise ContractError("eval_metrics needs at least one element")
    err = f - t
    mse = float(np.mean(err ** 2))
    mae = float(np.mean(np.abs(err)))
    return Metrics(mse, mae, mse * scale_mse, mae * scale_mae)


def per_series_metrics(forecasts, targets, scale_mse=1.0, scale_mae=1.0):
    """One :class:`Metrics` per series (last axis)."""
    f = np.asarray(forecasts, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if f.shape != t.shape:
        raise ShapeError("per_series_metrics", f.shape, t.shape)
    return [eval_metrics(f[..., i], t[..., i], scale_mse, scale_mae) for i in range(f.shape[-1])]


def mean_level_gap(hori_levels, targets):
    """Mean ``|hori level - horizon mean|`` over windows and series.

    ``hori_levels`` is ``(B, N)``, ``targets`` is ``(B, H, N)``.
    """
    return float(np.mean(np.abs(np.asarray(hori_levels) - np.asarray(targets).mean(axis=1))))

"""Series ingestion, windowing, chronological splits and synthetic shifted data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import ConfigError, ContractError, InputError, InsufficientLengthError


@dataclass(frozen=True)
class SeriesFrame:
    """``T x N`` matrix of observations with one name per column."""

    names: tuple
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2:
            raise InputError(f"series values must be T x N, got shape {vals.shape}")
        if len(self.names) != vals.shape[1]:
            raise InputError(f"{len(self.names)} names for {vals.shape[1]} series")
        if not np.all(np.isfinite(vals)):
            r, c = np.argwhere(~np.isfinite(vals))[0]
            raise InputError(f"nonfinite value at row {r}, column {self.names[c]!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", vals)

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def N(self):
        return self.values.shape[1]

    def slice(self, start, stop):
        meta = dict(self.meta, offset=self.meta.get("offset", 0) + start)
        return SeriesFrame(self.names, self.values[start:stop], meta)


@dataclass(frozen=True)
class WindowPair:
    lookback: np.ndarray  # L x N
    horizon: np.ndarray   # H x N
    anchor_t: int         # index of the first horizon row in the source frame


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple = (7.0, 1.0, 2.0)

    def __post_init__(self):
        r = tuple(float(x) for x in self.ratios)
        if len(r) != 3 or any(x < 0 or not math.isfinite(x) for x in r) or sum(r) <= 0:
            raise ConfigError(f"split ratios must be three non-negative weights with a positive sum, got {self.ratios}")
        object.__setattr__(self, "ratios", r)

    @classmethod
    def parse(cls, text):
        """Accept ``"7:1:2"`` or ``"0.7,0.1,0.2"``."""
        parts = str(text).replace(",", ":").split(":")
        try:
            return cls(tuple(float(p) for p in parts))
        except ValueError:
            raise ConfigError(f"cannot parse split ratios {text!r}") from None


# -- CSV ---------------------------------------------------------------------

def load_csv(path, timestamp_column=False, drop_timestamp=True):
    """Read a header-first numeric CSV into a :class:`SeriesFrame`.

    No normalization is applied. When ``timestamp_column`` is set the first
    column is treated as a timestamp and skipped if ``drop_timestamp``.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such CSV file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    skip = 1 if timestamp_column and drop_timestamp else 0
    if timestamp_column and not drop_timestamp:
        raise ConfigError("timestamp columns cannot be kept as numeric series")
    names = [h.strip() for h in header[skip:]]
    values = np.empty((len(body), len(names)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {r} has {len(row)} fields, header has {len(header)}")
        for c, cell in enumerate(row[skip:]):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not cell.strip() or not math.isfinite(v):
                raise InputError(f"{path}: unparseable cell {cell!r} at row {r}, column {names[c]!r}")
            values[r - 2, c] = v
    return SeriesFrame(names, values, {"source": str(path)})


def save_csv(frame: SeriesFrame, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(frame.names)
        for row in frame.values:
            w.writerow([repr(float(v)) for v in row])


# -- windows -----------------------------------------------------------------

def _check_lengths(T, L, H, stride=1):
    if L < 1 or H < 1 or stride < 1:
        raise ContractError(f"window lengths must be positive (L={L}, H={H}, stride={stride})")
    if T < L + H:
        raise InsufficientLengthError(T, L, H)


def window_count(T, L, H, stride=1):
    _check_lengths(T, L, H, stride)
    return (T - L - H) // stride + 1


def window_arrays(frame: SeriesFrame, L, H, stride=1):
    """Stacked windows: ``(X[W, L, N], Y[W, H, N], anchors[W])``."""
    count = window_count(frame.T, L, H, stride)
    anchors = L + stride * np.arange(count)
    v = frame.values
    idx_x = anchors[:, None] + np.arange(-L, 0)[None, :]
    idx_y = anchors[:, None] + np.arange(H)[None, :]
    return v[idx_x], v[idx_y], anchors


def make_windows(frame: SeriesFrame, L, H, stride=1):
    X, Y, anchors = window_arrays(frame, L, H, stride)
    return [WindowPair(x, y, int(a)) for x, y, a in zip(X, Y, anchors)]


@dataclass
class WindowDataset:
    """Dense stack of windows used by training and evaluation."""

    X: np.ndarray
    Y: np.ndarray
    anchors: np.ndarray

    def __len__(self):
        return len(self.X)

    @classmethod
    def from_frame(cls, frame, L, H, stride=1):
        return cls(*window_arrays(frame, L, H, stride))

    @property
    def L(self):
        return self.X.shape[1]

    @property
    def H(self):
        return self.Y.shape[1]


def chrono_split(frame: SeriesFrame, spec: SplitSpec | Sequence[float]):
    """Contiguous train/val/test partitions in time order.

    Rounding remainders go to train. Windowing is applied per partition
    afterwards, so no window ever crosses a boundary.
    """
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(tuple(spec))
    total = sum(spec.ratios)
    T = frame.T
    # guard against 0.1*T landing just under an integer
    n_val = int(math.floor(T * spec.ratios[1] / total + 1e-9))
    n_test = int(math.floor(T * spec.ratios[2] / total + 1e-9))
    n_train = T - n_val - n_test
    cuts = (0, n_train, n_train + n_val, T)
    return tuple(frame.slice(cuts[i], cuts[i + 1]) for i in range(3))


def split_datasets(frame, spec, L, H, stride=1, need=(True, True, True)):
    """Split then window each part; raise if a required part is too short."""
    parts = chrono_split(frame, spec)
    out = []
    for name, part, required in zip(("train", "val", "test"), parts, need):
        if part.T < L + H:
            if required:
                raise InputError(f"{name} partition has {part.T} rows, needs at least L+H={L + H}")
            out.append(None)
            continue
        out.append(WindowDataset.from_frame(part, L, H, stride))
    return tuple(out)


# -- synthetic data ------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    length: int
    level: float = 0.0
    scale: float = 1.0
    ar: float = 0.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Piecewise AR(1) series.

    Each segment sets a level offset, a multiplier on the innovation scale and
    an AR(1) coefficient. Segment lengths are rescaled to sum to ``T`` when
    they do not already. ``series_offsets`` adds a fixed per-series level.
    """

    T: int
    N: int
    seed: int
    segments: tuple
    noise: float = 1.0
    series_offsets: tuple = ()
    level_jitter: float = 0.0

    def __post_init__(self):
        if not self.segments:
            raise ContractError("synthetic spec needs at least one segment")
        if self.T < 1 or self.N < 1:
            raise ConfigError(f"T and N must be positive (T={self.T}, N={self.N})")
        if self.series_offsets and len(self.series_offsets) != self.N:
            raise ConfigError("series_offsets must list one value per series")
        segs = tuple(s if isinstance(s, Segment) else Segment(**s) for s in self.segments)
        object.__setattr__(self, "segments", segs)

    def boundaries(self):
        lengths = np.array([s.length for s in self.segments], dtype=float)
        if lengths.sum() != self.T:
            lengths = np.floor(lengths / lengths.sum() * self.T)
            lengths[-1] = self.T - lengths[:-1].sum()
        return np.concatenate([[0], np.cumsum(lengths)]).astype(int)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        try:
            segs = tuple(Segment(**s) for s in d.pop("segments"))
            if "series_offsets" in d:
                d["series_offsets"] = tuple(float(x) for x in d["series_offsets"])
            return cls(segments=segs, **d)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad synthetic spec: {exc}") from None

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise InputError(f"no such synthetic spec: {path}")
        return cls.from_dict(yaml.safe_load(path.read_text(encoding="utf-8")))

    def to_dict(self):
        return {
            "T": self.T, "N": self.N, "seed": self.seed, "noise": self.noise,
            "series_offsets": list(self.series_offsets), "level_jitter": self.level_jitter,
            "segments": [vars(s).copy() for s in self.segments],
        }


def gen_synthetic(spec: SyntheticSpec) -> SeriesFrame:
    """Generate a deterministic piecewise-AR(1) frame.

    Within segment ``k`` each series follows
    ``x_t = level_k + offset_i + e_t`` with
    ``e_t = ar_k * e_{t-1} + noise * scale_k * z_t``. The AR state carries over
    segment boundaries so only the level/scale/coefficient jump.
    """
    rng = np.random.default_rng(spec.seed)
    bounds = spec.boundaries()
    z = rng.standard_normal((spec.T, spec.N))
    offsets = np.asarray(spec.series_offsets or np.zeros(spec.N), dtype=float)
    jitter = spec.level_jitter * rng.standard_normal((len(spec.segments), spec.N))
    values = np.empty((spec.T, spec.N))
    e = np.zeros(spec.N)
    for k, seg in enumerate(spec.segments):
        for t in range(bounds[k], bounds[k + 1]):
            e = seg.ar * e + spec.noise * seg.scale * z[t]
            values[t] = seg.level + offsets + jitter[k] + e
    names = tuple(f"s{i}" for i in range(spec.N))
    meta = {"synthetic": spec.to_dict(), "change_points": [int(b) for b in bounds[1:-1]]}
    return SeriesFrame(names, values, meta)

"""Dual coefficient-network normalization for time-series forecasting."""

from .backbone import IdentityBackbone, LinearBackbone, MLPBackbone, backbone_forward, make_backbone
from .conet import EPS_FLOOR, DistCoeffs, DualConet, LinearConet, conet_forward, dual_forward, init_params
from .data import (
    Segment,
    SeriesFrame,
    SplitSpec,
    SyntheticSpec,
    WindowDataset,
    WindowPair,
    chrono_split,
    gen_synthetic,
    load_csv,
    make_windows,
)
from .diagnostics import ShiftReport, WindowStats, eval_metrics, gaussian_kl, shift_scan
from .pipeline import DishModel, build_model, denormalize, dish_forward, normalize
from .training import AdamState, TrainConfig, adam_step, dish_loss, guidance_term, train

__version__ = "0.1.0"

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from dishts.data import Segment, SeriesFrame, SyntheticSpec, gen_synthetic
from dishts.diagnostics import (
    WindowStats,
    eval_metrics,
    gaussian_kl,
    mean_level_gap,
    per_series_metrics,
    shift_scan,
    symmetric_kl,
)
from dishts.errors import ContractError, ShapeError


def kl_by_quadrature(m1, s1, m2, s2):
    p, q = stats.norm(m1, s1), stats.norm(m2, s2)
    f = lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x))  # noqa: E731
    val, _ = integrate.quad(f, m1 - 40 * s1, m1 + 40 * s1, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def ws(m, s):
    return WindowStats(np.float64(m), np.float64(s))


def test_kl_hand_values():
    assert gaussian_kl(ws(1, 1), ws(1, 1)) == 0.0
    assert abs(gaussian_kl(ws(0, 1), ws(1, 1)) - 0.5) < 1e-9
    expected = math.log(2) + 1 / 8 - 1 / 2
    assert abs(gaussian_kl(ws(0, 1), ws(0, 2)) - expected) < 1e-9
    assert expected == pytest.approx(0.31815, abs=5e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.3, 3), st.floats(-3, 3), st.floats(0.3, 3))
def test_kl_matches_quadrature(m1, s1, m2, s2):
    assert gaussian_kl(ws(m1, s1), ws(m2, s2)) == pytest.approx(kl_by_quadrature(m1, s1, m2, s2),
                                                                abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0, 1e3), st.floats(-1e3, 1e3), st.floats(0, 1e3))
def test_kl_nonnegative_and_reflexive(m1, s1, m2, s2):
    assert gaussian_kl(ws(m1, s1), ws(m2, s2)) >= 0
    assert gaussian_kl(ws(m1, s1), ws(m1, s1)) == 0
    a, b = ws(m1, s1), ws(m2, s2)
    assert symmetric_kl(a, b) == symmetric_kl(b, a)


def test_window_stats_floor():
    s = WindowStats.of(np.ones((5, 2)))
    np.testing.assert_array_equal(s.mean, [1, 1])
    np.testing.assert_array_equal(s.std, [1e-8, 1e-8])


def test_constant_series_has_no_flags():
    f = SeriesFrame(("a", "b"), np.full((300, 2), 7.0))
    rep = shift_scan(f, 24, 12, delta=0.1, sample_anchors=16)
    assert rep.inter.max() == 0 and rep.intra.max() == 0
    assert not rep.inter_flags.any() and not rep.intra_flags.any()


def jump_frame(seed=0, T=4000, cp=2000):
    spec = SyntheticSpec(T=T, N=1, seed=seed, noise=1.0,
                         segments=(Segment(cp, 0.0, 1.0, 0.0), Segment(T - cp, 5.0, 1.0, 0.0)))
    return gen_synthetic(spec)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_level_jump_flags_sit_at_the_change_point(seed):
    L = H = 256
    f = jump_frame(seed)
    cp = f.meta["change_points"][0]
    rep = shift_scan(f, L, H, delta=0.1, sample_anchors=list(range(L, f.T - H + 1, 16)))
    flagged = rep.flagged_inter_anchors()
    assert flagged, "the straddling anchors must be flagged"
    assert all(abs(t - cp) <= L + H for t in flagged)
    # an anchor exactly at the change point has lookback before and horizon after it
    assert cp in flagged


def test_intra_is_reflexive_and_flags_cross_segment_pairs():
    f = jump_frame()
    rep = shift_scan(f, 200, 100, sample_anchors=[400, 800, 3000, 3500])
    assert np.all(np.diagonal(rep.intra, axis1=1, axis2=2) == 0)
    assert rep.intra_flags[0, 0, 2] and not rep.intra_flags[0, 0, 1]


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 5), st.floats(0, 5))
def test_flags_monotone_in_delta(d1, d2):
    lo, hi = sorted((d1, d2))
    rep = shift_scan(jump_frame(), 128, 64, delta=lo, sample_anchors=24)
    high = rep.with_delta(hi)
    assert not (high.inter_flags & ~rep.inter_flags).any()
    assert not (high.intra_flags & ~rep.intra_flags).any()


def test_infinite_delta_never_flags():
    rep = shift_scan(jump_frame(), 128, 64, delta=math.inf, sample_anchors=24)
    assert not rep.inter_flags.any() and not rep.intra_flags.any()


def test_scan_needs_two_anchors():
    with pytest.raises(ContractError):
        shift_scan(jump_frame(), 128, 64, sample_anchors=1)
    with pytest.raises(ContractError):
        shift_scan(jump_frame(), 128, 64, sample_anchors=[10, 500])


def test_report_csv_and_summary(tmp_path):
    rep = shift_scan(jump_frame(), 128, 64, sample_anchors=8)
    p = tmp_path / "r.csv"
    rep.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "kind,anchor,other_anchor,series,distance,flag"
    assert len(lines) == 1 + 8 + 8 * 8
    assert "known change points: [2000]" in rep.summary()


def test_metrics_examples():
    assert eval_metrics([1.0, 2.0], [1.0, 2.0]) == (0, 0, 0, 0)
    m = eval_metrics([1.0, 2.0], [2.0, 4.0], scale_mse=1e-1)
    assert (m.mse, m.mae) == (2.5, 1.5)
    assert m.scaled_mse == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ContractError):
        eval_metrics([], [])
    with pytest.raises(ShapeError):
        eval_metrics([1.0], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_metrics_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    f, t = rng.standard_normal(30), rng.standard_normal(30)
    perm = rng.permutation(30)
    a, b = eval_metrics(f, t), eval_metrics(f[perm], t[perm])
    assert a.mse == pytest.approx(b.mse, rel=1e-14) and a.mae == pytest.approx(b.mae, rel=1e-14)


def test_per_series_and_level_gap():
    f = np.zeros((2, 3, 2))
    t = np.stack([np.ones((2, 3)), 2 * np.ones((2, 3))], axis=-1)
    ps = per_series_metrics(f, t)
    assert [m.mse for m in ps] == [1.0, 4.0]
    assert mean_level_gap(np.zeros((2, 2)), t) == 1.5

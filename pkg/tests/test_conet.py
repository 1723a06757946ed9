import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dishts import ndcore as nd
from dishts.conet import (
    EPS_FLOOR,
    DualConet,
    LinearConet,
    conet_forward,
    dual_forward,
    init_params,
)
from dishts.errors import ConfigError, ShapeError


def conet_with(v):
    v = np.atleast_2d(np.asarray(v, dtype=float))
    c = LinearConet(v.shape[0], v.shape[1])
    c.v.data[...] = v
    return c


def hand_coeffs(x, v, slope=0.01):
    """Plain-python level and scale for one series."""
    pre = sum(a * b for a, b in zip(x, v))
    level = pre if pre >= 0 else slope * pre
    scale = math.sqrt(sum((xi - level) ** 2 for xi in x) / len(x))
    return level, max(scale, EPS_FLOOR)


def test_zero_window():
    c = conet_with(np.random.default_rng(0).standard_normal(3))
    level, scale = conet_forward(c, np.zeros((3, 1))).numpy()
    assert level[0] == 0.0 and scale[0] == EPS_FLOOR


def test_avg_worked_example():
    level, scale = conet_forward(conet_with([1 / 3] * 3), [[1.0], [2.0], [3.0]]).numpy()
    assert abs(level[0] - 2.0) < 1e-12
    assert abs(scale[0] - math.sqrt(2 / 3)) < 1e-12
    assert scale[0] == pytest.approx(0.81650, abs=5e-6)


def test_leaky_branch_worked_example():
    level, scale = conet_forward(conet_with([-1 / 3] * 3), [[1.0], [2.0], [3.0]]).numpy()
    assert abs(level[0] + 0.02) < 1e-12
    expected = math.sqrt((1.02 ** 2 + 2.02 ** 2 + 3.02 ** 2) / 3)
    assert abs(scale[0] - expected) < 1e-12
    assert expected == pytest.approx(2.1787764150244207, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5),
       st.lists(st.floats(-1, 1), min_size=5, max_size=5))
def test_matches_plain_python(x, v):
    level, scale = conet_forward(conet_with(v), np.array(x)[:, None]).numpy()
    hl, hs = hand_coeffs(x, v)
    assert level[0] == pytest.approx(hl, abs=1e-9)
    assert scale[0] == pytest.approx(hs, rel=1e-9, abs=1e-9)
    assert scale[0] >= EPS_FLOOR


def test_init_strategies():
    np.testing.assert_array_equal(init_params(2, 4, "avg"), np.full((2, 4), 0.25))
    a = init_params(3, 5, "uniform", seed=11)
    np.testing.assert_array_equal(a, init_params(3, 5, "uniform", seed=11))
    assert a.min() >= 0 and a.max() < 1
    assert init_params(2, 3, "norm", seed=1).shape == (2, 3)
    big = init_params(100, 1000, "norm", seed=2)
    assert abs(big.mean()) < 0.01 and abs(big.std() - 1) < 0.01
    with pytest.raises(ConfigError):
        init_params(2, 3, "ones")


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        conet_forward(LinearConet(2, 4), np.zeros((5, 2)))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 100), min_size=8, max_size=8))
def test_mean_recovery_with_avg_init(x):
    x = np.array(x)
    level, scale = conet_forward(LinearConet(1, 8, init="avg"), x[:, None]).numpy()
    assert abs(level[0] - x.mean()) < 1e-10
    assert abs(scale[0] - max(x.std(), EPS_FLOOR)) < 1e-10


def test_per_series_independence():
    rng = np.random.default_rng(3)
    c = LinearConet(3, 6, init="norm", seed=4)
    x = rng.standard_normal((6, 3)) + 5
    base = conet_forward(c, x).numpy()
    y = x.copy()
    y[:, 1] += rng.standard_normal(6) * 10
    moved = conet_forward(c, y).numpy()
    for b, m in zip(base, moved):
        np.testing.assert_array_equal(b[[0, 2]], m[[0, 2]])
        assert b[1] != m[1]


def test_scale_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    c = LinearConet(2, 6, init="uniform", seed=6)
    x = rng.standard_normal((6, 2)) + 2

    def scale_sum():
        return float(conet_forward(c, x).scale.data.sum())

    c.v.zero_grad()
    with nd.GradTape() as tape:
        loss = nd.sum_(conet_forward(c, x).scale)
    (g,) = nd.backward(tape, loss, [c.v])
    num = nd.numerical_gradient(scale_sum, c.v)
    assert np.abs(g).max() > 1e-3
    assert nd.relative_error(g, num) < 1e-6


def test_batched_matches_single():
    rng = np.random.default_rng(7)
    c = LinearConet(2, 5, init="norm", seed=1)
    X = rng.standard_normal((4, 5, 2))
    lv, sc = conet_forward(c, X).numpy()
    for b in range(4):
        l1, s1 = conet_forward(c, X[b]).numpy()
        np.testing.assert_allclose(lv[b], l1, rtol=0, atol=1e-14)
        np.testing.assert_allclose(sc[b], s1, rtol=0, atol=1e-14)


def test_dual_forward():
    d = DualConet.create(1, 3, init="avg")
    back, hori = dual_forward(d, [[1.0], [2.0], [3.0]])
    for c in (back, hori):
        lv, sc = c.numpy()
        assert abs(lv[0] - 2) < 1e-12 and abs(sc[0] - math.sqrt(2 / 3)) < 1e-12
    back, hori = dual_forward(d, np.zeros((3, 1)))
    assert back.numpy() == hori.numpy() == (np.array([0.0]), np.array([EPS_FLOOR]))


def test_dual_with_identical_params_gives_identical_pairs():
    d = DualConet.create(2, 4, init="norm", seed=3)
    d.hori.v.data[...] = d.back.v.data
    x = np.random.default_rng(0).standard_normal((4, 2))
    back, hori = dual_forward(d, x)
    for a, b in zip(back.numpy(), hori.numpy()):
        np.testing.assert_array_equal(a, b)


def test_dual_parameters_are_disjoint():
    d = DualConet.create(2, 4, init="norm", seed=3)
    assert set(d.parameters()) == {"back.v", "hori.v"}
    assert not np.array_equal(d.back.v.data, d.hori.v.data)
    with pytest.raises(ConfigError):
        DualConet(d.back, d.back)

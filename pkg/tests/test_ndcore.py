import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dishts import ndcore as nd
from dishts.errors import ContractError, NumericError, ShapeError


def fd_scalar(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_leaky_relu_examples():
    assert nd.leaky_relu(-1.0, 0.01).item() == pytest.approx(-0.01, abs=1e-15)
    assert nd.leaky_relu(2.0, 0.01).item() == 2.0


def test_mean_example():
    assert nd.mean([1.0, 2.0, 3.0]).item() == 2.0


def test_linear_map_gradient():
    v = nd.Tensor([0.3, -0.2, 0.9], requires_grad=True)
    with nd.GradTape() as tape:
        loss = nd.sum_(nd.mul(v, [1.0, 2.0, 3.0]))
    (g,) = nd.backward(tape, loss)
    np.testing.assert_array_equal(g, [1.0, 2.0, 3.0])


def test_power_rule():
    v = nd.Tensor(3.0, requires_grad=True)
    with nd.GradTape() as tape:
        loss = nd.square(v)
    nd.backward(tape, loss)
    assert v.grad == 6.0


def test_rms_deviation_gradient_wrt_level_is_zero_at_mean():
    x = np.array([1.0, 2.0, 3.0])
    phi = nd.Tensor(2.0, requires_grad=True)

    def f(p):
        return math.sqrt(np.mean((x - p) ** 2))

    with nd.GradTape() as tape:
        loss = nd.sqrt(nd.mean(nd.square(nd.sub(x, phi))))
    nd.backward(tape, loss)
    expected = fd_scalar(f, 2.0)
    assert abs(expected) < 1e-9
    assert phi.grad == pytest.approx(expected, abs=1e-9)


def test_unreached_param_gets_exact_zero():
    a = nd.Tensor([1.0, 2.0], requires_grad=True)
    b = nd.Tensor([5.0], requires_grad=True)
    with nd.GradTape() as tape:
        loss = nd.sum_(nd.square(a))
        nd.mul(b, 3.0)  # recorded but not on the loss path
    ga, gb = nd.backward(tape, loss, [a, b])
    np.testing.assert_array_equal(gb, [0.0])
    np.testing.assert_array_equal(b.grad, [0.0])
    np.testing.assert_array_equal(ga, [2.0, 4.0])


def test_backward_accumulates_until_reset():
    v = nd.Tensor([1.0, -1.0], requires_grad=True)
    with nd.GradTape() as tape:
        loss = nd.sum_(nd.mul(v, [2.0, 3.0]))
    nd.backward(tape, loss)
    nd.backward(tape, loss)
    np.testing.assert_array_equal(v.grad, [4.0, 6.0])
    v.zero_grad()
    nd.backward(tape, loss)
    np.testing.assert_array_equal(v.grad, [2.0, 3.0])


def test_reused_intermediate_sums_both_paths():
    v = nd.Tensor(1.5, requires_grad=True)
    with nd.GradTape() as tape:
        s = nd.square(v)
        loss = nd.add(nd.mul(s, 2.0), s)   # 3 v^2
    nd.backward(tape, loss)
    assert v.grad == pytest.approx(9.0)


def test_nonscalar_loss_rejected():
    v = nd.Tensor([1.0, 2.0], requires_grad=True)
    with nd.GradTape() as tape:
        y = nd.square(v)
    with pytest.raises(ContractError):
        nd.backward(tape, y)


def test_shape_error_names_op_and_shapes():
    with pytest.raises(ShapeError) as ei:
        nd.add(np.zeros((2, 3)), np.zeros((4,)))
    assert "add" in str(ei.value) and "(2, 3)" in str(ei.value) and "(4,)" in str(ei.value)
    with pytest.raises(ShapeError):
        nd.matvec(np.zeros((2, 3)), np.zeros(4))


def test_nonfinite_results_raise():
    with pytest.raises(NumericError):
        nd.div(1.0, 0.0)
    with pytest.raises(NumericError):
        nd.sqrt(-1.0)
    with pytest.raises(NumericError), np.errstate(over="ignore"):
        nd.mul(1e300, 1e300)


def test_untracked_ops_do_not_touch_tape():
    with nd.GradTape() as tape:
        nd.add([1.0], [2.0])
    assert tape.nodes == []


def test_sqrt_gradient_at_zero_is_floored():
    v = nd.Tensor([0.0], requires_grad=True)
    with nd.GradTape() as tape:
        loss = nd.sum_(nd.sqrt(v))
    nd.backward(tape, loss)
    assert np.isfinite(v.grad).all()
    assert v.grad[0] == pytest.approx(0.5 / nd.EPS_FLOOR)


# --- every primitive against central differences -------------------------------

SHAPE = (2, 3)


def _unary_cases():
    return {
        "square": lambda t: nd.square(t),
        "sqrt": lambda t: nd.sqrt(nd.add(nd.square(t), 0.5)),
        "leaky_relu": lambda t: nd.leaky_relu(t, 0.1),
        "sum_axis": lambda t: nd.sum_(t, axis=1),
        "mean_axis": lambda t: nd.mean(t, axis=0, keepdims=True),
        "reshape": lambda t: nd.reshape(t, (3, 2)),
        "transpose": lambda t: nd.transpose(t, (1, 0)),
        "take": lambda t: nd.take(t, (Ellipsis, slice(1, 3))),
        "clamp_min": lambda t: nd.clamp_min(t, 0.05),
    }


def _binary_cases():
    return {
        "add": lambda a, b: nd.add(a, b),
        "sub": lambda a, b: nd.sub(a, b),
        "mul": lambda a, b: nd.mul(a, b),
        "div": lambda a, b: nd.div(a, nd.add(nd.square(b), 1.0)),
        "matvec": lambda a, b: nd.matvec(nd.reshape(a, (1, 2, 3)), b),
        "broadcast_add": lambda a, b: nd.add(a, nd.take(b, (slice(0, 1), Ellipsis))),
    }


def _check(build, tensors, weights):
    def loss_value():
        return float((build(*tensors).data * weights).sum())

    for t in tensors:
        t.zero_grad()
    with nd.GradTape() as tape:
        out = build(*tensors)
        loss = nd.sum_(nd.mul(out, weights))
    grads = nd.backward(tape, loss, list(tensors))
    for t, g in zip(tensors, grads):
        num = nd.numerical_gradient(loss_value, t, 1e-6)
        # entries below 1e-4 are judged on absolute error (FD roundoff ~1e-10)
        assert nd.relative_error(g, num, floor=1e-4) < 1e-4


arrays = st.lists(st.floats(-2, 2, allow_nan=False), min_size=6, max_size=6)


@pytest.mark.parametrize("name", sorted(_unary_cases()))
@settings(max_examples=100, deadline=None)
@given(vals=arrays)
def test_unary_primitive_gradients(name, vals):
    x = np.array(vals).reshape(SHAPE)
    # keep away from the kinks of leaky_relu/clamp_min where FD is undefined
    x = np.where(np.abs(x) < 1e-3, 1e-3, x)
    x = np.where(np.abs(x - 0.05) < 1e-3, 0.052, x)
    build = _unary_cases()[name]
    t = nd.Tensor(x, requires_grad=True)
    weights = np.linspace(0.5, 1.5, build(t).size).reshape(build(t).shape)
    _check(build, [t], weights)


@pytest.mark.parametrize("name", sorted(_binary_cases()))
@settings(max_examples=100, deadline=None)
@given(a=arrays, b=arrays)
def test_binary_primitive_gradients(name, a, b):
    build = _binary_cases()[name]
    ta = nd.Tensor(np.reshape(a, SHAPE), requires_grad=True)
    tb = nd.Tensor(np.reshape(b, SHAPE), requires_grad=True)
    out = build(ta, tb)
    weights = np.linspace(-1.0, 1.0, out.size).reshape(out.shape) + 0.1
    _check(build, [ta, tb], weights)

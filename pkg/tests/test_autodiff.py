import numpy as np
import pytest

from src.autodiff import ops
from src.autodiff.gradcheck import gradcheck
from src.autodiff.nn import Module, parameter_checksum
from src.autodiff.node import Node, backward, constant, no_grad, parameter
from src.autodiff.optim import Adam, AdamState, adam_update
from src.errors import NumericError, ShapeError
from src.storage.checkpoints import decode_container, encode_container

INSTANCES = 10


def _away_from_zero(rng, shape, low=0.1):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, size=shape)


def _weighted(out, rng):
    """Scalarize with fixed random weights so every output entry matters."""
    weights = constant(rng.uniform(-1.0, 1.0, size=out.shape))
    return ops.sum_all(ops.mul(out, weights))


def _case(name, rng):
    """(fn, inputs) for one random instance of the named op."""
    w_seed = int(rng.integers(1 << 30))

    def scalar(out):
        return _weighted(out, np.random.default_rng(w_seed))

    if name == "add":
        return (lambda a, b: scalar(ops.add(a, b))), [rng.normal(size=(3, 4)), rng.normal(size=(4,))]
    if name == "sub":
        return (lambda a, b: scalar(ops.sub(a, b))), [rng.normal(size=(3, 4)), rng.normal(size=(3, 1))]
    if name == "mul":
        return (lambda a, b: scalar(ops.mul(a, b))), [rng.normal(size=(2, 3)), rng.normal(size=(2, 3))]
    if name == "relu":
        return (lambda a: scalar(ops.relu(a))), [_away_from_zero(rng, (3, 4))]
    if name == "sigmoid":
        return (lambda a: scalar(ops.sigmoid(a))), [rng.normal(size=(3, 4))]
    if name == "tanh":
        return (lambda a: scalar(ops.tanh(a))), [rng.normal(size=(3, 4))]
    if name == "mean":
        return (lambda a: ops.mean(ops.mul(a, a))), [rng.normal(size=(2, 5))]
    if name == "reshape":
        return (lambda a: scalar(ops.reshape(a, (6, 2)))), [rng.normal(size=(3, 4))]
    if name == "concat":
        return (lambda a, b: scalar(ops.concat([a, b], axis=1))), [rng.normal(size=(2, 2, 3)), rng.normal(size=(2, 1, 3))]
    if name == "slice_cols":
        return (lambda a: scalar(ops.slice_cols(a, 1, 4))), [rng.normal(size=(2, 5))]
    if name == "matmul":
        return (lambda a, b: scalar(ops.matmul(a, b))), [rng.normal(size=(2, 3)), rng.normal(size=(3, 4))]
    if name == "dense":
        return (lambda x, w, b: scalar(ops.dense(x, w, b))), [rng.normal(size=(2, 3)), rng.normal(size=(3, 2)), rng.normal(size=(2,))]
    if name == "broadcast_spatial":
        return (lambda v: scalar(ops.broadcast_spatial(v, 3, 2))), [rng.normal(size=(2, 3))]
    if name == "upsample2x":
        return (lambda x: scalar(ops.upsample2x(x))), [rng.normal(size=(1, 2, 2, 3))]
    if name == "conv2d":
        stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 2))
        return (
            lambda x, k, b: scalar(ops.conv2d(x, k, stride=stride, padding=padding, bias=b))
        ), [rng.normal(size=(1, 2, 5, 5)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=(3,))]
    if name == "coord_augment":
        return (lambda x: scalar(ops.coord_augment(x))), [rng.normal(size=(2, 1, 3, 3))]
    if name == "pixel_max":
        a = rng.normal(size=(2, 6))
        b = a + _away_from_zero(rng, (2, 6))
        return (lambda x, y: scalar(ops.pixel_max(x, y))), [a, b]
    if name == "sse_loss":
        return (lambda p, t: ops.sse_loss(p, t)), [rng.normal(size=(2, 1, 2, 2)), rng.normal(size=(2, 1, 2, 2))]
    if name == "abs_mean":
        p = rng.normal(size=(2, 4))
        return (lambda x, t: ops.abs_mean(x, t)), [p, p + _away_from_zero(rng, (2, 4))]
    if name == "lstm_step":
        def fn(x, h, c, w_x, w_h, bias):
            h2, c2 = ops.lstm_step(x, h, c, ops.LSTMWeights(w_x=w_x, w_h=w_h, bias=bias))
            return ops.add(scalar(h2), scalar(c2))

        return fn, [
            rng.normal(size=(2, 3)),
            rng.normal(size=(2, 2)),
            rng.normal(size=(2, 2)),
            rng.normal(size=(3, 8)) * 0.5,
            rng.normal(size=(2, 8)) * 0.5,
            rng.normal(size=(8,)) * 0.1,
        ]
    raise KeyError(name)


OPS = [
    "add", "sub", "mul", "relu", "sigmoid", "tanh", "mean", "reshape", "concat", "slice_cols",
    "matmul", "dense", "broadcast_spatial", "upsample2x", "conv2d", "coord_augment", "pixel_max",
    "sse_loss", "abs_mean", "lstm_step",
]


@pytest.mark.parametrize("index, name", list(enumerate(OPS)))
def test_backward_rules_match_central_differences(index, name):
    rng = np.random.default_rng(100 + index)
    for _ in range(INSTANCES):
        fn, inputs = _case(name, rng)
        result = gradcheck(fn, inputs, h=1e-3, rtol=1e-2, atol=1e-4)
        assert result.passed, result.mismatches[:3]
        assert result.checked > 0


def test_conv2d_matches_naive_loops(rng):
    x = rng.normal(size=(2, 3, 6, 5)).astype(np.float32)
    k = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
    b = rng.normal(size=(4,)).astype(np.float32)
    out = ops.conv2d(x, k, stride=2, padding=1, bias=b).value

    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ho, wo = (6 + 2 - 3) // 2 + 1, (5 + 2 - 3) // 2 + 1
    expected = np.zeros((2, 4, ho, wo))
    for n in range(2):
        for o in range(4):
            for i in range(ho):
                for j in range(wo):
                    expected[n, o, i, j] = np.sum(xp[n, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3] * k[o]) + b[o]
    np.testing.assert_allclose(out, expected, rtol=1e-4, atol=1e-4)


def test_lstm_step_matches_gate_equations(rng):
    x, h, c = rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
    w_x, w_h, bias = rng.normal(size=(3, 16)), rng.normal(size=(4, 16)), rng.normal(size=(16,))
    weights = ops.LSTMWeights(w_x=constant(w_x), w_h=constant(w_h), bias=constant(bias))
    h2, c2 = ops.lstm_step(x, h, c, weights)

    gates = x @ w_x + h @ w_h + bias
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))  # noqa: E731
    i, f, g, o = sig(gates[:, :4]), sig(gates[:, 4:8]), np.tanh(gates[:, 8:12]), sig(gates[:, 12:])
    c_expected = f * c + i * g
    np.testing.assert_allclose(c2.value, c_expected, rtol=1e-4, atol=1e-5)
    np.testing.assert_allclose(h2.value, o * np.tanh(c_expected), rtol=1e-4, atol=1e-5)


def test_shape_errors_are_descriptive():
    with pytest.raises(ShapeError, match="matmul"):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError, match="input channels"):
        ops.conv2d(np.ones((1, 2, 4, 4)), np.ones((1, 3, 3, 3)))
    with pytest.raises(ShapeError):
        ops.pixel_max(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        ops.upsample2x(np.ones((2, 2)))


def test_non_finite_values_raise_numeric_error():
    with pytest.raises(NumericError):
        parameter(np.array([1.0, np.nan]), "w")
    with pytest.raises(NumericError):
        ops.mul(parameter(np.array([1e30]), "w"), np.array([1e30]))


def test_backward_requires_scalar_loss():
    w = parameter(np.ones((2, 2)), "w")
    with pytest.raises(ShapeError):
        backward(ops.mul(w, 2.0))


def test_gradients_accumulate_until_zeroed():
    w = parameter(np.array([1.0, 2.0]), "w")
    backward(ops.sum_all(ops.mul(w, w)))
    backward(ops.sum_all(ops.mul(w, w)))
    np.testing.assert_allclose(w.grad, [4.0, 8.0])
    w.zero_grad()
    np.testing.assert_allclose(w.grad, [0.0, 0.0])


def test_no_grad_records_no_parents():
    w = parameter(np.ones(3), "w")
    with no_grad():
        out = ops.mul(w, 3.0)
    assert out.parents == ()
    assert not out.requires_grad


def test_frozen_parameters_pass_gradients_upstream():
    module = Module()
    w = module.add_parameter("w", np.array([2.0, 3.0], dtype=np.float32))
    module.freeze()
    x = parameter(np.array([1.0, 1.0]), "x")
    backward(ops.sum_all(ops.mul(x, w)))
    np.testing.assert_allclose(x.grad, [2.0, 3.0])
    np.testing.assert_allclose(w.grad, [0.0, 0.0])


def test_parameter_checksum_tracks_values():
    module = Module()
    module.add_parameter("w", np.ones(3, dtype=np.float32))
    before = module.checksum()
    assert before == parameter_checksum(module.parameters())
    module.parameters()["w"].value[0] = 2.0
    assert module.checksum() != before


def test_adam_first_step_moves_by_learning_rate():
    w = Node(np.array([1.0, -1.0]), requires_grad=True, name="w")
    state = AdamState(lr=0.1)
    adam_update({"w": w}, {"w": np.array([0.5, -2.0], dtype=np.float32)}, state)
    # bias-corrected first step is lr * sign(g) when eps is negligible
    np.testing.assert_allclose(w.value, [0.9, -0.9], atol=1e-5)
    assert state.step == 1


def test_adam_skips_parameters_without_gradients():
    module = Module()
    a = module.add_parameter("a", np.ones(2, dtype=np.float32))
    b = module.add_parameter("b", np.ones(2, dtype=np.float32))
    b.requires_grad = False
    optimizer = Adam(module.parameters(), lr=0.01)
    assert list(optimizer.params) == ["a"]
    backward(ops.sum_all(ops.mul(a, b)))
    optimizer.step()
    assert np.all(a.value < 1.0)
    np.testing.assert_array_equal(b.value, [1.0, 1.0])


def test_adam_state_round_trips_through_arrays():
    w = Node(np.array([1.0, 2.0]), requires_grad=True, name="w")
    state = AdamState(lr=0.1)
    for _ in range(3):
        adam_update({"w": w}, {"w": np.array([0.3, -0.1], dtype=np.float32)}, state)
    restored = AdamState(lr=0.1)
    restored.load_arrays(state.to_arrays())
    assert restored.step == 3
    np.testing.assert_array_equal(restored.m["w"], state.m["w"])
    np.testing.assert_array_equal(restored.v["w"], state.v["w"])


def test_adam_minimizes_a_quadratic():
    w = Node(np.array([1.0]), requires_grad=True, name="w")
    state = AdamState(lr=0.1)
    for _ in range(100):
        adam_update({"w": w}, {"w": 2.0 * w.value}, state)
    assert abs(float(w.value[0])) < 0.1
    assert state.step == 100


def test_adam_step_survives_the_f32_container_past_2_pow_24():
    state = AdamState(step=2**24 + 3)
    restored = AdamState()
    restored.load_arrays(decode_container(encode_container(state.to_arrays())))
    assert restored.step == 2**24 + 3

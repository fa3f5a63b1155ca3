"""Differentiable operations used by the canvas and drawer networks.

Every op takes ``Node`` (or array-like constants), validates shapes, computes
its forward value with numpy and registers a backward rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.autodiff.node import Node, Tensor, as_tensor, constant, lift, make_node
from src.errors import ShapeError


def _unbroadcast(grad: Tensor, shape: Tuple[int, ...]) -> Tensor:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Node, b: Node, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


def _same_shape(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# elementwise


def add(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_shape(a, b, "add")

    def backward_fn(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(g, b.shape))

    return make_node(a.value + b.value, (a, b), backward_fn, "add")


def sub(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_shape(a, b, "sub")

    def backward_fn(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(-g, b.shape))

    return make_node(a.value - b.value, (a, b), backward_fn, "sub")


def mul(a, b) -> Node:
    a, b = lift(a), lift(b)
    _broadcast_shape(a, b, "mul")

    def backward_fn(g):
        a.accumulate(_unbroadcast(g * b.value, a.shape))
        b.accumulate(_unbroadcast(g * a.value, b.shape))

    return make_node(a.value * b.value, (a, b), backward_fn, "mul")


def relu(x) -> Node:
    x = lift(x)
    mask = x.value > 0

    def backward_fn(g):
        x.accumulate(g * mask)

    return make_node(x.value * mask, (x,), backward_fn, "relu")


def sigmoid(x) -> Node:
    x = lift(x)
    out = 0.5 * (1.0 + np.tanh(0.5 * x.value))

    def backward_fn(g):
        x.accumulate(g * out * (1.0 - out))

    return make_node(out, (x,), backward_fn, "sigmoid")


def tanh(x) -> Node:
    x = lift(x)
    out = np.tanh(x.value)

    def backward_fn(g):
        x.accumulate(g * (1.0 - out * out))

    return make_node(out, (x,), backward_fn, "tanh")


# reductions and reshaping


def sum_all(x) -> Node:
    x = lift(x)

    def backward_fn(g):
        x.accumulate(np.broadcast_to(g, x.shape).astype(x.value.dtype))

    return make_node(x.value.sum(), (x,), backward_fn, "sum_all")


def mean(x) -> Node:
    x = lift(x)
    count = x.value.size

    def backward_fn(g):
        x.accumulate(np.broadcast_to(g / count, x.shape).astype(x.value.dtype))

    return make_node(x.value.mean(), (x,), backward_fn, "mean")


def reshape(x, shape: Sequence[int]) -> Node:
    x = lift(x)
    try:
        out = x.value.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from e

    def backward_fn(g):
        x.accumulate(g.reshape(x.shape))

    return make_node(out, (x,), backward_fn, "reshape")


def concat(nodes: Sequence, axis: int = 1) -> Node:
    nodes = [lift(n) for n in nodes]
    ndim = nodes[0].value.ndim
    for n in nodes[1:]:
        if n.value.ndim != ndim or any(
            n.shape[d] != nodes[0].shape[d] for d in range(ndim) if d != axis % ndim
        ):
            raise ShapeError(f"concat: incompatible shapes {[m.shape for m in nodes]} along axis {axis}")
    out = np.concatenate([n.value for n in nodes], axis=axis)
    bounds = np.cumsum([0] + [n.shape[axis] for n in nodes])

    def backward_fn(g):
        for n, lo, hi in zip(nodes, bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            n.accumulate(g[tuple(index)])

    return make_node(out, nodes, backward_fn, "concat")


def slice_cols(x, start: int, stop: int) -> Node:
    """Columns ``start:stop`` of a 2-D node."""
    x = lift(x)
    if x.value.ndim != 2 or not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for shape {x.shape}")

    def backward_fn(g):
        full = np.zeros_like(x.value)
        full[:, start:stop] = g
        x.accumulate(full)

    return make_node(x.value[:, start:stop], (x,), backward_fn, "slice_cols")


def flatten(x) -> Node:
    x = lift(x)
    return reshape(x, (x.shape[0], -1))


# dense layers


def matmul(a, b) -> Node:
    a, b = lift(a), lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward_fn(g):
        a.accumulate(g @ b.value.T)
        b.accumulate(a.value.T @ g)

    return make_node(a.value @ b.value, (a, b), backward_fn, "matmul")


def dense(x, weight, bias=None) -> Node:
    out = matmul(x, weight)
    return add(out, bias) if bias is not None else out


# image ops


def broadcast_spatial(v, height: int, width: int) -> Node:
    """Tile a B×D vector over space into B×D×H×W."""
    v = lift(v)
    if v.value.ndim != 2:
        raise ShapeError(f"broadcast_spatial: expected B×D, got {v.shape}")
    out = np.broadcast_to(v.value[:, :, None, None], v.shape + (height, width)).copy()

    def backward_fn(g):
        v.accumulate(g.sum(axis=(2, 3)))

    return make_node(out, (v,), backward_fn, "broadcast_spatial")


def upsample2x(x) -> Node:
    x = lift(x)
    if x.value.ndim != 4:
        raise ShapeError(f"upsample2x: expected NCHW, got {x.shape}")
    out = x.value.repeat(2, axis=2).repeat(2, axis=3)
    n, c, h, w = x.shape

    def backward_fn(g):
        x.accumulate(g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))

    return make_node(out, (x,), backward_fn, "upsample2x")


def conv2d(x, kernel, stride: int = 1, padding: int = 0, bias=None) -> Node:
    """Cross-correlation of an NCHW input with an OIKK kernel."""
    x, kernel = lift(x), lift(kernel)
    if x.value.ndim != 4 or kernel.value.ndim != 4:
        raise ShapeError(f"conv2d: expected NCHW input and OIKK kernel, got {x.shape} and {kernel.shape}")
    n, c, h, w = x.shape
    o, ci, kh, kw = kernel.shape
    if ci != c:
        raise ShapeError(f"conv2d: kernel expects {ci} input channels, input has {c}")
    if stride < 1 or padding < 0:
        raise ShapeError(f"conv2d: invalid stride={stride} padding={padding}")
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < kh or wp < kw:
        raise ShapeError(f"conv2d: padded input {hp}x{wp} smaller than kernel {kh}x{kw}")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1

    xp = np.pad(x.value, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.value
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    windows = windows[:, :, :ho, :wo]
    out = np.tensordot(windows, kernel.value, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    parents = [x, kernel]
    if bias is not None:
        bias = lift(bias)
        if bias.shape != (o,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} does not match {o} output channels")
        out = out + bias.value[None, :, None, None]
        parents.append(bias)
    out = np.ascontiguousarray(out)

    def backward_fn(g):
        if kernel.requires_grad:
            kernel.accumulate(np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3])))
        if bias is not None and bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gxp = np.zeros((n, c, hp, wp), dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(g, kernel.value[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                    gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += contrib
            x.accumulate(gxp[:, :, padding : padding + h, padding : padding + w])

    return make_node(out, parents, backward_fn, "conv2d")


def coordinate_grid(height: int, width: int) -> Tuple[Tensor, Tensor]:
    """x and y coordinate planes, linspace over [-1, 1]; a size of 1 yields -1."""
    xs = np.linspace(-1.0, 1.0, width) if width > 1 else np.array([-1.0])
    ys = np.linspace(-1.0, 1.0, height) if height > 1 else np.array([-1.0])
    x_plane = np.broadcast_to(xs[None, :], (height, width))
    y_plane = np.broadcast_to(ys[:, None], (height, width))
    return as_tensor(x_plane), as_tensor(y_plane)


def coord_augment(image) -> Node:
    """Append x and y coordinate channels: B×C×H×W -> B×(C+2)×H×W."""
    image = lift(image)
    if image.value.ndim != 4:
        raise ShapeError(f"coord_augment: expected B×C×H×W, got {image.shape}")
    b, _, h, w = image.shape
    if h < 1 or w < 1:
        raise ShapeError(f"coord_augment: empty spatial dims {h}x{w}")
    x_plane, y_plane = coordinate_grid(h, w)
    coords = np.broadcast_to(np.stack([x_plane, y_plane])[None], (b, 2, h, w))
    return concat([image, constant(coords)], axis=1)


def pixel_max(a, b) -> Node:
    """Elementwise maximum; on ties the gradient goes to ``a``."""
    a, b = lift(a), lift(b)
    _same_shape(a, b, "pixel_max")
    take_a = a.value >= b.value

    def backward_fn(g):
        a.accumulate(g * take_a)
        b.accumulate(g * ~take_a)

    return make_node(np.where(take_a, a.value, b.value), (a, b), backward_fn, "pixel_max")


def sse_loss(pred, target) -> Node:
    """Sum of squared differences, averaged over the batch dimension only."""
    pred, target = lift(pred), lift(target)
    _same_shape(pred, target, "sse_loss")
    batch = pred.shape[0] if pred.value.ndim > 0 else 1
    diff = pred.value - target.value

    def backward_fn(g):
        scaled = (2.0 / batch) * g * diff
        pred.accumulate(scaled)
        target.accumulate(-scaled)

    return make_node((diff * diff).sum() / batch, (pred, target), backward_fn, "sse_loss")


def abs_mean(pred, target) -> Node:
    """Mean absolute difference over every element; the sub-gradient at 0 is 0."""
    pred, target = lift(pred), lift(target)
    _same_shape(pred, target, "abs_mean")
    diff = pred.value - target.value
    count = diff.size

    def backward_fn(g):
        scaled = (g / count) * np.sign(diff)
        pred.accumulate(scaled.astype(pred.value.dtype))
        target.accumulate(-scaled.astype(target.value.dtype))

    return make_node(np.abs(diff).mean(), (pred, target), backward_fn, "abs_mean")


# recurrent cell


@dataclass
class LSTMWeights:
    """Gate weights packed as [input | forget | candidate | output] column blocks."""

    w_x: Node  # I×4H
    w_h: Node  # H×4H
    bias: Node  # 4H

    @property
    def hidden_size(self) -> int:
        return self.w_h.shape[0]


def lstm_step(x, h, c, weights: LSTMWeights) -> Tuple[Node, Node]:
    x, h, c = lift(x), lift(h), lift(c)
    hidden = weights.hidden_size
    if weights.w_x.shape[1] != 4 * hidden or weights.w_h.shape != (hidden, 4 * hidden):
        raise ShapeError(f"lstm_step: inconsistent weights {weights.w_x.shape}, {weights.w_h.shape}")
    if x.value.ndim != 2 or x.shape[1] != weights.w_x.shape[0]:
        raise ShapeError(f"lstm_step: input {x.shape} does not match weight rows {weights.w_x.shape[0]}")
    if h.shape != (x.shape[0], hidden) or c.shape != (x.shape[0], hidden):
        raise ShapeError(f"lstm_step: state shapes {h.shape}, {c.shape} expected {(x.shape[0], hidden)}")

    gates = add(add(matmul(x, weights.w_x), matmul(h, weights.w_h)), weights.bias)
    i = sigmoid(slice_cols(gates, 0, hidden))
    f = sigmoid(slice_cols(gates, hidden, 2 * hidden))
    g = tanh(slice_cols(gates, 2 * hidden, 3 * hidden))
    o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden))
    c_next = add(mul(f, c), mul(i, g))
    h_next = mul(o, tanh(c_next))
    return h_next, c_next


def mean_abs_error(pred: Tensor, target: Tensor) -> float:
    if pred.shape != target.shape:
        raise ShapeError(f"mean_abs_error: shape mismatch {pred.shape} vs {target.shape}")
    return float(np.abs(np.asarray(pred, dtype=np.float64) - target).mean())


def sse_per_image(pred: Tensor, target: Tensor) -> np.ndarray:
    if pred.shape != target.shape:
        raise ShapeError(f"sse_per_image: shape mismatch {pred.shape} vs {target.shape}")
    diff = np.asarray(pred, dtype=np.float64) - target
    return (diff * diff).reshape(diff.shape[0], -1).sum(axis=1)

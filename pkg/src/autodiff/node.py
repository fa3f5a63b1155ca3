"""Reverse-mode gradient nodes over dense numpy tensors.

A ``Tensor`` is a plain row-major ``numpy.ndarray`` (float32 unless the
float64 verification mode is active). A ``Node`` wraps one tensor together
with its lazily allocated gradient and the backward rule that produced it.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np

from src.errors import NumericError, ShapeError

Tensor = np.ndarray

_GRAD_ENABLED = True
_DTYPE = np.float32


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording parents (inference and evaluation)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


@contextlib.contextmanager
def float64_mode() -> Iterator[None]:
    """Build tensors in float64; only used by finite-difference checks."""
    global _DTYPE
    previous = _DTYPE
    _DTYPE = np.float64
    try:
        yield
    finally:
        _DTYPE = previous


def as_tensor(value) -> Tensor:
    return np.asarray(value, dtype=_DTYPE)


def check_finite(array: Tensor, where: str) -> None:
    if not np.all(np.isfinite(array)):
        bad = int(np.size(array) - np.count_nonzero(np.isfinite(array)))
        raise NumericError(f"{bad} non-finite value(s) produced by {where}")


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "_grad", "parents", "backward_fn", "requires_grad", "name", "op")

    def __init__(
        self,
        value,
        parents: Sequence["Node"] = (),
        backward_fn: Optional[Callable[[Tensor], None]] = None,
        requires_grad: bool = False,
        name: Optional[str] = None,
        op: str = "",
    ):
        self.value = as_tensor(value)
        check_finite(self.value, op or name or "input")
        self._grad: Optional[Tensor] = None
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad
        self.name = name
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    @property
    def grad(self) -> Tensor:
        if self._grad is None:
            return np.zeros_like(self.value)
        return self._grad

    def accumulate(self, grad: Tensor) -> None:
        if not self.requires_grad:
            return
        if grad.shape != self.value.shape:
            raise ShapeError(
                f"gradient shape {grad.shape} does not match value shape {self.value.shape} ({self.op or self.name})"
            )
        if self._grad is None:
            self._grad = np.array(grad, dtype=self.value.dtype, copy=True)
        else:
            self._grad += grad

    def zero_grad(self) -> None:
        self._grad = None

    def backward(self) -> Dict["Node", Tensor]:
        return backward(self)

    def __repr__(self) -> str:
        label = self.name or self.op or "const"
        return f"Node({label}, shape={self.value.shape}, requires_grad={self.requires_grad})"


def parameter(value, name: str) -> Node:
    return Node(value, requires_grad=True, name=name)


def constant(value) -> Node:
    return Node(value, op="const")


def lift(value) -> Node:
    return value if isinstance(value, Node) else constant(value)


def make_node(value, parents: Sequence[Node], backward_fn: Callable[[Tensor], None], op: str) -> Node:
    """Create an op output, recording parents only when a gradient can reach them."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Node(value, parents=parents, backward_fn=backward_fn, requires_grad=True, op=op)
    return Node(value, op=op)


def _topological_order(root: Node) -> List[Node]:
    order: List[Node] = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> Dict[Node, Tensor]:
    """Accumulate d(loss)/d(leaf) into every reachable leaf that requires a gradient.

    Leaf gradients accumulate across calls; callers zero them between steps.

    Returns:
        Mapping from each reached leaf node to its accumulated gradient
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.value.shape}")
    if not loss.requires_grad:
        return {}

    order = _topological_order(loss)
    for node in order:
        if node.backward_fn is not None:
            node.zero_grad()

    loss.accumulate(np.ones_like(loss.value))
    for node in reversed(order):
        if node.backward_fn is not None and node._grad is not None:
            node.backward_fn(node._grad)
            check_finite(node._grad, f"backward of {node.op}")

    return {node: node.grad for node in order if node.backward_fn is None}


def zero_grad(params) -> None:
    nodes = params.values() if isinstance(params, dict) else params
    for node in nodes:
        node.zero_grad()

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from src.autodiff.node import Node, Tensor
from src.errors import ShapeError

# checkpoints hold f32 only; the step counter is split into two exact 24-bit words
STEP_WORD = 2**24


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, Tensor] = field(default_factory=dict)
    v: Dict[str, Tensor] = field(default_factory=dict)

    def to_arrays(self) -> Dict[str, Tensor]:
        arrays = {"adam.step": np.array([self.step % STEP_WORD, self.step // STEP_WORD], dtype=np.float32)}
        for name in self.m:
            arrays[f"adam.m.{name}"] = self.m[name]
            arrays[f"adam.v.{name}"] = self.v[name]
        return arrays

    def load_arrays(self, arrays: Mapping[str, Tensor]) -> None:
        words = np.asarray(arrays["adam.step"], dtype=np.int64).reshape(-1)
        self.step = int(words[0]) + (int(words[1]) * STEP_WORD if words.size > 1 else 0)
        self.m = {k[len("adam.m."):]: np.array(v, dtype=np.float32) for k, v in arrays.items() if k.startswith("adam.m.")}
        self.v = {k[len("adam.v."):]: np.array(v, dtype=np.float32) for k, v in arrays.items() if k.startswith("adam.v.")}


def adam_update(params: Mapping[str, Node], grads: Mapping[str, Tensor], state: AdamState) -> AdamState:
    """One bias-corrected Adam step, in place on ``params`` and ``state``."""
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, node in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != node.value.shape:
            raise ShapeError(f"adam_update: gradient for {name} has shape {grad.shape}, expected {node.value.shape}")
        m = state.m.setdefault(name, np.zeros_like(node.value))
        v = state.v.setdefault(name, np.zeros_like(node.value))
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        node.value = (node.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(node.value.dtype)
    return state


class Adam:
    """Adam over a fixed parameter dictionary; skips parameters that do not require gradients."""

    def __init__(self, params: Mapping[str, Node], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = {name: node for name, node in params.items() if node.requires_grad}
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for node in self.params.values():
            node.zero_grad()

    def step(self) -> None:
        grads = {name: node.grad for name, node in self.params.items()}
        adam_update(self.params, grads, self.state)

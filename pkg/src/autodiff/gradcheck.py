"""Central finite-difference verification of backward rules."""

from __future__ import annotations

from typing import Callable, List, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.autodiff.node import Node, backward, float64_mode, parameter


class GradcheckMismatch(BaseModel):
    input_index: int
    element: int
    analytic: float
    numeric: float


class GradcheckResult(BaseModel):
    passed: bool
    checked: int = Field(0, description="Number of scalar entries compared")
    max_abs_error: float = 0.0
    mismatches: List[GradcheckMismatch] = Field(default_factory=list)


def gradcheck(
    fn: Callable[..., Node],
    inputs: Sequence[np.ndarray],
    h: float = 1e-3,
    rtol: float = 1e-2,
    atol: float = 1e-4,
    max_elements: int = 64,
    seed: int = 0,
) -> GradcheckResult:
    """Compare backward() against central differences of a scalar-valued ``fn``.

    The graph is evaluated in float64 so the comparison measures the backward
    rules rather than float32 rounding. A tolerance of ``max(atol, rtol * scale)``
    is applied per entry. Large inputs are spot-checked on ``max_elements``
    randomly chosen entries.
    """
    rng = np.random.default_rng(seed)
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    with float64_mode():
        nodes = [parameter(a, f"input{i}") for i, a in enumerate(arrays)]
        backward(fn(*nodes))
        analytic = [node.grad.copy() for node in nodes]

        def evaluate(values):
            return float(fn(*[Node(v) for v in values]).value)

        result = GradcheckResult(passed=True)
        for index, base in enumerate(arrays):
            flat_count = base.size
            picks = np.arange(flat_count)
            if flat_count > max_elements:
                picks = np.sort(rng.choice(flat_count, size=max_elements, replace=False))
            for element in picks:
                plus = [a.copy() for a in arrays]
                minus = [a.copy() for a in arrays]
                plus[index].flat[element] += h
                minus[index].flat[element] -= h
                numeric = (evaluate(plus) - evaluate(minus)) / (2.0 * h)
                exact = float(analytic[index].flat[element])
                error = abs(exact - numeric)
                result.checked += 1
                result.max_abs_error = max(result.max_abs_error, error)
                if error > max(atol, rtol * max(abs(exact), abs(numeric))):
                    result.passed = False
                    result.mismatches.append(
                        GradcheckMismatch(input_index=index, element=int(element), analytic=exact, numeric=numeric)
                    )
    return result


def gradcheck_parameters(
    loss_fn: Callable[[], Node],
    params: Sequence[Node],
    modules: Sequence = (),
    h: float = 1e-3,
    rtol: float = 1e-2,
    atol: float = 1e-4,
    max_elements: int = 8,
    seed: int = 0,
) -> GradcheckResult:
    """Finite-difference check of selected parameters of whole networks.

    Every parameter of ``modules`` is promoted to float64 for the duration of
    the check and restored to float32 afterwards.
    """
    rng = np.random.default_rng(seed)
    all_nodes = {id(n): n for m in modules for n in m.parameters().values()}
    all_nodes.update({id(n): n for n in params})
    originals = {key: node.value for key, node in all_nodes.items()}
    try:
        with float64_mode():
            for node in all_nodes.values():
                node.value = node.value.astype(np.float64)
                node.zero_grad()
            backward(loss_fn())
            analytic = [node.grad.copy() for node in params]

            result = GradcheckResult(passed=True)
            for index, node in enumerate(params):
                picks = np.arange(node.value.size)
                if node.value.size > max_elements:
                    picks = np.sort(rng.choice(node.value.size, size=max_elements, replace=False))
                for element in picks:
                    base = node.value.flat[element]
                    node.value.flat[element] = base + h
                    up = float(loss_fn().value)
                    node.value.flat[element] = base - h
                    down = float(loss_fn().value)
                    node.value.flat[element] = base
                    numeric = (up - down) / (2.0 * h)
                    exact = float(analytic[index].flat[element])
                    error = abs(exact - numeric)
                    result.checked += 1
                    result.max_abs_error = max(result.max_abs_error, error)
                    if error > max(atol, rtol * max(abs(exact), abs(numeric))):
                        result.passed = False
                        result.mismatches.append(
                            GradcheckMismatch(input_index=index, element=int(element), analytic=exact, numeric=numeric)
                        )
    finally:
        for key, node in all_nodes.items():
            node.value = originals[key]
            node.zero_grad()
    return result

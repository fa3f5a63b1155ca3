import math
from typing import Sequence, Tuple

import numpy as np

Point = Tuple[float, float]


def eval_bezier(p0: Sequence[float], c: Sequence[float], p1: Sequence[float], t) -> np.ndarray:
    """Quadratic Bezier point(s): (1-t)^2 p0 + 2(1-t)t c + t^2 p1.

    ``t`` may be a scalar (returns shape (2,)) or an array (returns shape (n, 2)).
    """
    p0, c, p1 = (np.asarray(p, dtype=np.float64) for p in (p0, c, p1))
    t = np.asarray(t, dtype=np.float64)
    s = 1.0 - t
    return (s * s)[..., None] * p0 + (2.0 * s * t)[..., None] * c + (t * t)[..., None] * p1


def control_polygon_length(p0: Sequence[float], c: Sequence[float], p1: Sequence[float]) -> float:
    """Chord plus control-polygon length, the curve's sampling budget."""
    return math.dist(p0, p1) + math.dist(p0, c) + math.dist(c, p1)


def sample_count(p0: Sequence[float], c: Sequence[float], p1: Sequence[float]) -> int:
    return max(2, math.ceil(4.0 * control_polygon_length(p0, c, p1)))


def sample_curve(p0: Sequence[float], c: Sequence[float], p1: Sequence[float]) -> np.ndarray:
    t = np.linspace(0.0, 1.0, sample_count(p0, c, p1))
    return eval_bezier(p0, c, p1, t)

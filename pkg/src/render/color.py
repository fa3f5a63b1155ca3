"""CIELAB -> sRGB conversion (D65 white point)."""

from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_XYZ_TO_LINEAR_RGB = np.array(
    [
        [3.2404542, -1.5371385, -0.4985314],
        [-0.9692660, 1.8760108, 0.0415560],
        [0.0556434, -0.2040259, 1.0572252],
    ]
)
_EPSILON = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


class LabColor(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: float = Field(..., ge=0.0, le=100.0, allow_inf_nan=False)
    a: float = Field(..., ge=-110.0, le=110.0, allow_inf_nan=False)
    b: float = Field(..., ge=-110.0, le=110.0, allow_inf_nan=False)

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.a, self.b], dtype=np.float64)


def _lab_array_to_srgb(lab: np.ndarray) -> np.ndarray:
    L, a, b = lab[..., 0], lab[..., 1], lab[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0

    def finv(t):
        t3 = t**3
        return np.where(t3 > _EPSILON, t3, (116.0 * t - 16.0) / _KAPPA)

    x = finv(fx)
    y = np.where(L > _KAPPA * _EPSILON, fy**3, L / _KAPPA)
    z = finv(fz)
    xyz = np.stack([x, y, z], axis=-1) * _WHITE_D65
    linear = np.clip(xyz @ _XYZ_TO_LINEAR_RGB.T, 0.0, 1.0)
    srgb = np.where(linear <= 0.0031308, 12.92 * linear, 1.055 * np.power(linear, 1.0 / 2.4) - 0.055)
    return np.clip(srgb, 0.0, 1.0)


def lab_to_srgb(color: Union[LabColor, np.ndarray, Tuple[float, float, float]]) -> np.ndarray:
    """Convert one Lab colour (or an array of them, last axis = L,a,b) to sRGB in [0,1]."""
    lab = color.as_array() if isinstance(color, LabColor) else np.asarray(color, dtype=np.float64)
    return _lab_array_to_srgb(lab)


def nearest_palette_index(color: LabColor, palette) -> int:
    distances = [np.linalg.norm(color.as_array() - p.as_array()) for p in palette]
    return int(np.argmin(distances))

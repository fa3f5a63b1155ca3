"""High-level drawing actions and their network-facing encodings.

Actions live in pixel space (strokes, rectangles) or world space (prisms).
An ``ActionDomain`` owns the affine map between an action and its
normalized vector in [-1, 1]^dim that the networks read and emit.
"""

from __future__ import annotations

from typing import Annotated, ClassVar, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.errors import ConfigError, ShapeError
from src.render.color import LabColor

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]


class StrokeAction(BaseModel):
    """Quadratic Bezier stroke: endpoints p0, p1 and control point c, in pixels."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["stroke"] = "stroke"
    x0: FiniteFloat
    y0: FiniteFloat
    cx: FiniteFloat
    cy: FiniteFloat
    x1: FiniteFloat
    y1: FiniteFloat
    thickness: float = Field(1.5, ge=0.0, allow_inf_nan=False)
    color: Optional[LabColor] = None

    @property
    def p0(self) -> Tuple[float, float]:
        return (self.x0, self.y0)

    @property
    def c(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def p1(self) -> Tuple[float, float]:
        return (self.x1, self.y1)

    def translate(self, dx: float, dy: float) -> "StrokeAction":
        return self.model_copy(
            update={
                "x0": self.x0 + dx, "y0": self.y0 + dy,
                "cx": self.cx + dx, "cy": self.cy + dy,
                "x1": self.x1 + dx, "y1": self.y1 + dy,
            }
        )


class RectAction(BaseModel):
    """Filled axis-aligned rectangle between two pixel corners."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["rect"] = "rect"
    x0: FiniteFloat
    y0: FiniteFloat
    x1: FiniteFloat
    y1: FiniteFloat
    color: LabColor

    def translate(self, dx: float, dy: float) -> "RectAction":
        return self.model_copy(update={"x0": self.x0 + dx, "y0": self.y0 + dy, "x1": self.x1 + dx, "y1": self.y1 + dy})


class PrismAction(BaseModel):
    """Axis-aligned rectangular prism in world space [0,1]^3."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["prism"] = "prism"
    x0: FiniteFloat
    y0: FiniteFloat
    z0: FiniteFloat
    x1: FiniteFloat
    y1: FiniteFloat
    z1: FiniteFloat
    color: LabColor


Action = Annotated[Union[StrokeAction, RectAction, PrismAction], Field(discriminator="kind")]

THICKNESS_RANGE = (0.5, 4.0)
FIXED_THICKNESS = 1.5


def _to_unit(u):
    return (np.asarray(u, dtype=np.float64) + 1.0) / 2.0


def _from_unit(v):
    return 2.0 * np.asarray(v, dtype=np.float64) - 1.0


def decode_lab(u: np.ndarray) -> LabColor:
    L = float(np.clip(_to_unit(u[0]) * 100.0, 0.0, 100.0))
    a = float(np.clip(u[1] * 110.0, -110.0, 110.0))
    b = float(np.clip(u[2] * 110.0, -110.0, 110.0))
    return LabColor(L=L, a=a, b=b)


def encode_lab(color: LabColor) -> List[float]:
    return [float(_from_unit(color.L / 100.0)), color.a / 110.0, color.b / 110.0]


class ActionDomain:
    """Base class for the action domains; subclasses define the encoding."""

    name: ClassVar[str]
    dim: ClassVar[int]
    channels: ClassVar[int]
    field_names: ClassVar[Tuple[str, ...]]

    def canvas_shape(self, size: int) -> Tuple[int, int, int]:
        return (self.channels, size, size)

    def blank(self, size: int) -> np.ndarray:
        return np.zeros(self.canvas_shape(size), dtype=np.float32)

    def _check(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        if vec.shape[0] != self.dim:
            raise ShapeError(f"{self.name} actions have {self.dim} components, got {vec.shape[0]}")
        return vec

    def pixel(self, u, size: int):
        return _to_unit(u) * (size - 1)

    def unpixel(self, p, size: int):
        return _from_unit(np.asarray(p, dtype=np.float64) / (size - 1))

    def decode(self, vec, size: int):
        raise NotImplementedError

    def encode(self, action, size: int) -> np.ndarray:
        raise NotImplementedError

    def render(self, canvas: np.ndarray, action) -> np.ndarray:
        from src.render.raster import render

        return render(canvas, action)


class StrokeDomain(ActionDomain):
    """Grayscale quadratic strokes with a fixed thickness."""

    name = "stroke"
    dim = 6
    channels = 1
    field_names = ("x0", "y0", "cx", "cy", "x1", "y1")

    def __init__(self, fixed_thickness: float = FIXED_THICKNESS):
        self.fixed_thickness = fixed_thickness

    def _geometry(self, vec: np.ndarray, size: int) -> Dict[str, float]:
        p = self.pixel(vec[:6], size)
        return dict(x0=p[0], y0=p[1], cx=p[2], cy=p[3], x1=p[4], y1=p[5])

    def _geometry_vec(self, action: StrokeAction, size: int) -> List[float]:
        return list(self.unpixel([action.x0, action.y0, action.cx, action.cy, action.x1, action.y1], size))

    def decode(self, vec, size: int) -> StrokeAction:
        vec = self._check(vec)
        return StrokeAction(**self._geometry(vec, size), thickness=self.fixed_thickness)

    def encode(self, action: StrokeAction, size: int) -> np.ndarray:
        return np.asarray(self._geometry_vec(action, size), dtype=np.float32)


class ThickStrokeDomain(StrokeDomain):
    """Grayscale strokes whose thickness is part of the action."""

    name = "stroke_thick"
    dim = 7
    field_names = StrokeDomain.field_names + ("thickness",)

    def decode(self, vec, size: int) -> StrokeAction:
        vec = self._check(vec)
        lo, hi = THICKNESS_RANGE
        thickness = max(0.0, float(lo + _to_unit(vec[6]) * (hi - lo)))
        return StrokeAction(**self._geometry(vec, size), thickness=thickness)

    def encode(self, action: StrokeAction, size: int) -> np.ndarray:
        lo, hi = THICKNESS_RANGE
        thickness = float(_from_unit((action.thickness - lo) / (hi - lo)))
        return np.asarray(self._geometry_vec(action, size) + [thickness], dtype=np.float32)


class ColorStrokeDomain(StrokeDomain):
    """Strokes with a Lab colour, alpha-composited on a colour canvas."""

    name = "color_stroke"
    dim = 9
    channels = 3
    field_names = StrokeDomain.field_names + ("L", "a", "b")

    def decode(self, vec, size: int) -> StrokeAction:
        vec = self._check(vec)
        return StrokeAction(**self._geometry(vec, size), thickness=self.fixed_thickness, color=decode_lab(vec[6:9]))

    def encode(self, action: StrokeAction, size: int) -> np.ndarray:
        return np.asarray(self._geometry_vec(action, size) + encode_lab(action.color), dtype=np.float32)


class RectDomain(ActionDomain):
    name = "rect"
    dim = 7
    channels = 3
    field_names = ("x0", "y0", "x1", "y1", "L", "a", "b")

    def decode(self, vec, size: int) -> RectAction:
        vec = self._check(vec)
        p = self.pixel(vec[:4], size)
        return RectAction(x0=p[0], y0=p[1], x1=p[2], y1=p[3], color=decode_lab(vec[4:7]))

    def encode(self, action: RectAction, size: int) -> np.ndarray:
        corners = self.unpixel([action.x0, action.y0, action.x1, action.y1], size)
        return np.asarray(list(corners) + encode_lab(action.color), dtype=np.float32)


class PrismDomain(ActionDomain):
    """Prisms observed through three orthographic views laid side by side."""

    name = "prism"
    dim = 9
    channels = 3
    field_names = ("x0", "y0", "z0", "x1", "y1", "z1", "L", "a", "b")

    def canvas_shape(self, size: int) -> Tuple[int, int, int]:
        return (3, size, 3 * size)

    def decode(self, vec, size: int = 0) -> PrismAction:
        vec = self._check(vec)
        w = _to_unit(vec[:6])
        return PrismAction(x0=w[0], y0=w[1], z0=w[2], x1=w[3], y1=w[4], z1=w[5], color=decode_lab(vec[6:9]))

    def encode(self, action: PrismAction, size: int = 0) -> np.ndarray:
        corners = _from_unit([action.x0, action.y0, action.z0, action.x1, action.y1, action.z1])
        return np.asarray(list(corners) + encode_lab(action.color), dtype=np.float32)


DOMAINS = {cls.name: cls for cls in (StrokeDomain, ThickStrokeDomain, ColorStrokeDomain, RectDomain, PrismDomain)}


def get_domain(name: str, fixed_thickness: float = FIXED_THICKNESS) -> ActionDomain:
    if name not in DOMAINS:
        raise ConfigError(f"Unknown action domain '{name}'. Valid domains: {', '.join(sorted(DOMAINS))}")
    cls = DOMAINS[name]
    if issubclass(cls, StrokeDomain):
        return cls(fixed_thickness=fixed_thickness)
    return cls()

"""Action-line text, SVG and PNG serialization for actions and canvases."""

import re
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
import structlog
from PIL import Image
from pydantic import TypeAdapter, ValidationError

from src.errors import DatasetError, InputMismatchError
from src.render.actions import Action, PrismAction, RectAction, StrokeAction
from src.render.color import LabColor, lab_to_srgb

logger = structlog.get_logger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
_ACTION_ADAPTER = TypeAdapter(Action)
_FIELD_ORDER = {
    "stroke": ("x0", "y0", "cx", "cy", "x1", "y1", "thickness"),
    "rect": ("x0", "y0", "x1", "y1"),
    "prism": ("x0", "y0", "z0", "x1", "y1", "z1"),
}


def _fmt(value: float) -> str:
    return f"{value:.6f}"


# action lines


def format_action_line(action) -> str:
    """One action per line: ``<kind> key=value ...`` with Lab fields last."""
    parts = [action.kind]
    for name in _FIELD_ORDER[action.kind]:
        parts.append(f"{name}={_fmt(getattr(action, name))}")
    if action.color is not None:
        parts.extend(f"{name}={_fmt(getattr(action.color, name))}" for name in ("L", "a", "b"))
    return " ".join(parts)


def parse_action_line(line: str):
    tokens = line.split()
    if not tokens:
        raise ValueError("empty action line")
    kind, fields = tokens[0], {}
    for token in tokens[1:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"malformed field '{token}' in action line")
        fields[key] = float(value)
    color = {k: fields.pop(k) for k in ("L", "a", "b") if k in fields}
    if color:
        fields["color"] = color
    return _ACTION_ADAPTER.validate_python({"kind": kind, **fields})


def write_action_lines(path: Union[str, Path], actions: Iterable) -> Path:
    path = Path(path)
    text = "".join(format_action_line(a) + "\n" for a in actions)
    path.write_text(text, encoding="utf-8")
    return path


def read_action_lines(path: Union[str, Path]) -> List:
    path = Path(path)
    actions = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            actions.append(parse_action_line(line))
        except (ValueError, ValidationError) as e:
            raise DatasetError(f"{path}:{number}: cannot parse action line: {e}") from e
    return actions


# SVG


def _hex(color: LabColor) -> str:
    rgb = np.round(lab_to_srgb(color) * 255.0).astype(int)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _lab_attr(color: LabColor) -> str:
    return " ".join(_fmt(v) for v in (color.L, color.a, color.b))


def actions_to_svg(actions: Sequence, width: int, height: int) -> str:
    """Vector export of stroke and rect actions on a black background.

    Exact parameters are kept in ``data-*`` attributes so ``read_svg`` can
    recover them; grayscale strokes are drawn white.
    """
    ET.register_namespace("", SVG_NS)
    root = ET.Element(
        f"{{{SVG_NS}}}svg",
        {"width": str(width), "height": str(height), "viewBox": f"0 0 {width} {height}"},
    )
    ET.SubElement(
        root,
        f"{{{SVG_NS}}}rect",
        {"id": "background", "x": "0", "y": "0", "width": str(width), "height": str(height), "fill": "#000000"},
    )
    for action in actions:
        if isinstance(action, StrokeAction):
            attrs = {
                "d": f"M {_fmt(action.x0)} {_fmt(action.y0)} Q {_fmt(action.cx)} {_fmt(action.cy)} "
                f"{_fmt(action.x1)} {_fmt(action.y1)}",
                "fill": "none",
                "stroke": _hex(action.color) if action.color is not None else "#ffffff",
                "stroke-width": _fmt(action.thickness),
                "stroke-linecap": "round",
            }
            if action.color is not None:
                attrs["data-lab"] = _lab_attr(action.color)
            ET.SubElement(root, f"{{{SVG_NS}}}path", attrs)
        elif isinstance(action, RectAction):
            x, y = min(action.x0, action.x1), min(action.y0, action.y1)
            ET.SubElement(
                root,
                f"{{{SVG_NS}}}rect",
                {
                    "x": _fmt(x),
                    "y": _fmt(y),
                    "width": _fmt(abs(action.x1 - action.x0)),
                    "height": _fmt(abs(action.y1 - action.y0)),
                    "fill": _hex(action.color),
                    "data-corners": " ".join(_fmt(v) for v in (action.x0, action.y0, action.x1, action.y1)),
                    "data-lab": _lab_attr(action.color),
                },
            )
        elif isinstance(action, PrismAction):
            raise InputMismatchError("Prism actions have no SVG form; export the action lines instead")
    return ET.tostring(root, encoding="unicode")


def write_svg(path: Union[str, Path], actions: Sequence, width: int, height: int) -> Path:
    path = Path(path)
    path.write_text(actions_to_svg(actions, width, height), encoding="utf-8")
    return path


_PATH_RE = re.compile(r"M\s*(\S+)\s+(\S+)\s+Q\s*(\S+)\s+(\S+)\s+(\S+)\s+(\S+)")


def _parse_lab(text: str) -> LabColor:
    L, a, b = (float(v) for v in text.split())
    return LabColor(L=L, a=a, b=b)


def svg_to_actions(text: str) -> List:
    root = ET.fromstring(text)
    actions: List = []
    for element in root:
        tag = element.tag.rsplit("}", 1)[-1]
        if tag == "path":
            match = _PATH_RE.match(element.get("d", "").strip())
            if not match:
                logger.warning(f"Skipping unsupported SVG path: {element.get('d')}")
                continue
            x0, y0, cx, cy, x1, y1 = (float(v) for v in match.groups())
            lab = element.get("data-lab")
            actions.append(
                StrokeAction(
                    x0=x0, y0=y0, cx=cx, cy=cy, x1=x1, y1=y1,
                    thickness=float(element.get("stroke-width", "1.5")),
                    color=_parse_lab(lab) if lab else None,
                )
            )
        elif tag == "rect" and element.get("id") != "background":
            corners = element.get("data-corners")
            if corners:
                x0, y0, x1, y1 = (float(v) for v in corners.split())
            else:
                x0, y0 = float(element.get("x")), float(element.get("y"))
                x1, y1 = x0 + float(element.get("width")), y0 + float(element.get("height"))
            actions.append(RectAction(x0=x0, y0=y0, x1=x1, y1=y1, color=_parse_lab(element.get("data-lab", "50 0 0"))))
    return actions


def read_svg(path: Union[str, Path]) -> List:
    return svg_to_actions(Path(path).read_text(encoding="utf-8"))


# PNG


def canvas_to_image(canvas: np.ndarray) -> Image.Image:
    pixels = np.round(np.clip(canvas, 0.0, 1.0) * 255.0).astype(np.uint8)
    if pixels.shape[0] == 1:
        return Image.fromarray(pixels[0])
    return Image.fromarray(np.ascontiguousarray(np.transpose(pixels, (1, 2, 0))))


def save_png(path: Union[str, Path], canvas: np.ndarray) -> Path:
    path = Path(path)
    canvas_to_image(canvas).save(path, format="PNG")
    return path


def load_png(path: Union[str, Path], channels: int = 1) -> np.ndarray:
    """Read a PNG as a C×H×W float32 canvas in [0, 1]."""
    with Image.open(path) as image:
        image = image.convert("L" if channels == 1 else "RGB")
        pixels = np.asarray(image, dtype=np.float32) / 255.0
    if channels == 1:
        return pixels[None]
    return np.ascontiguousarray(np.transpose(pixels, (2, 0, 1)))


def action_summary(actions: Sequence) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for action in actions:
        counts[action.kind] = counts.get(action.kind, 0) + 1
    return counts

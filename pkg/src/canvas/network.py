"""Canvas network C(x, y): a differentiable stand-in for one renderer step."""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.autodiff import ops
from src.autodiff.nn import Module
from src.autodiff.node import Node, lift, no_grad
from src.errors import ShapeError
from src.render.actions import get_domain


class CanvasSpec(BaseModel):
    """Everything needed to rebuild a canvas network before loading its weights."""

    domain: str = Field(..., description="Action domain the network imitates")
    channels: int = Field(..., ge=1)
    height: int = Field(..., ge=16)
    width: int = Field(..., ge=16)
    action_dim: int = Field(..., ge=1)
    widths: Tuple[int, int, int, int] = Field((16, 32, 32, 64), description="Channels of the four stride-2 convs")
    embed_dim: int = Field(64, ge=1, description="Action embedding size")
    frozen: bool = False


class CanvasNet(Module):
    """U-Net over the coordinate-augmented state with the action embedding broadcast over space.

    Down path: four stride-2 3×3 convs. Up path: four nearest-upsample + conv
    stages, each concatenated with the matching down-path activation; the
    last stage emits ``channels`` maps through a sigmoid.
    """

    def __init__(self, spec: CanvasSpec, seed: int = 0):
        super().__init__()
        if spec.height % 16 or spec.width % 16:
            raise ShapeError(f"CanvasNet needs sides divisible by 16, got {spec.height}x{spec.width}")
        self.spec = spec
        rng = np.random.default_rng(seed)
        w1, w2, w3, w4 = spec.widths
        e = spec.embed_dim
        c_in = spec.channels + 2 + e

        self.embed1 = self.dense_params("embed1", rng, spec.action_dim, e)
        self.embed2 = self.dense_params("embed2", rng, e, e)
        self.down = [
            self.conv_params("down1", rng, c_in, w1),
            self.conv_params("down2", rng, w1, w2),
            self.conv_params("down3", rng, w2, w3),
            self.conv_params("down4", rng, w3, w4),
        ]
        self.up = [
            self.conv_params("up1", rng, w4 + w3, w3),
            self.conv_params("up2", rng, w3 + w2, w2),
            self.conv_params("up3", rng, w2 + w1, w1),
            self.conv_params("up4", rng, w1 + c_in, spec.channels),
        ]
        if spec.frozen:
            self.freeze()

    def freeze(self) -> None:
        super().freeze()
        self.spec = self.spec.model_copy(update={"frozen": True})

    @property
    def state_shape(self) -> Tuple[int, int, int]:
        return (self.spec.channels, self.spec.height, self.spec.width)

    def forward(self, x, y) -> Node:
        x, y = lift(x), lift(y)
        if x.value.ndim != 4 or x.shape[1:] != self.state_shape:
            raise ShapeError(f"canvas_forward: state shape {x.shape} does not match B×{self.state_shape}")
        if y.value.ndim != 2 or y.shape != (x.shape[0], self.spec.action_dim):
            raise ShapeError(f"canvas_forward: action shape {y.shape}, expected ({x.shape[0]}, {self.spec.action_dim})")

        emb = ops.relu(ops.dense(y, *self.embed1))
        emb = ops.relu(ops.dense(emb, *self.embed2))
        h, w = self.spec.height, self.spec.width
        inp = ops.concat([ops.coord_augment(x), ops.broadcast_spatial(emb, h, w)], axis=1)

        skips = [inp]
        out = inp
        for kernel, bias in self.down:
            out = ops.relu(ops.conv2d(out, kernel, stride=2, padding=1, bias=bias))
            skips.append(out)

        skips.pop()
        for index, (kernel, bias) in enumerate(self.up):
            out = ops.concat([ops.upsample2x(out), skips.pop()], axis=1)
            out = ops.conv2d(out, kernel, stride=1, padding=1, bias=bias)
            out = ops.sigmoid(out) if index == len(self.up) - 1 else ops.relu(out)
        return out

    __call__ = forward


def canvas_forward(net: CanvasNet, x, y) -> Node:
    """Predicted next state for a batch of states ``x`` (B×C×H×W) and actions ``y`` (B×dim)."""
    return net.forward(x, y)


def predict(net: CanvasNet, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    with no_grad():
        return net.forward(x, y).value


def build_canvas(domain_name: str, image_size: int, widths: Optional[Tuple[int, int, int, int]] = None, seed: int = 0) -> CanvasNet:
    domain = get_domain(domain_name)
    channels, height, width = domain.canvas_shape(image_size)
    spec = CanvasSpec(
        domain=domain_name,
        channels=channels,
        height=height,
        width=width,
        action_dim=domain.dim,
        **({"widths": widths} if widths else {}),
    )
    return CanvasNet(spec, seed=seed)

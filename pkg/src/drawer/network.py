"""Recurrent drawer network D(X, x_n)."""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.autodiff import ops
from src.autodiff.nn import Module
from src.autodiff.node import Node, constant, lift
from src.errors import ShapeError
from src.render.actions import get_domain

RecurrentState = Optional[Tuple[Node, Node]]


class DrawerConfig(BaseModel):
    domain: str = Field("stroke", description="Action domain tag")
    n_steps: int = Field(4, ge=1, description="Timesteps N of one unroll")
    use_lstm: bool = True


class DrawerSpec(BaseModel):
    domain: str
    hint_channels: int = Field(..., ge=1)
    channels: int = Field(..., ge=1, description="Canvas state channels")
    height: int = Field(..., ge=16)
    width: int = Field(..., ge=16)
    action_dim: int = Field(..., ge=1)
    use_lstm: bool = True
    widths: Tuple[int, int, int, int] = (16, 32, 32, 64)
    feature_dim: int = Field(256, ge=1)
    hidden: int = Field(256, ge=1)
    trained: bool = False


class DrawerNet(Module):
    """Conv encoder over concat(coord_augment(hint), state) → dense features → optional LSTM → tanh head."""

    def __init__(self, spec: DrawerSpec, seed: int = 0):
        super().__init__()
        if spec.height % 16 or spec.width % 16:
            raise ShapeError(f"DrawerNet needs sides divisible by 16, got {spec.height}x{spec.width}")
        self.spec = spec
        rng = np.random.default_rng(seed)
        c_in = spec.hint_channels + 2 + spec.channels
        w1, w2, w3, w4 = spec.widths
        self.encoder = [
            self.conv_params("enc1", rng, c_in, w1),
            self.conv_params("enc2", rng, w1, w2),
            self.conv_params("enc3", rng, w2, w3),
            self.conv_params("enc4", rng, w3, w4),
        ]
        flat = w4 * (spec.height // 16) * (spec.width // 16)
        self.feature = self.dense_params("feature", rng, flat, spec.feature_dim)
        self.lstm = self.lstm_params("lstm", rng, spec.feature_dim, spec.hidden) if spec.use_lstm else None
        head_in = spec.hidden if spec.use_lstm else spec.feature_dim
        self.head = self.dense_params("head", rng, head_in, spec.action_dim)

    @property
    def trained(self) -> bool:
        return self.spec.trained

    def mark_trained(self) -> None:
        self.spec = self.spec.model_copy(update={"trained": True})

    @property
    def hint_shape(self) -> Tuple[int, int, int]:
        return (self.spec.hint_channels, self.spec.height, self.spec.width)

    @property
    def state_shape(self) -> Tuple[int, int, int]:
        return (self.spec.channels, self.spec.height, self.spec.width)

    def initial_state(self, batch: int) -> RecurrentState:
        if self.lstm is None:
            return None
        zeros = np.zeros((batch, self.spec.hidden), dtype=np.float32)
        return constant(zeros), constant(zeros)

    def step(self, hint, state, recurrent: RecurrentState) -> Tuple[Node, RecurrentState]:
        hint, state = lift(hint), lift(state)
        if hint.value.ndim != 4 or hint.shape[1:] != self.hint_shape:
            raise ShapeError(f"drawer_step: hint shape {hint.shape} does not match B×{self.hint_shape}")
        if state.value.ndim != 4 or state.shape != (hint.shape[0],) + self.state_shape:
            raise ShapeError(f"drawer_step: state shape {state.shape} does not match B×{self.state_shape}")

        out = ops.concat([ops.coord_augment(hint), state], axis=1)
        for kernel, bias in self.encoder:
            out = ops.relu(ops.conv2d(out, kernel, stride=2, padding=1, bias=bias))
        features = ops.relu(ops.dense(ops.flatten(out), *self.feature))

        if self.lstm is not None:
            if recurrent is None:
                recurrent = self.initial_state(hint.shape[0])
            h, c = ops.lstm_step(features, recurrent[0], recurrent[1], self.lstm)
            recurrent = (h, c)
            features = h
        action = ops.tanh(ops.dense(features, *self.head))
        return action, recurrent


def drawer_step(net, hint, state, recurrent: RecurrentState) -> Tuple[Node, RecurrentState]:
    """One drawer decision; any object exposing ``step`` (e.g. a baseline) works."""
    return net.step(hint, state, recurrent)


def build_drawer(
    domain_name: str,
    image_size: int,
    use_lstm: bool = True,
    hint_channels: Optional[int] = None,
    seed: int = 0,
    **sizes,
) -> DrawerNet:
    domain = get_domain(domain_name)
    channels, height, width = domain.canvas_shape(image_size)
    spec = DrawerSpec(
        domain=domain_name,
        hint_channels=hint_channels or channels,
        channels=channels,
        height=height,
        width=width,
        action_dim=domain.dim,
        use_lstm=use_lstm,
        **sizes,
    )
    return DrawerNet(spec, seed=seed)

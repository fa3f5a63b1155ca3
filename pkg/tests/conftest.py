from pathlib import Path

import numpy as np
import pytest

from src.canvas.network import build_canvas
from src.drawer.network import build_drawer

TINY_WIDTHS = (2, 2, 2, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def tiny_canvas(domain: str = "stroke", size: int = 16, seed: int = 0):
    return build_canvas(domain, size, widths=TINY_WIDTHS, seed=seed)


def tiny_drawer(domain: str = "stroke", size: int = 16, use_lstm: bool = True, seed: int = 0, hint_channels=None):
    return build_drawer(
        domain, size, use_lstm=use_lstm, hint_channels=hint_channels, seed=seed, widths=TINY_WIDTHS, feature_dim=8, hidden=8
    )


@pytest.fixture
def frozen_canvas():
    net = tiny_canvas()
    net.freeze()
    return net


@pytest.fixture
def drawer():
    return tiny_drawer()


class ConstantDrawer:
    """Drawer stand-in that emits the same action vector every step."""

    trained = True

    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=np.float32)

    def initial_state(self, batch: int):
        return None

    def step(self, hint, state, recurrent):
        from src.autodiff.node import constant

        batch = hint.shape[0]
        return constant(np.tile(self.vector, (batch, 1))), recurrent


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a KEY=value config whose artifact paths all live under tmp_path."""

    def _write(**values) -> Path:
        base = {
            "DATA_DIR": tmp_path / "data",
            "CHECKPOINT_DIR": tmp_path / "checkpoints",
            "OUTPUT_DIR": tmp_path / "outputs",
        }
        base.update({k.upper(): v for k, v in values.items()})
        path = tmp_path / "run.env"
        path.write_text("".join(f"{k}={v}\n" for k, v in base.items()), encoding="utf-8")
        return path

    return _write

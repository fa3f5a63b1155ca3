import numpy as np
import pytest
from conftest import ConstantDrawer, tiny_canvas, tiny_drawer

from src.autodiff import ops
from src.autodiff.gradcheck import gradcheck_parameters
from src.autodiff.node import no_grad
from src.drawer.network import DrawerNet, build_drawer
from src.drawer.training import (
    DrawerTrainConfig,
    color_class_accuracy,
    decode_actions,
    drawer_rollout,
    eval_drawer,
    infer_actions,
    infer_batch,
    train_drawer,
    unroll,
)
from src.errors import DatasetError, FrozenCanvasError, ShapeError
from src.render.actions import StrokeAction, get_domain
from src.tasks.colored_mnist import default_palette
from src.tasks.dataset import TaskSample


def _samples(rng, n=4, channels=1, size=16):
    hints = rng.uniform(size=(n, channels, size, size)).astype(np.float32)
    return [TaskSample(hint=h, target=h.copy()) for h in hints]


def test_drawer_step_emits_bounded_actions(rng, drawer):
    hint = rng.uniform(size=(2, 1, 16, 16)).astype(np.float32)
    state = np.zeros((2, 1, 16, 16), dtype=np.float32)
    action, recurrent = drawer.step(hint, state, drawer.initial_state(2))
    assert action.shape == (2, 6)
    assert np.all(np.abs(action.value) <= 1.0)
    h, c = recurrent
    assert h.shape == c.shape == (2, 8)


def test_drawer_without_lstm_has_no_recurrent_state(rng):
    net = tiny_drawer(use_lstm=False)
    assert net.initial_state(3) is None
    action, recurrent = net.step(np.zeros((3, 1, 16, 16)), np.zeros((3, 1, 16, 16)), None)
    assert action.shape == (3, 6)
    assert recurrent is None
    assert not any(name.startswith("lstm.") for name in net.parameters())


def test_drawer_rejects_mismatched_inputs(drawer):
    with pytest.raises(ShapeError):
        drawer.step(np.zeros((1, 1, 32, 32)), np.zeros((1, 1, 32, 32)), None)
    with pytest.raises(ShapeError):
        drawer.step(np.zeros((1, 1, 16, 16)), np.zeros((2, 1, 16, 16)), None)


def test_translation_drawer_reads_a_different_hint_shape():
    net = tiny_drawer("color_stroke", hint_channels=1)
    assert net.hint_shape == (1, 16, 16)
    assert net.state_shape == (3, 16, 16)
    assert isinstance(build_drawer("rect", 16, widths=(2, 2, 2, 2), feature_dim=4, hidden=4), DrawerNet)


def test_unroll_never_erases_ink(rng, frozen_canvas, drawer):
    hint = rng.uniform(size=(2, 1, 16, 16)).astype(np.float32)
    x0 = rng.uniform(size=(2, 1, 16, 16)).astype(np.float32)
    with no_grad():
        finals = [unroll(drawer, frozen_canvas, hint, x0, n)[0].value for n in (1, 2, 3)]
    assert np.all(finals[0] >= x0)
    assert np.all(finals[1] >= finals[0])
    assert np.all(finals[2] >= finals[1])


def test_single_step_unroll(rng, frozen_canvas, drawer):
    final, actions = unroll(drawer, frozen_canvas, np.zeros((1, 1, 16, 16)), np.zeros((1, 1, 16, 16)), 1)
    assert len(actions) == 1
    assert final.shape == (1, 1, 16, 16)


def test_unfrozen_canvas_is_refused(rng, drawer):
    canvas = tiny_canvas()
    with pytest.raises(FrozenCanvasError):
        unroll(drawer, canvas, np.zeros((1, 1, 16, 16)), np.zeros((1, 1, 16, 16)), 2)
    with pytest.raises(FrozenCanvasError):
        train_drawer(drawer, canvas, _samples(rng), DrawerTrainConfig(epochs=1))


def test_unroll_gradient_matches_finite_differences(rng, frozen_canvas, drawer):
    hint = rng.uniform(size=(2, 1, 16, 16))
    target = rng.uniform(size=(2, 1, 16, 16))
    x0 = np.zeros((2, 1, 16, 16))

    def loss():
        final, _ = unroll(drawer, frozen_canvas, hint, x0, 2)
        return ops.sse_loss(final, target)

    params = drawer.parameters()
    result = gradcheck_parameters(
        loss, [params["head.bias"], params["feature.weight"]], modules=[drawer, frozen_canvas], h=1e-4, max_elements=4
    )
    assert result.passed, result.mismatches
    assert frozen_canvas.parameters()["up4.bias"].value.dtype == np.float32


def test_training_marks_drawer_trained(rng, frozen_canvas, drawer):
    cfg = DrawerTrainConfig(n_steps=2, epochs=4, batch_size=4, lr=5e-3, seed=3)
    assert not drawer.trained
    history = train_drawer(drawer, frozen_canvas, _samples(rng, n=8), cfg)
    assert drawer.trained
    assert len(history) == 4
    assert all(np.isfinite(history))


def test_training_is_deterministic(rng, frozen_canvas):
    samples = _samples(rng, n=4)
    cfg = DrawerTrainConfig(n_steps=2, epochs=2, batch_size=2, seed=9)
    first, second = tiny_drawer(seed=1), tiny_drawer(seed=1)
    assert train_drawer(first, frozen_canvas, samples, cfg) == train_drawer(second, frozen_canvas, samples, cfg)
    assert first.checksum() == second.checksum()


def test_training_needs_samples(frozen_canvas, drawer):
    with pytest.raises(DatasetError):
        train_drawer(drawer, frozen_canvas, [], DrawerTrainConfig(epochs=1))


def test_infer_actions_shape(rng, frozen_canvas, drawer):
    vectors = infer_actions(drawer, frozen_canvas, rng.uniform(size=(1, 16, 16)).astype(np.float32), 5)
    assert vectors.shape == (5, 6)
    finals, batch_vectors = infer_batch(
        drawer, frozen_canvas, np.zeros((3, 1, 16, 16), np.float32), np.zeros((3, 1, 16, 16), np.float32), 2
    )
    assert finals.shape == (3, 1, 16, 16)
    assert batch_vectors.shape == (3, 2, 6)
    actions = decode_actions(get_domain("stroke"), vectors, 16)
    assert len(actions) == 5 and all(isinstance(a, StrokeAction) for a in actions)


def test_inference_is_deterministic_and_batch_independent(rng, frozen_canvas, drawer):
    samples = _samples(rng, n=5)
    hint = samples[0].hint
    np.testing.assert_array_equal(
        infer_actions(drawer, frozen_canvas, hint, 4), infer_actions(drawer, frozen_canvas, hint, 4)
    )

    stroke = get_domain("stroke")
    single = drawer_rollout(drawer, frozen_canvas, samples, 4, stroke, batch_size=1)
    batched = drawer_rollout(drawer, frozen_canvas, samples, 4, stroke, batch_size=32)
    np.testing.assert_allclose(single.vectors, batched.vectors, atol=1e-3)
    np.testing.assert_allclose(single.canvas_finals, batched.canvas_finals, atol=1e-3)

    one = eval_drawer(drawer, frozen_canvas, samples, 4, stroke, batch_size=1)
    many = eval_drawer(drawer, frozen_canvas, samples, 4, stroke, batch_size=32)
    assert one.canvas_sse == pytest.approx(many.canvas_sse, rel=1e-3, abs=1e-3)
    assert one.blank_sse == many.blank_sse


def test_off_canvas_actions_score_the_blank_baseline(rng, frozen_canvas):
    samples = _samples(rng, n=3)
    report = eval_drawer(ConstantDrawer(np.full(6, -5.0)), frozen_canvas, samples, 3, get_domain("stroke"))
    assert report.count == 3
    assert report.reference_sse == pytest.approx(report.blank_sse)
    expected_blank = float(np.mean([np.sum(s.target.astype(np.float64) ** 2) for s in samples]))
    assert report.blank_sse == pytest.approx(expected_blank, rel=1e-6)


def test_rollout_replays_actions_through_the_reference_renderer(rng, frozen_canvas, drawer):
    samples = _samples(rng, n=2)
    rollout = drawer_rollout(drawer, frozen_canvas, samples, 3, get_domain("stroke"))
    assert rollout.vectors.shape == (2, 3, 6)
    assert len(rollout.actions) == 2 and len(rollout.actions[0]) == 3
    assert rollout.reference_finals.shape == (2, 1, 16, 16)
    with pytest.raises(DatasetError):
        drawer_rollout(drawer, frozen_canvas, [], 3, get_domain("stroke"))


def _colored(color):
    return StrokeAction(x0=0, y0=0, cx=1, cy=1, x1=2, y1=2, color=color)


def test_color_class_accuracy_votes_by_nearest_palette_entry():
    palette = default_palette()
    actions = [
        [_colored(palette[3]), _colored(palette[3]), _colored(palette[5])],
        [_colored(palette[1]), _colored(palette[2])],
        [StrokeAction(x0=0, y0=0, cx=1, cy=1, x1=2, y1=2)],
    ]
    # second sample ties 1 vs 2, lowest index wins; third has no colour at all
    assert color_class_accuracy(actions, [3, 1, 0], palette) == pytest.approx(2 / 3)
    assert color_class_accuracy(actions, [5, 2, 0], palette) == 0.0
    with pytest.raises(DatasetError):
        color_class_accuracy(actions, [1], palette)

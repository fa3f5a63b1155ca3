import numpy as np
import pytest
from conftest import tiny_canvas, tiny_drawer
from pydantic import ValidationError

from src.autodiff import ops
from src.autodiff.gradcheck import gradcheck
from src.canvas.network import CanvasNet, CanvasSpec, predict
from src.canvas.rollouts import RolloutConfig, episode_count, sample_rollouts, stack_triples, unstack_triples
from src.canvas.training import CanvasTrainConfig, drift_mae, epoch_order, eval_canvas, train_canvas
from src.drawer.training import DrawerTrainConfig, train_drawer
from src.errors import DatasetError, ShapeError
from src.render.actions import get_domain
from src.tasks.dataset import TaskSample


def _rollouts(n=12, threads=1, domain="stroke", seed=5):
    return sample_rollouts(
        RolloutConfig(domain=domain, image_size=16, episode_length=4, n_triples=n, seed=seed, threads=threads)
    )


def test_rollouts_emit_exactly_n_triples():
    triples = _rollouts(n=10)
    assert len(triples) == 10
    assert episode_count(RolloutConfig(n_triples=10, episode_length=4)) == 3


def test_rollout_episodes_chain_and_reset():
    triples = _rollouts(n=8)
    domain = get_domain("stroke")
    assert not triples[0].x.any()
    assert not triples[4].x.any()
    for i in (1, 2, 3, 5):
        np.testing.assert_array_equal(triples[i].x, triples[i - 1].x_next)
    for t in triples:
        assert t.y.shape == (domain.dim,)
        assert np.all(np.abs(t.y) <= 1.0)
        np.testing.assert_array_equal(t.x_next, domain.render(t.x, domain.decode(t.y, 16)))


def test_rollouts_do_not_depend_on_thread_count():
    single = stack_triples(_rollouts(n=20, threads=1))
    pooled = stack_triples(_rollouts(n=20, threads=4))
    for a, b in zip(single, pooled):
        np.testing.assert_array_equal(a, b)


def test_rollout_config_rejects_zero_triples():
    with pytest.raises(ValidationError):
        RolloutConfig(n_triples=0)


def test_stack_unstack_keeps_order():
    triples = _rollouts(n=5)
    again = unstack_triples(*stack_triples(triples))
    for a, b in zip(triples, again):
        np.testing.assert_array_equal(a.y, b.y)


def test_forward_shape_and_range(rng):
    net = tiny_canvas()
    x = rng.uniform(size=(3, 1, 16, 16)).astype(np.float32)
    y = rng.uniform(-1, 1, size=(3, 6)).astype(np.float32)
    out = predict(net, x, y)
    assert out.shape == (3, 1, 16, 16)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_forward_rejects_bad_shapes(rng):
    net = tiny_canvas()
    with pytest.raises(ShapeError):
        net(np.zeros((1, 1, 32, 32)), np.zeros((1, 6)))
    with pytest.raises(ShapeError):
        net(np.zeros((1, 1, 16, 16)), np.zeros((1, 7)))
    with pytest.raises(ShapeError, match="divisible by 16"):
        CanvasNet(CanvasSpec(domain="stroke", channels=1, height=24, width=24, action_dim=6))


def test_prism_canvas_covers_the_three_view_composite():
    net = tiny_canvas("prism")
    assert net.state_shape == (3, 16, 48)
    out = predict(net, np.zeros((1, 3, 16, 48), dtype=np.float32), np.zeros((1, 9), dtype=np.float32))
    assert out.shape == (1, 3, 16, 48)


def test_output_gradient_wrt_action_matches_finite_differences(rng):
    net = tiny_canvas(seed=2)
    net.freeze()
    x = rng.uniform(size=(1, 1, 16, 16))
    y = rng.uniform(-0.8, 0.8, size=(1, 6))
    result = gradcheck(lambda action: ops.sum_all(net(x, action)), [y], h=1e-4)
    assert result.passed, result.mismatches
    assert result.checked == 6


def test_epoch_order_depends_only_on_seed_and_epoch():
    np.testing.assert_array_equal(epoch_order(50, 3, 7), epoch_order(50, 3, 7))
    assert not np.array_equal(epoch_order(50, 3, 7), epoch_order(50, 3, 8))
    assert sorted(epoch_order(50, 3, 7)) == list(range(50))


def test_training_is_deterministic_and_reduces_loss():
    triples = _rollouts(n=16)
    cfg = CanvasTrainConfig(epochs=3, batch_size=8, lr=3e-3, seed=1)
    first, second = tiny_canvas(seed=4), tiny_canvas(seed=4)
    history = train_canvas(first, triples, cfg)
    assert history == train_canvas(second, triples, cfg)
    assert first.checksum() == second.checksum()
    assert len(history) == 3
    assert history[-1] < history[0]


def test_on_epoch_reports_every_epoch_from_start():
    seen = []
    train_canvas(
        tiny_canvas(), _rollouts(n=8), CanvasTrainConfig(epochs=3, batch_size=8), start_epoch=1, on_epoch=seen.append
    )
    assert [m.epoch for m in seen] == [1, 2]


def test_training_needs_triples():
    with pytest.raises(DatasetError):
        train_canvas(tiny_canvas(), [], CanvasTrainConfig(epochs=1))


def test_eval_canvas_and_drift():
    net = tiny_canvas()
    report = eval_canvas(net, _rollouts(n=6))
    assert report.count == 6
    assert report.mae >= 0.0 and report.sse >= 0.0
    drift = drift_mae(net, get_domain("stroke"), n_actions=3, n_sequences=2)
    assert drift.single_step_mae > 0.0
    assert drift.n_sequences == 2


def test_frozen_canvas_is_untouched_by_drawer_training(rng):
    canvas = tiny_canvas()
    canvas.freeze()
    before = canvas.checksum()
    samples = [TaskSample(hint=h, target=h.copy()) for h in rng.uniform(size=(4, 1, 16, 16)).astype(np.float32)]
    train_drawer(tiny_drawer(), canvas, samples, DrawerTrainConfig(n_steps=2, epochs=2, batch_size=2))
    assert canvas.checksum() == before
    assert canvas.spec.frozen

import gzip
import struct

import numpy as np
import pytest
from PIL import Image

from src.errors import ConfigError, DatasetError, MissingPrerequisiteError
from src.models.config import build_run_config
from src.render.color import lab_to_srgb
from src.render.raster import render_sequence
from src.tasks.colored_mnist import default_palette, make_colored_mnist
from src.tasks.dataset import Dataset, DatasetMeta, TaskSample, load_dataset, save_dataset, stack_samples
from src.tasks.floorplans import MIN_ROOM_SIDE, ROOM_PALETTE, floorplan_iou, gen_floorplans, label_map, split_rooms
from src.tasks.image_dir import load_image_dir
from src.tasks.line_art import gen_line_art
from src.tasks.mnist import IMAGE_MAGIC, LABEL_MAGIC, load_mnist_idx, read_idx_images, read_idx_labels, upscale_digit
from src.tasks.prisms import gen_prism_task
from src.tasks.registry import build_dataset, cache_dir


def _write_idx_images(path, images, magic=IMAGE_MAGIC, compress=False):
    count, rows, cols = images.shape
    payload = struct.pack(">4i", magic, count, rows, cols) + images.astype(np.uint8).tobytes()
    opener = gzip.open if compress else open
    with opener(path, "wb") as f:
        f.write(payload)
    return path


def _write_idx_labels(path, labels, magic=LABEL_MAGIC):
    path.write_bytes(struct.pack(">2i", magic, len(labels)) + bytes(labels))
    return path


@pytest.fixture
def digits(rng):
    return rng.integers(0, 256, size=(5, 28, 28)).astype(np.uint8)


@pytest.mark.parametrize("compress", [False, True])
def test_idx_images_plain_and_gzipped(tmp_path, digits, compress):
    path = _write_idx_images(tmp_path / "images.idx", digits, compress=compress)
    np.testing.assert_array_equal(read_idx_images(path), digits)


def test_idx_rejects_bad_magic_and_truncation(tmp_path, digits):
    with pytest.raises(DatasetError, match="magic"):
        read_idx_images(_write_idx_images(tmp_path / "labels-as-images.idx", digits, magic=LABEL_MAGIC))
    path = _write_idx_images(tmp_path / "images.idx", digits)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(DatasetError, match="header promises"):
        read_idx_images(path)
    (tmp_path / "tiny.idx").write_bytes(b"\x00\x00")
    with pytest.raises(DatasetError, match="truncated"):
        read_idx_images(tmp_path / "tiny.idx")
    with pytest.raises(MissingPrerequisiteError):
        read_idx_images(tmp_path / "absent.idx")


def test_idx_labels(tmp_path):
    np.testing.assert_array_equal(read_idx_labels(_write_idx_labels(tmp_path / "l.idx", [3, 1, 4])), [3, 1, 4])
    with pytest.raises(DatasetError):
        read_idx_labels(_write_idx_labels(tmp_path / "bad.idx", [1], magic=IMAGE_MAGIC))


def test_upscale_pads_centres_and_doubles():
    digit = np.zeros((28, 28), dtype=np.uint8)
    digit[0, 0] = 255
    canvas = upscale_digit(digit, 64)
    assert canvas.shape == (1, 64, 64)
    # 28 -> padded 32 (offset 2) -> doubled
    np.testing.assert_array_equal(canvas[0, 4:6, 4:6], 1.0)
    assert canvas.sum() == 4.0
    with pytest.raises(DatasetError):
        upscale_digit(np.zeros((40, 40), dtype=np.uint8), 64)


def test_load_mnist_recreation_task(tmp_path, digits):
    images = _write_idx_images(tmp_path / "images.idx", digits)
    labels = _write_idx_labels(tmp_path / "labels.idx", [7, 2, 1, 0, 4])
    dataset = load_mnist_idx(images, labels, limit=3)
    assert len(dataset) == 3
    assert dataset.labels == [7, 2, 1]
    sample = dataset.samples[0]
    np.testing.assert_array_equal(sample.hint, sample.target)
    assert sample.hint.shape == (1, 64, 64)
    with pytest.raises(DatasetError, match="labels"):
        load_mnist_idx(images, _write_idx_labels(tmp_path / "short.idx", [1, 2]))


def test_image_dir_inverts_dark_on_light_and_skips_unreadable(tmp_path):
    light = np.full((16, 16), 255, dtype=np.uint8)
    light[4:12, 7:9] = 0
    Image.fromarray(light).save(tmp_path / "b.png")
    dark = np.zeros((16, 16), dtype=np.uint8)
    dark[2, 2] = 255
    Image.fromarray(dark).save(tmp_path / "a.png")
    (tmp_path / "c.png").write_bytes(b"not a png")

    dataset = load_image_dir(tmp_path, size=16)
    assert len(dataset) == 2
    first, second = (s.hint[0] for s in dataset.samples)
    assert first[2, 2] == 1.0 and first.sum() == 1.0
    assert second[5, 7] == 1.0 and second[0, 0] == 0.0


def test_image_dir_binarizes_and_errors(tmp_path):
    ramp = np.tile(np.linspace(0, 120, 16).astype(np.uint8), (16, 1))
    Image.fromarray(ramp).save(tmp_path / "ramp.png")
    hint = load_image_dir(tmp_path, size=16, binarize_threshold=0.25).samples[0].hint
    assert set(np.unique(hint)) <= {0.0, 1.0}
    with pytest.raises(MissingPrerequisiteError):
        load_image_dir(tmp_path / "missing")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DatasetError):
        load_image_dir(empty)


def _mnist_like(n=3, size=16):
    samples = []
    for i in range(n):
        hint = np.zeros((1, size, size), dtype=np.float32)
        hint[0, 4:12, 6 + i] = 0.9
        hint[0, 0, 0] = 0.3
        samples.append(TaskSample(hint=hint, target=hint.copy(), label=i))
    return Dataset(samples, DatasetMeta(task="mnist", image_size=size, channels=1, domain="stroke"))


def test_colored_mnist_paints_digits_in_their_class_colour():
    palette = default_palette()
    dataset = make_colored_mnist(_mnist_like())
    assert dataset.meta.domain == "color_stroke"
    for sample in dataset.samples:
        assert sample.hint.shape == sample.target.shape == (3, 16, 16)
        np.testing.assert_allclose(sample.target[:, 5, 6 + sample.label], lab_to_srgb(palette[sample.label]), atol=1e-6)
        # below the 0.5 threshold stays black
        np.testing.assert_array_equal(sample.target[:, 0, 0], 0.0)
        np.testing.assert_array_equal(sample.hint[0], sample.hint[2])


def test_colored_mnist_needs_valid_labels():
    with pytest.raises(DatasetError):
        make_colored_mnist(_mnist_like(), labels=[0, 1])
    with pytest.raises(DatasetError, match="palette"):
        make_colored_mnist(_mnist_like(), labels=[0, 1, 10])


def test_default_palette_has_ten_distinct_colours():
    palette = default_palette()
    assert len(palette) == 10
    assert len({tuple(np.round(c.as_array(), 6)) for c in palette}) == 10


def test_split_rooms_partitions_the_interior(rng):
    interior = (4, 4, 124, 124)
    rooms = split_rooms(rng, interior, 6)
    assert len(rooms) == 6
    assert sum((x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in rooms) == 120 * 120
    covered = np.zeros((128, 128), dtype=int)
    for x0, y0, x1, y1 in rooms:
        assert min(x1 - x0, y1 - y0) >= MIN_ROOM_SIDE
        covered[y0:y1, x0:x1] += 1
    assert covered[4:124, 4:124].min() == covered.max() == 1


def test_floorplans_are_deterministic_and_reachable():
    first, second = gen_floorplans(3, seed=5, size=64), gen_floorplans(3, seed=5, size=64)
    for a, b, rects in zip(first.samples, second.samples, first.ground_truth):
        np.testing.assert_array_equal(a.target, b.target)
        np.testing.assert_array_equal(a.hint, b.hint)
        np.testing.assert_array_equal(render_sequence(np.zeros_like(a.target), rects), a.target)
    assert first.meta.domain == "rect"
    assert first.samples[0].hint.shape == (3, 64, 64)


def test_floorplan_iou():
    rects = gen_floorplans(1, seed=2, size=64).ground_truth[0]
    assert floorplan_iou(rects, rects, size=64) == 1.0
    assert floorplan_iou([], rects, size=64) == 0.0
    assert floorplan_iou([], [], size=64) == 1.0
    labels = label_map(rects, 64)
    assert labels[0, 0] == -1
    assert set(np.unique(labels)) - {-1} <= set(range(len(ROOM_PALETTE)))


def test_prism_scenes_are_three_view_composites():
    dataset = gen_prism_task(3, seed=1, size=16)
    for sample, prisms in zip(dataset.samples, dataset.ground_truth):
        assert sample.target.shape == (3, 16, 48)
        assert 1 <= len(prisms) <= 3
        np.testing.assert_array_equal(render_sequence(np.zeros_like(sample.target), prisms), sample.target)


def test_line_art_corpus():
    dataset = gen_line_art(2, seed=4, size=64, min_strokes=3, max_strokes=5)
    for sample, strokes in zip(dataset.samples, dataset.ground_truth):
        assert sample.hint.shape == (1, 64, 64)
        assert 3 <= len(strokes) <= 5
        assert sample.hint.max() > 0.0
        np.testing.assert_array_equal(render_sequence(np.zeros_like(sample.target), strokes), sample.target)


def test_split_holds_out_the_tail():
    dataset = _mnist_like(n=10)
    train, held = dataset.split(0.2)
    assert len(train) == 8 and len(held) == 2
    assert held.labels == [8, 9]
    assert len(dataset.split(0.0)[1]) == 0


def test_dataset_rejects_mixed_shapes():
    with pytest.raises(DatasetError):
        Dataset(
            [TaskSample(hint=np.zeros((1, 16, 16)), target=np.zeros((1, 16, 16))),
             TaskSample(hint=np.zeros((1, 32, 32)), target=np.zeros((1, 32, 32)))],
            DatasetMeta(task="mnist", image_size=16, channels=1, domain="stroke"),
        )
    with pytest.raises(DatasetError):
        stack_samples([])


def test_dataset_cache_round_trip(tmp_path):
    dataset = gen_floorplans(2, seed=3, size=32)
    save_dataset(dataset, tmp_path / "cache")
    loaded = load_dataset(tmp_path / "cache")
    assert loaded.meta == dataset.meta
    assert loaded.ground_truth == dataset.ground_truth
    for a, b in zip(dataset.samples, loaded.samples):
        np.testing.assert_array_equal(a.target, b.target)
        assert b.initial is None
    with pytest.raises(ConfigError):
        save_dataset(dataset, tmp_path / "cache")
    with pytest.raises(MissingPrerequisiteError):
        load_dataset(tmp_path / "nothing")


def test_registry_caches_generated_tasks(tmp_path):
    config = build_run_config(
        {"task": "floorplan", "domain": "rect", "image_size": 32, "n_samples": 2, "seed": 1, "data_dir": tmp_path}
    )
    first = build_dataset(config)
    assert (cache_dir(config) / "manifest.json").exists()
    second = build_dataset(config)
    for a, b in zip(first.samples, second.samples):
        np.testing.assert_array_equal(a.target, b.target)


def test_registry_cache_is_keyed_by_domain(tmp_path):
    values = {"task": "line_art", "image_size": 16, "n_samples": 2, "seed": 1, "data_dir": tmp_path}
    thin = build_run_config({**values, "domain": "stroke"})
    thick = build_run_config({**values, "domain": "stroke_thick"})
    assert cache_dir(thin) != cache_dir(thick)
    assert build_dataset(thin).meta.domain == "stroke"
    assert build_dataset(thick).meta.domain == "stroke_thick"
    assert (cache_dir(thin) / "manifest.json").exists() and (cache_dir(thick) / "manifest.json").exists()


def test_registry_passes_the_binarize_threshold_to_image_dirs(tmp_path):
    ramp = np.tile(np.linspace(0, 120, 16).astype(np.uint8), (16, 1))
    Image.fromarray(ramp).save(tmp_path / "ramp.png")
    config = build_run_config(
        {"task": "image_dir", "image_size": 16, "images_path": tmp_path, "binarize_threshold": 0.25, "data_dir": tmp_path}
    )
    dataset = build_dataset(config)
    assert set(np.unique(dataset.samples[0].hint)) == {0.0, 1.0}
    assert dataset.meta.params["binarize_threshold"] == 0.25
    with pytest.raises(ConfigError):
        build_run_config({"task": "image_dir", "binarize_threshold": 1.5})


def test_registry_requires_mnist_paths(tmp_path):
    config = build_run_config({"task": "mnist", "data_dir": tmp_path})
    with pytest.raises(ConfigError, match="IMAGES_PATH"):
        build_dataset(config)

import json

import pytest

from src.errors import ConfigError, MissingPrerequisiteError
from src.models.config import RunConfig, build_run_config, default_task, dump_run_config, load_run_config
from src.models.reports import EpochMetrics
from src.utils.json_saver import ArtifactSaver, stable_json


def test_dump_and_load_round_trip(tmp_path):
    config = build_run_config({"task": "floorplan", "domain": "rect", "image_size": 32, "use_lstm": False})
    path = tmp_path / "run.env"
    path.write_text(dump_run_config(config), encoding="utf-8")
    assert load_run_config(path) == config


def test_dump_is_sorted_and_skips_unset_paths():
    lines = dump_run_config(RunConfig()).splitlines()
    assert lines == sorted(lines)
    assert "USE_LSTM=true" in lines
    assert not any(line.startswith("IMAGES_PATH=") for line in lines)


def test_precedence_defaults_then_file_then_overrides(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("SEED=3\nEPOCHS=7\n", encoding="utf-8")
    config = load_run_config(path, overrides={"seed": 11, "lr": None}, defaults={"seed": 1, "batch_size": 5})
    assert config.seed == 11
    assert config.epochs == 7
    assert config.batch_size == 5
    assert config.lr == RunConfig().lr


def test_empty_values_fall_back_to_defaults(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("IMAGES_PATH=\nSEED=2\n", encoding="utf-8")
    config = load_run_config(path)
    assert config.images_path is None and config.seed == 2


@pytest.mark.parametrize(
    "values",
    [
        {"task": "floorplan", "domain": "stroke"},
        {"slide_field": 32, "slide_stride": 48},
        {"slide_field": 64, "coarse_field": 64},
        {"image_size": 8},
        {"n_triples": 0},
        {"domain": "watercolour"},
    ],
)
def test_invalid_values_raise_config_error(values):
    with pytest.raises(ConfigError):
        build_run_config(values)


def test_unknown_keys_and_missing_files(tmp_path):
    with pytest.raises(ConfigError, match="Unknown config key 'COLOUR'"):
        build_run_config({"COLOUR": "red"})
    path = tmp_path / "typo.env"
    path.write_text("EPOCS=3\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(path)
    with pytest.raises(MissingPrerequisiteError):
        load_run_config(tmp_path / "absent.env")


def test_default_task_per_domain():
    assert default_task("stroke") == "mnist"
    assert default_task("color_stroke") == "colored_mnist"
    assert default_task("rect") == "floorplan"
    assert default_task("prism") == "prism"
    assert default_task("unknown") is None


def test_slide_and_hierarchy_configs():
    config = build_run_config({"slide_field": 32, "slide_stride": 16, "coarse_field": 64, "steps_per_section": 3})
    slide = config.slide_config()
    assert (slide.field, slide.stride, slide.steps_per_section) == (32, 16, 3)
    hierarchy = config.hierarchy_config()
    assert (hierarchy.coarse.field, hierarchy.coarse.stride) == (64, 32)
    assert hierarchy.fine == slide
    with pytest.raises(ConfigError, match="hierarchy"):
        RunConfig().hierarchy_config()


def test_saver_refuses_to_overwrite_without_force(tmp_path):
    saver = ArtifactSaver(tmp_path / "run")
    assert saver.claim("eval.json") == [tmp_path / "run" / "eval.json"]
    saver.save_json("eval.json", {"b": 1, "a": 2})
    with pytest.raises(ConfigError, match="--force"):
        saver.claim("eval.json", "other.json")
    assert ArtifactSaver(tmp_path / "run", force=True).claim("eval.json")
    assert saver.load_json("eval.json") == {"a": 2, "b": 1}


def test_metrics_append_and_truncate_for_resume(tmp_path):
    saver = ArtifactSaver(tmp_path)
    saver.reset_metrics()
    for epoch in range(3):
        saver.append_metrics(EpochMetrics(epoch=epoch, loss=1.0 / (epoch + 1), wall_time=0.5))
    assert [m["epoch"] for m in saver.read_metrics()] == [0, 1, 2]
    saver.reset_metrics(keep_epochs=2)
    assert [m["epoch"] for m in saver.read_metrics()] == [0, 1]
    saver.reset_metrics()
    assert saver.read_metrics() == []


def test_stable_json_sorts_keys_and_dumps_models():
    assert stable_json({"b": 1, "a": 2}) == stable_json({"a": 2, "b": 1})
    payload = json.loads(stable_json(EpochMetrics(epoch=1, loss=0.25, wall_time=1.0)))
    assert payload["epoch"] == 1 and payload["loss"] == 0.25

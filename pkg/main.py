"""Canvas-drawer pipeline command line.

Commands: rollouts, train-canvas, train-drawer, train-sliding, infer, eval.
Every command reads a flat KEY=value run config (``--config``), applies the
CLI flags on top, and writes the effective config next to its artifacts.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog

logger = structlog.get_logger(__name__)

THREAD_ENV_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def pin_threads(threads: int) -> None:
    """Cap the BLAS pools; only effective before numpy is first imported."""
    for name in THREAD_ENV_VARS:
        os.environ[name] = str(threads)


# artifact locations


def rollout_dir(config) -> Path:
    return config.data_dir / "rollouts" / f"{config.domain}_{config.image_size}_seed{config.seed}"


def canvas_dir(config, domain: Optional[str] = None, size: Optional[int] = None) -> Path:
    return config.checkpoint_dir / f"canvas_{domain or config.domain}_{size or config.image_size}"


def drawer_dir(config) -> Path:
    return config.checkpoint_dir / f"drawer_{config.task}_{config.domain}_{config.image_size}"


def sliding_dir(config) -> Path:
    return config.checkpoint_dir / f"sliding_{config.task}_{config.domain}_f{config.slide_field}"


def _require(path: Path, what: str) -> Path:
    from src.errors import MissingPrerequisiteError

    if not path.exists():
        raise MissingPrerequisiteError(path, what)
    return path


def _load_frozen_canvas(config, domain: Optional[str] = None, size: Optional[int] = None):
    from src.errors import FrozenCanvasError
    from src.storage.models import load_canvas

    path = _require(canvas_dir(config, domain, size) / "canvas.cdck", "canvas checkpoint")
    canvas, _, _ = load_canvas(path)
    if not canvas.frozen:
        raise FrozenCanvasError(f"{path} was saved before canvas training finished; rerun train-canvas --resume")
    return canvas


def _dir_bytes(directory: Path) -> int:
    return sum(p.stat().st_size for p in directory.iterdir() if p.is_file())


class EpochRecorder:
    """on_epoch callback: append metrics and checkpoint the network after every epoch."""

    def __init__(self, saver, checkpoint: Path, net, state, optimizer):
        self.saver = saver
        self.checkpoint = checkpoint
        self.net = net
        self.state = state
        self.optimizer = optimizer

    def __call__(self, metrics) -> None:
        from src.storage.models import save_network

        self.saver.append_metrics(metrics)
        self.state["history"].append(metrics.loss)
        self.state["completed_epochs"] = metrics.epoch + 1
        save_network(self.checkpoint, self.net, self.state, self.optimizer)


def _start_training(saver, checkpoint: Path, resume: bool, loader, builder, lr: float, state_factory):
    """Either resume a checkpoint (truncating metrics to its progress) or claim a fresh artifact directory.

    Returns:
        (network, train state, optimizer, start epoch)
    """
    from src.autodiff.optim import Adam
    from src.storage.models import restore_optimizer
    from src.utils.json_saver import CONFIG_FILE, METRICS_FILE

    if resume and checkpoint.exists():
        net, state, arrays = loader(checkpoint)
        optimizer = restore_optimizer(Adam(net.parameters(), lr=lr), arrays)
        start = state["completed_epochs"]
        saver.reset_metrics(keep_epochs=start)
        logger.info(f"Resuming {checkpoint} after epoch {start}")
        return net, state, optimizer, start

    saver.claim(checkpoint.name, METRICS_FILE, CONFIG_FILE)
    net = builder()
    saver.reset_metrics()
    return net, state_factory(), Adam(net.parameters(), lr=lr), 0


# commands


def cmd_rollouts(config, args) -> int:
    from src.canvas.rollouts import RolloutConfig, sample_rollouts
    from src.storage.rollouts import save_rollouts
    from src.utils.json_saver import ArtifactSaver, file_sha256
    from src.models.config import dump_run_config

    out = Path(args.out) if args.out else rollout_dir(config)
    cfg = RolloutConfig(
        domain=config.domain,
        image_size=config.image_size,
        episode_length=config.episode_length,
        n_triples=config.n_triples,
        seed=config.seed,
        threads=config.threads,
    )
    triples = sample_rollouts(cfg)
    manifest = save_rollouts(out, triples, cfg, fmt=args.format, force=args.force)
    ArtifactSaver(out, force=True).save_config(dump_run_config(config))

    print(f"✅ {len(triples)} triples, {_dir_bytes(out)} bytes in {out}")
    print(f"   manifest sha256 {file_sha256(manifest)}")
    return 0


def cmd_train_canvas(config, args) -> int:
    from src.canvas.network import build_canvas
    from src.canvas.training import CanvasTrainConfig, drift_mae, eval_canvas, train_canvas
    from src.errors import ConfigError, InputMismatchError
    from src.models.config import dump_run_config
    from src.render.actions import get_domain
    from src.state.models import initial_train_state
    from src.storage.models import load_canvas, save_network
    from src.storage.rollouts import load_rollouts
    from src.utils.json_saver import ArtifactSaver

    domain = get_domain(config.domain, config.fixed_thickness)
    source = Path(args.rollouts) if args.rollouts else rollout_dir(config)
    triples = load_rollouts(_require(source, "rollout dataset"))
    expected = domain.canvas_shape(config.image_size)
    if triples[0].x.shape != expected:
        raise InputMismatchError(f"Rollouts in {source} are {triples[0].x.shape}, expected {expected} for IMAGE_SIZE={config.image_size}")
    n_eval = int(round(len(triples) * config.eval_fraction))
    train, held_out = triples[: len(triples) - n_eval], triples[len(triples) - n_eval :]

    saver = ArtifactSaver(canvas_dir(config), force=args.force)
    checkpoint = saver.path("canvas.cdck")
    net, state, optimizer, start = _start_training(
        saver,
        checkpoint,
        args.resume,
        load_canvas,
        lambda: build_canvas(config.domain, config.image_size, seed=config.seed),
        config.canvas_lr,
        lambda: initial_train_state("canvas", config.model_dump(mode="json")),
    )
    if net.frozen:
        if state["completed_epochs"] >= config.canvas_epochs:
            print(f"✅ {checkpoint} already finished {state['completed_epochs']} epochs")
            return 0
        raise ConfigError(f"{checkpoint} is frozen after {state['completed_epochs']} epochs; start a fresh run with --force")
    saver.save_config(dump_run_config(config))

    cfg = CanvasTrainConfig(
        epochs=config.canvas_epochs, batch_size=config.canvas_batch_size, lr=config.canvas_lr, seed=config.seed
    )
    train_canvas(net, train, cfg, optimizer, start, EpochRecorder(saver, checkpoint, net, state, optimizer))
    net.freeze()
    save_network(checkpoint, net, state, optimizer)

    report: Dict[str, Any] = {"drift": drift_mae(net, domain, seed=config.seed).model_dump()}
    if held_out:
        report["held_out"] = eval_canvas(net, held_out, config.canvas_batch_size).model_dump()
    saver.save_json("eval.json", report)
    print(f"✅ Canvas network frozen and saved to {checkpoint}")
    return 0


def task_extras(config, dataset, rollout) -> Dict[str, float]:
    """Per-task scores on top of the two SSE variants."""
    import numpy as np

    from src.drawer.training import color_class_accuracy
    from src.tasks.colored_mnist import default_palette
    from src.tasks.floorplans import floorplan_iou

    extras: Dict[str, float] = {}
    if config.task == "colored_mnist" and dataset.labels is not None:
        extras["color_accuracy"] = color_class_accuracy(rollout.actions, dataset.labels, default_palette())
    if config.task == "floorplan" and dataset.ground_truth:
        scores = [floorplan_iou(pred, gt, config.image_size) for pred, gt in zip(rollout.actions, dataset.ground_truth)]
        extras["floorplan_iou"] = float(np.mean(scores))
    return extras


def evaluate_drawer(config, drawer, canvas, dataset):
    from src.drawer.training import drawer_rollout, summarize_rollout
    from src.render.actions import get_domain

    domain = get_domain(config.domain, config.fixed_thickness)
    rollout = drawer_rollout(drawer, canvas, dataset.samples, config.n_steps, domain, config.batch_size)
    return summarize_rollout(rollout, dataset.samples).model_copy(update=task_extras(config, dataset, rollout))


def _check_sample_shape(dataset, canvas) -> None:
    from src.errors import InputMismatchError

    if dataset.samples and dataset.samples[0].target.shape != canvas.state_shape:
        raise InputMismatchError(
            f"Dataset targets are {dataset.samples[0].target.shape}, canvas network expects {canvas.state_shape}"
        )


def cmd_train_drawer(config, args) -> int:
    from src.drawer.network import build_drawer
    from src.drawer.training import DrawerTrainConfig, train_drawer
    from src.errors import ArtifactError
    from src.models.config import dump_run_config
    from src.state.models import initial_train_state
    from src.storage.models import load_drawer, save_network
    from src.tasks.registry import build_dataset
    from src.utils.json_saver import ArtifactSaver

    canvas = _load_frozen_canvas(config)
    dataset = build_dataset(config)
    _check_sample_shape(dataset, canvas)
    train, held_out = dataset.split(config.eval_fraction)
    hint_channels = dataset.samples[0].hint.shape[0]

    saver = ArtifactSaver(drawer_dir(config), force=args.force)
    checkpoint = saver.path("drawer.cdck")
    drawer, state, optimizer, start = _start_training(
        saver,
        checkpoint,
        args.resume,
        load_drawer,
        lambda: build_drawer(config.domain, config.image_size, config.use_lstm, hint_channels, seed=config.seed),
        config.lr,
        lambda: initial_train_state("drawer", config.model_dump(mode="json"), canvas.checksum()),
    )
    if state["canvas_checksum"] != canvas.checksum():
        raise ArtifactError(f"{checkpoint} was trained against a different canvas network")
    saver.save_config(dump_run_config(config))

    cfg = DrawerTrainConfig(
        n_steps=config.n_steps, epochs=config.epochs, batch_size=config.batch_size, lr=config.lr, seed=config.seed
    )
    train_drawer(drawer, canvas, train.samples, cfg, optimizer, start, EpochRecorder(saver, checkpoint, drawer, state, optimizer))
    save_network(checkpoint, drawer, state, optimizer)

    if held_out.samples:
        saver.save_json("eval.json", evaluate_drawer(config, drawer, canvas, held_out).model_dump())
    print(f"✅ Drawer saved to {checkpoint}")
    return 0


def cmd_train_sliding(config, args) -> int:
    from src.drawer.network import build_drawer
    from src.drawer.training import DrawerTrainConfig
    from src.errors import ConfigError
    from src.models.config import dump_run_config
    from src.render.actions import get_domain
    from src.state.models import initial_train_state
    from src.storage.models import load_drawer, save_network
    from src.sliding.training import slide_train, train_hierarchy
    from src.tasks.registry import build_dataset
    from src.utils.json_saver import CONFIG_FILE, METRICS_FILE, ArtifactSaver

    domain = get_domain(config.domain, config.fixed_thickness)
    canvas = _load_frozen_canvas(config, size=config.slide_field)
    corpus = [s.hint for s in build_dataset(config).samples]
    cfg = DrawerTrainConfig(epochs=config.epochs, batch_size=config.batch_size, lr=config.lr, seed=config.seed)
    saver = ArtifactSaver(sliding_dir(config), force=args.force)
    checkpoint = saver.path("drawer.cdck")

    def new_state(net_canvas):
        return initial_train_state("drawer", config.model_dump(mode="json"), net_canvas.checksum())

    def record(level, metrics):
        saver.append_metrics({"level": level, **metrics.model_dump(mode="json")})

    if config.coarse_field:
        if args.resume:
            raise ConfigError("--resume is not supported for hierarchical sliding training")
        hcfg = config.hierarchy_config()
        coarse_canvas = _load_frozen_canvas(config, size=config.coarse_field)
        saver.claim(checkpoint.name, "coarse_drawer.cdck", METRICS_FILE, CONFIG_FILE)
        saver.reset_metrics()
        saver.save_config(dump_run_config(config))
        coarse = build_drawer(config.domain, hcfg.coarse.field, config.use_lstm, seed=config.seed)
        fine = build_drawer(config.domain, hcfg.fine.field, config.use_lstm, seed=config.seed + 1)
        coarse_report, fine_report = train_hierarchy(
            coarse, fine, coarse_canvas, canvas, corpus, hcfg, cfg, domain, config.crops_per_image, on_epoch=record
        )
        for name, net, report, net_canvas in (
            ("coarse_drawer.cdck", coarse, coarse_report, coarse_canvas),
            ("drawer.cdck", fine, fine_report, canvas),
        ):
            state = new_state(net_canvas)
            state.update(completed_epochs=config.epochs, history=report.history)
            save_network(saver.path(name), net, state)
        saver.save_json("sliding.json", {"coarse": coarse_report.model_dump(), "fine": fine_report.model_dump()})
        print(f"✅ Coarse and fine drawers saved to {saver.base_dir}")
        return 0

    slide = config.slide_config()
    drawer, state, optimizer, start = _start_training(
        saver,
        checkpoint,
        args.resume,
        load_drawer,
        lambda: build_drawer(config.domain, slide.field, config.use_lstm, seed=config.seed),
        config.lr,
        lambda: new_state(canvas),
    )
    saver.save_config(dump_run_config(config))
    report = slide_train(
        drawer,
        canvas,
        corpus,
        slide,
        cfg,
        config.crops_per_image,
        optimizer=optimizer,
        start_epoch=start,
        on_epoch=EpochRecorder(saver, checkpoint, drawer, state, optimizer),
    )
    save_network(checkpoint, drawer, state, optimizer)
    saver.save_json("sliding.json", report.model_dump())
    print(f"✅ Sliding drawer saved to {checkpoint} ({report.crops_kept}/{report.crops_sampled} crops kept)")
    return 0


def _infer_whole(config, input_path: Path):
    from src.drawer.training import decode_actions, infer_actions
    from src.errors import InputMismatchError
    from src.render.actions import get_domain
    from src.render.export import load_png
    from src.render.raster import render_actions_on_blank
    from src.storage.models import load_drawer

    domain = get_domain(config.domain, config.fixed_thickness)
    canvas = _load_frozen_canvas(config)
    drawer, _, _ = load_drawer(_require(drawer_dir(config) / "drawer.cdck", "drawer checkpoint"))
    hint = load_png(input_path, drawer.spec.hint_channels)
    if hint.shape != drawer.hint_shape:
        _, h, w = drawer.hint_shape
        raise InputMismatchError(f"{input_path} is {hint.shape[2]}x{hint.shape[1]}, expected {w}x{h}")
    vectors = infer_actions(drawer, canvas, hint, config.n_steps)
    actions = decode_actions(domain, vectors, config.image_size)
    return actions, render_actions_on_blank(domain, actions, config.image_size)


def _infer_sliding(config, input_path: Path, order: str):
    from src.render.actions import get_domain
    from src.render.export import load_png
    from src.sliding.inference import hierarchical_infer, slide_infer
    from src.storage.models import load_drawer

    domain = get_domain(config.domain, config.fixed_thickness)
    hint = load_png(input_path, domain.channels)
    canvas = _load_frozen_canvas(config, size=config.slide_field)
    drawer, _, _ = load_drawer(_require(sliding_dir(config) / "drawer.cdck", "sliding drawer checkpoint"))
    if config.coarse_field:
        coarse_canvas = _load_frozen_canvas(config, size=config.coarse_field)
        coarse, _, _ = load_drawer(_require(sliding_dir(config) / "coarse_drawer.cdck", "coarse drawer checkpoint"))
        result = hierarchical_infer(coarse, drawer, coarse_canvas, canvas, hint, config.hierarchy_config(), domain, order)
    else:
        result = slide_infer(drawer, canvas, hint, config.slide_config(), domain, order)
    return result.actions, result.canvas


def cmd_infer(config, args) -> int:
    from src.models.config import dump_run_config
    from src.render.export import action_summary, save_png, write_action_lines, write_svg
    from src.utils.json_saver import CONFIG_FILE, ArtifactSaver

    input_path = _require(Path(args.input), "input image")
    out = Path(args.out) if args.out else config.output_dir / f"infer_{input_path.stem}"
    saver = ArtifactSaver(out, force=args.force)
    vector_output = config.domain != "prism"
    saver.claim("actions.txt", "render.png", CONFIG_FILE, *(["drawing.svg"] if vector_output else []))

    if args.sliding:
        actions, rendered = _infer_sliding(config, input_path, args.order)
    else:
        actions, rendered = _infer_whole(config, input_path)

    write_action_lines(saver.path("actions.txt"), actions)
    save_png(saver.path("render.png"), rendered)
    if vector_output:
        write_svg(saver.path("drawing.svg"), actions, rendered.shape[2], rendered.shape[1])
    saver.save_config(dump_run_config(config))
    logger.info("infer_done", output=str(out), **action_summary(actions))
    print(f"✅ {len(actions)} actions written to {out}")
    return 0


def _parse_seeds(text: str) -> List[int]:
    from src.errors import ConfigError

    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"--seeds expects comma-separated integers, got '{text}'") from e


def cmd_suite(config, args) -> int:
    from src.experiments.suites import run_mnist_table1, run_sketch_table2, suite_summary, suite_table
    from src.models.config import dump_run_config
    from src.tasks.registry import build_dataset
    from src.utils.json_saver import CONFIG_FILE, ArtifactSaver

    seeds = _parse_seeds(args.seeds)
    saver = ArtifactSaver(config.output_dir / f"suite_{args.suite}", force=args.force)
    saver.claim("suite.txt", "suite.jsonl", "result.json", CONFIG_FILE)
    dataset = build_dataset(config)
    if args.suite == "mnist-table1":
        result = run_mnist_table1(config, dataset, _load_frozen_canvas(config), seeds)
    else:
        canvases = {}

        def canvas_for(domain: str):
            if domain not in canvases:
                canvases[domain] = _load_frozen_canvas(config, domain=domain, size=config.slide_field)
            return canvases[domain]

        result = run_sketch_table2(config, dataset, canvas_for, seeds)

    table = suite_table(result)
    lines = [table.to_string(index=False), "", suite_summary(result).to_string(), ""]
    lines += [f"{'PASS' if c.passed else 'FAIL'}  {c.description} ({c.seeds_passed} passed)" for c in result.checks]
    text = "\n".join(lines) + "\n"
    saver.save_text("suite.txt", text)
    saver.save_text("suite.jsonl", table.to_json(orient="records", lines=True) + "\n")
    saver.save_json("result.json", result.model_dump())
    saver.save_config(dump_run_config(config))
    print(text)
    if not result.passed:
        print(f"❌ {args.suite}: at least one ordering failed")
        return 1
    print(f"✅ {args.suite}: all orderings hold")
    return 0


def cmd_eval(config, args) -> int:
    if args.suite:
        return cmd_suite(config, args)

    import pandas as pd

    from src.models.config import dump_run_config
    from src.storage.models import load_drawer
    from src.tasks.registry import build_dataset
    from src.utils.json_saver import CONFIG_FILE, ArtifactSaver

    checkpoint = _require(drawer_dir(config) / "drawer.cdck", "drawer checkpoint")
    canvas = _load_frozen_canvas(config)
    drawer, _, _ = load_drawer(checkpoint)
    dataset = build_dataset(config)
    _check_sample_shape(dataset, canvas)
    _, held_out = dataset.split(config.eval_fraction)
    if not held_out.samples:
        held_out = dataset

    saver = ArtifactSaver(config.output_dir / f"eval_{config.task}_{config.domain}_{config.image_size}", force=args.force)
    saver.claim("eval.txt", "eval.jsonl", CONFIG_FILE)
    result = evaluate_drawer(config, drawer, canvas, held_out)
    row = {"checkpoint": str(checkpoint), "task": config.task, "n_steps": config.n_steps, **result.model_dump(exclude_none=True)}
    table = pd.DataFrame([row])
    saver.save_text("eval.txt", table.to_string(index=False) + "\n")
    saver.save_text("eval.jsonl", table.to_json(orient="records", lines=True) + "\n")
    saver.save_config(dump_run_config(config))
    print(table.to_string(index=False))
    return 0


COMMANDS = {
    "rollouts": cmd_rollouts,
    "train-canvas": cmd_train_canvas,
    "train-drawer": cmd_train_drawer,
    "train-sliding": cmd_train_sliding,
    "infer": cmd_infer,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="canvas-drawer", description="Train and run canvas/drawer networks")
    parser.add_argument("--config", help="KEY=value run config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--size", type=int, dest="image_size", help="Override IMAGE_SIZE")
    parser.add_argument("--force", action="store_true", help="Replace existing outputs")
    parser.add_argument("--resume", action="store_true", help="Continue training from the existing checkpoint")
    parser.add_argument("--log-level")
    parser.add_argument("--json-logs", action=argparse.BooleanOptionalAction, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    rollouts = sub.add_parser("rollouts", help="Sample reference-renderer rollout triples")
    rollouts.add_argument("--domain")
    rollouts.add_argument("--n", type=int, dest="n_triples")
    rollouts.add_argument("--format", choices=("packed", "png"), default="packed")
    rollouts.add_argument("--out")

    canvas = sub.add_parser("train-canvas", help="Train and freeze the canvas network")
    canvas.add_argument("--rollouts", help="Rollout dataset directory")

    sub.add_parser("train-drawer", help="Train a whole-image drawer against the frozen canvas")
    sub.add_parser("train-sliding", help="Train a field-sized drawer on corpus crops")

    infer = sub.add_parser("infer", help="Draw one input image")
    infer.add_argument("input", help="Input PNG")
    infer.add_argument("--out")
    infer.add_argument("--sliding", action="store_true", help="Slide the field-sized drawer over the image")
    infer.add_argument("--order", choices=("row-major", "flood-fill"), default="row-major")

    evaluate = sub.add_parser("eval", help="Score a drawer or run an ablation suite")
    evaluate.add_argument("--suite", choices=("mnist-table1", "sketch-table2"))
    evaluate.add_argument("--seeds", default="0,1,2")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    from src.models.config import default_task

    keys = ("seed", "threads", "domain", "n_triples", "image_size")
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    # rollouts ignore the task, but the config still has to validate
    if args.command == "rollouts" and "domain" in overrides and default_task(overrides["domain"]):
        overrides["task"] = default_task(overrides["domain"])
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    from src.errors import CanvasDrawerError
    from src.models.config import load_run_config
    from src.models.settings import get_settings
    from src.utils.logging import configure_logging

    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, settings.json_logs if args.json_logs is None else args.json_logs)
    try:
        defaults = {
            "data_dir": settings.data_dir,
            "checkpoint_dir": settings.checkpoint_dir,
            "output_dir": settings.output_dir,
            "threads": settings.threads,
        }
        config = load_run_config(args.config, _overrides(args), defaults=defaults)
        pin_threads(config.threads)
        return COMMANDS[args.command](config, args)
    except CanvasDrawerError as e:
        logger.error("command_failed", command=args.command, error=str(e), exit_code=e.exit_code)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\n👋 Interrupted", file=sys.stderr)
        return 130
    except Exception as e:
        logger.exception("unexpected_error", command=args.command)
        print(f"❌ Unexpected error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

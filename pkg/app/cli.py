"""
Command-line interface - entropy maps, dataset scoring, suite generation,
training, evaluation, ablations, sweeps and the HTTP server.

Exit codes: 0 success, 1 runtime failure, 2 usage or I/O error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import anyio
from pydantic import ValidationError

from app.core.actions import StepRecord, parse_records_lenient
from app.core.config import DEFAULT_CONFIG_PATH, RunConfig, config_digest, load_run_config
from app.core.errors import NonFiniteError, PipelineError, RecordError
from app.core.experiments import build_suite, run_ablation, run_sweep
from app.core.grpo import train
from app.core.imaging import load_canonical, write_image
from app.core.policy import PolicyParams
from app.core.reward import RewardBreakdown, RewardConfig, aggregate, score_on_map
from app.core.synthenv import EnvSpec, evaluate, generate_suite, load_suite, training_states, write_suite
from app.core.windowing import GridConfig, entropy_map, entropy_map_to_json, heatmap
from app.utils.cache import load_frame
from app.utils.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.utils.jsonl import append_jsonl, truncate_jsonl, write_jsonl
from app.utils.logs import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.json"


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _grid_from_args(args) -> GridConfig:
    return GridConfig(cell_height=args.cell_height, cell_width=args.cell_width, bins=args.bins)


# ----- entropy-map ----------------------------------------------------------

def cmd_entropy_map(args) -> int:
    grid = _grid_from_args(args)
    gray, scale = load_canonical(args.image, resize=not args.no_resize)
    emap = entropy_map(gray, grid)

    out_dir = Path(args.out_dir)
    stem = Path(args.image).stem
    json_path = out_dir / f"{stem}.entropy.json"
    heat_path = out_dir / f"{stem}.heatmap.pgm"
    _write_json(json_path, entropy_map_to_json(emap))
    write_image(heat_path, heatmap(emap).as_screenshot())

    logger.info(f"Entropy map {emap.rows}x{emap.cols} (scale {scale:.4f}) -> {json_path}, {heat_path}")
    return EXIT_OK


# ----- score ----------------------------------------------------------------

def score_record(
    record: StepRecord,
    base_dir: Path,
    grid: GridConfig,
    cfg: RewardConfig,
    coords_frame: str,
    resize: bool,
) -> Tuple[dict, Optional[RewardBreakdown]]:
    """Score one record; failures become an error line instead of raising."""
    out = {"line": record.line, "image": record.image_ref}
    if record.task_id is not None:
        out["task_id"] = record.task_id
    if record.predicted is None:
        out["error"] = "record has no prediction"
        return out, None

    try:
        _, emap, scale = load_frame(base_dir / record.image_ref, grid, resize)
        pred, tgt = record.predicted, record.target
        if coords_frame == "original":
            w, h = emap.image_width, emap.image_height
            pred, tgt = pred.rescaled(scale, w, h), tgt.rescaled(scale, w, h)
        breakdown = score_on_map(emap, pred, tgt, cfg)
    except (OSError, PipelineError, ValueError) as e:
        logger.warning(f"Record on line {record.line} failed: {e}")
        out["error"] = str(e)
        return out, None
    out.update(breakdown.to_json())
    return out, breakdown


async def _score_parallel(items: Sequence, fn, workers: int) -> list:
    results: list = [None] * len(items)
    limiter = anyio.CapacityLimiter(workers)

    async def _one(idx: int, item) -> None:
        results[idx] = await anyio.to_thread.run_sync(fn, item, limiter=limiter)

    async with anyio.create_task_group() as tg:
        for idx, item in enumerate(items):
            tg.start_soon(_one, idx, item)
    return results


def cmd_score(args) -> int:
    dataset = Path(args.dataset)
    text = dataset.read_text(encoding="utf-8")
    parsed = parse_records_lenient(text)
    grid = _grid_from_args(args)
    cfg = RewardConfig(use_rw=not args.no_rw, use_rd=not args.no_rd)
    base_dir = dataset.parent

    def _score(item):
        if isinstance(item, RecordError):
            return {"line": item.line, "error": item.message}, None
        return score_record(item, base_dir, grid, cfg, args.coords_frame, not args.no_resize)

    if args.workers > 1:
        scored = anyio.run(_score_parallel, parsed, _score, args.workers)
    else:
        scored = [_score(item) for item in parsed]

    lines = [line for line, _ in scored]
    breakdowns = [b for _, b in scored if b is not None]
    errors = len(lines) - len(breakdowns)
    summary = aggregate(breakdowns, errors)

    out_dir = Path(args.out_dir)
    write_jsonl(out_dir / "scores.jsonl", lines)
    _write_json(out_dir / "aggregate.json", summary)
    _print_json(summary)
    logger.info(f"Scored {len(breakdowns)} records ({errors} errors) -> {out_dir}")
    return EXIT_OK


# ----- gen-data -------------------------------------------------------------

def cmd_gen_data(args) -> int:
    spec = EnvSpec(
        image_width=args.width,
        image_height=args.height,
        min_widgets=args.min_widgets,
        max_widgets=args.max_widgets,
        min_widget_size=args.min_size,
        max_widget_size=args.max_size,
        background_intensity=args.background,
    )
    if args.count < 0:
        raise ValueError("count must be non-negative")
    tasks = generate_suite(args.count, args.seed, spec)
    index = write_suite(tasks, args.out_dir, args.suite)
    sys.stdout.write(f"{index}\n")
    return EXIT_OK


# ----- train ----------------------------------------------------------------

def _load_config(args) -> RunConfig:
    path = args.config if args.config else (DEFAULT_CONFIG_PATH if DEFAULT_CONFIG_PATH.exists() else None)
    return load_run_config(path, args.overrides)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(cfg.paths.output_dir)
    metrics_path = out_dir / METRICS_FILE
    ckpt_path = Path(cfg.paths.checkpoint) if cfg.paths.checkpoint else out_dir / CHECKPOINT_FILE
    digest = config_digest(cfg)

    tasks = build_suite(cfg)
    states = training_states(tasks, cfg.grid)

    init_params: Optional[PolicyParams] = None
    start = 0
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        init_params, start = ckpt.to_params(), ckpt.step
        if ckpt.seed != cfg.train.seed:
            logger.warning(f"Resuming with seed {cfg.train.seed}, checkpoint was trained with {ckpt.seed}")
        if ckpt.config_digest and ckpt.config_digest != digest:
            logger.warning("Checkpoint was written under a different configuration")
        truncate_jsonl(metrics_path, start)
        logger.info(f"Resuming from {args.resume} at iteration {start}")
    else:
        truncate_jsonl(metrics_path, 0)

    def _save(params: PolicyParams, step: int) -> None:
        ckpt = Checkpoint.from_params(params, step, cfg.train.seed, digest, grid=cfg.grid.model_dump())
        save_checkpoint(ckpt_path, ckpt)

    def _on_iteration(it: int, params: PolicyParams, record: dict) -> None:
        append_jsonl(metrics_path, record)
        done = it + 1
        if done % cfg.train.checkpoint_every == 0 and done < cfg.train.iterations:
            _save(params, done)

    try:
        params, metrics = train(
            states,
            cfg.train,
            cfg.reward,
            init_params=init_params,
            start_iteration=start,
            on_iteration=_on_iteration,
        )
    except NonFiniteError as e:
        append_jsonl(out_dir / "failure.jsonl", {"error": str(e), **e.record})
        raise

    _save(params, max(start, cfg.train.iterations))
    logger.info(f"Training finished after {len(metrics)} iterations -> {ckpt_path}")
    return EXIT_OK


# ----- eval -----------------------------------------------------------------

def cmd_eval(args) -> int:
    cfg = _load_config(args)
    ckpt = load_checkpoint(args.checkpoint)
    params = ckpt.to_params()
    grid = GridConfig(**ckpt.grid) if ckpt.grid else cfg.grid

    if args.suite:
        tasks = load_suite(args.suite)
    else:
        tasks = build_suite(cfg)
    draws = args.draws if args.draws is not None else cfg.eval.draws
    seed = args.seed if args.seed is not None else cfg.eval.seed

    report = evaluate(params, tasks, draws, seed, grid=grid, reward_cfg=cfg.reward)
    _print_json(report.model_dump())
    return EXIT_OK


# ----- ablate / sweep -------------------------------------------------------

def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    draws = args.draws if args.draws is not None else cfg.eval.draws
    seed = args.seed if args.seed is not None else cfg.eval.seed

    results = run_ablation(cfg, draws, seed)
    _write_json(Path(cfg.paths.output_dir) / "ablation.json", results)
    _print_json(results)
    return EXIT_OK


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _clip_pairs(text: str) -> List[Tuple[float, float]]:
    pairs = []
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        low, _, high = chunk.partition(":")
        if not high:
            raise ValueError(f"clip pair {chunk!r} must look like low:high")
        pairs.append((float(low), float(high)))
    return pairs


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    draws = args.draws if args.draws is not None else cfg.eval.draws
    seed = args.seed if args.seed is not None else cfg.eval.seed

    rows = run_sweep(
        cfg,
        group_sizes=_ints(args.group_sizes) if args.group_sizes else [cfg.train.group_size],
        clip_pairs=_clip_pairs(args.clips) if args.clips else [(cfg.train.clip_low, cfg.train.clip_high)],
        kl_betas=_floats(args.kl_betas) if args.kl_betas else [cfg.train.kl_beta],
        draws=draws,
        seed=seed,
    )
    out = Path(cfg.paths.output_dir) / "sweep.jsonl"
    write_jsonl(out, rows)
    for row in rows:
        sys.stdout.write(json.dumps(row) + "\n")
    logger.info(f"Sweep of {len(rows)} points -> {out}")
    return EXIT_OK


# ----- serve ----------------------------------------------------------------

def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=args.reload)
    return EXIT_OK


# ----- parser ---------------------------------------------------------------

def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cell-height", type=int, default=50, help="Window height in pixels (default: 50)")
    p.add_argument("--cell-width", type=int, default=50, help="Window width in pixels (default: 50)")
    p.add_argument("--bins", type=int, default=256, help="Histogram bins, a divisor of 256 (default: 256)")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="Run configuration JSON (default: config/default_run.json)")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--draws", type=int, default=None, help="Samples per task")
    p.add_argument("--seed", type=int, default=None, help="Evaluation seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpo",
        description="Location preference optimization - rewards, GRPO training and a synthetic GUI suite",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy-map", help="Write an image's window entropy map and heatmap")
    p.add_argument("image")
    _add_grid_flags(p)
    p.add_argument("--no-resize", action="store_true", help="Skip the longest-edge resize")
    p.add_argument("--out-dir", default=".", help="Output directory (default: .)")
    p.set_defaults(func=cmd_entropy_map)

    p = sub.add_parser("score", help="Score a JSONL dataset of predicted/target actions")
    p.add_argument("dataset")
    _add_grid_flags(p)
    p.add_argument("--coords-frame", choices=["resized", "original"], default="original",
                   help="Frame the dataset coordinates are expressed in (default: original)")
    p.add_argument("--no-rw", action="store_true", help="Disable the window entropy factor")
    p.add_argument("--no-rd", action="store_true", help="Disable the distance factor")
    p.add_argument("--no-resize", action="store_true", help="Skip the longest-edge resize")
    p.add_argument("--workers", type=int, default=1, help="Scoring threads (default: 1)")
    p.add_argument("--out-dir", default=".", help="Output directory (default: .)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("gen-data", help="Generate a synthetic GUI suite")
    p.add_argument("--count", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="data")
    p.add_argument("--suite", default="suite", help="Suite name (default: suite)")
    p.add_argument("--width", type=int, default=500)
    p.add_argument("--height", type=int, default=500)
    p.add_argument("--min-widgets", type=int, default=3)
    p.add_argument("--max-widgets", type=int, default=6)
    p.add_argument("--min-size", type=int, default=40)
    p.add_argument("--max-size", type=int, default=120)
    p.add_argument("--background", type=int, default=200)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="Train the softmax policy with GRPO")
    _add_config_flags(p)
    p.add_argument("--resume", help="Checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a checkpoint on a suite")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--suite", help="Suite index JSONL (default: generate from config)")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="Train and compare the full, no_rw and no_rd rewards")
    _add_config_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="Train over a grid of G, clip ranges and beta")
    _add_config_flags(p)
    p.add_argument("--group-sizes", help="Comma-separated G values, e.g. 8,16")
    p.add_argument("--clips", help="Comma-separated low:high pairs, e.g. 0.2:0.28,0.2:0.2")
    p.add_argument("--kl-betas", help="Comma-separated beta values, e.g. 0,1e-4")
    _add_eval_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="Run the HTTP scoring service")
    p.add_argument("--host", default="0.0.0.0")
    p.add_argument("--port", type=int, default=8000, help="Port to run the server on (default: 8000)")
    p.add_argument("--reload", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def _split_overrides(parser: argparse.ArgumentParser, argv: Sequence[str]):
    args, extra = parser.parse_known_args(argv)
    overrides = [a for a in extra if a.startswith("--") and "=" in a]
    unknown = [a for a in extra if a not in overrides]
    if unknown:
        parser.error(f"unrecognized arguments: {' '.join(unknown)}")
    if overrides and not hasattr(args, "config"):
        parser.error(f"{args.command} does not take config overrides")
    args.overrides = overrides
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = _split_overrides(parser, list(argv) if argv is not None else sys.argv[1:])
    except SystemExit as e:
        return int(e.code or 0)

    try:
        return args.func(args)
    except (OSError, ValidationError, ValueError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except PipelineError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

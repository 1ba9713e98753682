"""
Experiments - reward ablations and hyperparameter sweeps on a synthetic suite.
"""

import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from app.core.config import RunConfig
from app.core.grpo import TrainConfig, TrainingState, train
from app.core.synthenv import SynthTask, evaluate, generate_suite, load_suite, training_states

logger = logging.getLogger(__name__)

ABLATION_VARIANTS: Dict[str, Dict[str, bool]] = {
    "full": {"use_rw": True, "use_rd": True},
    "no_rw": {"use_rw": False, "use_rd": True},
    "no_rd": {"use_rw": True, "use_rd": False},
}


def build_suite(cfg: RunConfig) -> List[SynthTask]:
    """The configured dataset index if one is set, otherwise a freshly generated suite."""
    if cfg.paths.dataset:
        tasks = load_suite(cfg.paths.dataset)
        logger.info(f"Loaded {len(tasks)} tasks from {cfg.paths.dataset}")
        return tasks
    return generate_suite(cfg.suite_size, cfg.suite_seed, cfg.env)


def _train_and_evaluate(
    cfg: RunConfig,
    tasks: Sequence[SynthTask],
    states: Sequence[TrainingState],
    draws: int,
    seed: int,
) -> dict:
    params, metrics = train(states, cfg.train, cfg.reward)
    # every variant is judged by the full reward
    full = cfg.reward.model_copy(update={"use_rw": True, "use_rd": True})
    report = evaluate(params, tasks, draws, seed, grid=cfg.grid, reward_cfg=full, states=states)
    out = report.model_dump()
    out["final_train_reward"] = metrics[-1]["mean_reward"] if metrics else None
    return out


def run_ablation(
    base: RunConfig,
    draws: int,
    seed: int,
    tasks: Optional[Sequence[SynthTask]] = None,
) -> Dict[str, dict]:
    """Train full / no_rw / no_rd from the same seed and evaluate each with the full reward."""
    tasks = list(tasks) if tasks is not None else build_suite(base)
    states = training_states(tasks, base.grid)

    results: Dict[str, dict] = {}
    for name, toggles in ABLATION_VARIANTS.items():
        cfg = base.model_copy(update={"reward": base.reward.model_copy(update=toggles)})
        logger.info(f"Ablation variant {name}: {toggles}")
        results[name] = _train_and_evaluate(cfg, tasks, states, draws, seed)
    return results


def run_sweep(
    base: RunConfig,
    group_sizes: Sequence[int],
    clip_pairs: Sequence[Tuple[float, float]],
    kl_betas: Sequence[float],
    draws: int,
    seed: int,
    tasks: Optional[Sequence[SynthTask]] = None,
) -> List[dict]:
    """One training run per (G, clip pair, beta) grid point, in nested input order."""
    tasks = list(tasks) if tasks is not None else build_suite(base)
    states = training_states(tasks, base.grid)

    rows: List[dict] = []
    for g, (low, high), beta in itertools.product(group_sizes, clip_pairs, kl_betas):
        train_cfg = TrainConfig.model_validate(
            {**base.train.model_dump(), "group_size": g, "clip_low": low, "clip_high": high, "kl_beta": beta}
        )
        cfg = base.model_copy(update={"train": train_cfg})
        logger.info(f"Sweep point G={g} clip=({low}, {high}) beta={beta}")
        result = _train_and_evaluate(cfg, tasks, states, draws, seed)
        rows.append({"group_size": g, "clip_low": low, "clip_high": high, "kl_beta": beta, **result})
    return rows

"""Full-length training runs on the default synthetic suite. Run with `pytest -m slow`."""

import numpy as np
import pytest

from app.core.config import RunConfig
from app.core.experiments import run_ablation
from app.core.grpo import train
from app.core.policy import PolicyParams
from app.core.synthenv import evaluate, generate_suite, training_states

pytestmark = pytest.mark.slow

DRAWS = 64
EVAL_SEED = 1234


@pytest.fixture(scope="module")
def cfg():
    return RunConfig()


@pytest.fixture(scope="module")
def suite(cfg):
    tasks = generate_suite(cfg.suite_size, cfg.suite_seed, cfg.env)
    return tasks, training_states(tasks, cfg.grid)


@pytest.fixture(scope="module")
def trained(cfg, suite):
    _, states = suite
    return train(states, cfg.train, cfg.reward)


def _smooth(values, window=20):
    kernel = np.ones(window) / window
    return np.convolve(np.asarray(values, dtype=np.float64), kernel, mode="valid")


def test_distance_halves(cfg, suite, trained):
    tasks, states = suite
    params, _ = trained
    uniform = PolicyParams.zeros(params.action_types, params.rows, params.cols)
    before = evaluate(uniform, tasks, DRAWS, EVAL_SEED, cfg.grid, cfg.reward, states)
    after = evaluate(params, tasks, DRAWS, EVAL_SEED, cfg.grid, cfg.reward, states)
    assert after.mean_distance_px <= 0.5 * before.mean_distance_px
    assert after.hit_rate > before.hit_rate
    assert after.mean_reward > before.mean_reward


def test_reward_trends_up(trained):
    _, metrics = trained
    smoothed = _smooth([m["mean_reward"] for m in metrics])
    third = len(smoothed) // 3
    assert smoothed[-1] > smoothed[third]
    assert smoothed[2 * third:].min() >= smoothed[third]


def test_learns_entropy_preference(trained):
    params, _ = trained
    assert params.beta > 0.0


def test_ablation_ordering(cfg, suite):
    tasks, _ = suite
    results = run_ablation(cfg, DRAWS, EVAL_SEED, tasks=tasks)
    assert results["no_rd"]["mean_distance_px"] > results["full"]["mean_distance_px"]
    assert results["no_rd"]["mean_reward"] < results["full"]["mean_reward"]
    assert results["no_rw"]["mean_reward"] <= results["full"]["mean_reward"] + 0.01
